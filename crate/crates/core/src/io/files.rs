//! JSON and CSV helpers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::geometry::Point;
use crate::pipeline::Raster;
use crate::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Parse { path: path.display().to_string(), message: format!("{other:?}") },
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// `x,y` rows.
pub fn write_points_csv(path: &Path, points: &[Point]) -> Result<()> {
    write_rows(path, &["x", "y"], points.iter().map(|p| vec![p.x, p.y]))
}

/// `x,y,value` rows.
pub fn write_samples_csv(path: &Path, points: &[Point], values: &[f64]) -> Result<()> {
    write_rows(path, &["x", "y", "value"], points.iter().zip(values).map(|(p, v)| vec![p.x, p.y, *v]))
}

/// `x,y,mapped_x,mapped_y` rows.
pub fn write_pairs_csv(path: &Path, pairs: &[(Point, Point)]) -> Result<()> {
    write_rows(path, &["x", "y", "mapped_x", "mapped_y"], pairs.iter().map(|(a, b)| vec![a.x, a.y, b.x, b.y]))
}

/// `x,y,value` rows for the raster cells inside the region.
pub fn write_raster_csv(path: &Path, raster: &Raster) -> Result<()> {
    let rows = raster.values.iter().enumerate().filter_map(|(k, v)| {
        let c = raster.center(k % raster.nx, k / raster.nx);
        v.map(|v| vec![c.x, c.y, v])
    });
    write_rows(path, &["x", "y", "value"], rows)
}
