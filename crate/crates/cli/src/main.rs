//! `eitshape`: simulate, reconstruct and compare EIT data.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 numerical
//! failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eitshape::cem::MeasurementSet;
use eitshape::geometry::{domain_error, Domain2D};
use eitshape::io::{
    displaced_truth, load_record, load_result, parse_displacement, read_json, save_failure, save_result,
    save_traditional, simulate_measurements, write_json, write_pairs_csv, write_raster_csv, write_samples_csv,
    write_simulation, ModelRecord, ModelSpec, ResultRecord, RunConfig,
};
use eitshape::pipeline::{
    consistency_check, diff_fixed_geometry, diff_two_domains, metrics, rasterize, run_full, run_traditional,
    DifferenceField,
};
use eitshape::{Error, Result};

#[derive(Parser)]
#[command(name = "eitshape", version, about = "Shape-deforming EIT reconstruction")]
struct Cli {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurements on the configured phantom.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// `<fraction>:<seed>[,<seed>...]`: one data set per seed with
        /// randomly displaced electrodes.
        #[arg(long)]
        displace: Option<String>,
    },
    /// Reconstruct from measurements in a model domain.
    Reconstruct {
        #[arg(long)]
        measurements: PathBuf,
        /// `circle:<radius>[@x,y]` or `file:<domain.json>`.
        #[arg(long, default_value = "circle:17.5")]
        model: String,
        #[arg(long)]
        out: PathBuf,
        /// Physical domain JSON; enables the domain error.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Isotropic reconstruction in the model domain only.
        #[arg(long)]
        traditional: bool,
    },
    /// Difference image between two data sets.
    Diff {
        /// Result bundle of the reference data.
        #[arg(long)]
        result: PathBuf,
        /// Measurements file (`fixed`) or result bundle (`domains`).
        #[arg(long)]
        against: PathBuf,
        #[arg(long, value_enum)]
        mode: DiffMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the maps of two reconstructions in the same model domain.
    Consistency {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metrics of a result bundle as JSON.
    Metrics {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DiffMode {
    Fixed,
    Domains,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Meshing(_) => 2,
        e if e.is_numeric() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Simulate { out, displace } => simulate(&cfg, &out, displace.as_deref()),
        Command::Reconstruct { measurements, model, out, truth, traditional } => {
            reconstruct(&cfg, &measurements, &model, &out, truth.as_deref(), traditional)
        }
        Command::Diff { result, against, mode, out } => diff(&cfg, &result, &against, mode, &out),
        Command::Consistency { a, b, out } => consistency(&a, &b, &out),
        Command::Metrics { result, truth } => print_metrics(&result, truth.as_deref()),
    }
}

fn simulate(cfg: &RunConfig, out: &Path, displace: Option<&str>) -> Result<()> {
    let truth = cfg.truth_domain()?;
    let Some(spec) = displace else {
        let (ms, record) = simulate_measurements(cfg, &truth)?;
        return write_simulation(out, &ms, &truth, &record);
    };
    let (fraction, seeds) = parse_displacement(spec)?;
    for seed in seeds {
        let moved = displaced_truth(&truth, fraction, seed)?;
        let (ms, record) = simulate_measurements(cfg, &moved)?;
        write_simulation(&out.join(format!("seed_{seed}")), &ms, &moved, &record)?;
    }
    Ok(())
}

fn reconstruct(
    cfg: &RunConfig,
    measurements: &Path,
    model: &str,
    out: &Path,
    truth: Option<&Path>,
    traditional: bool,
) -> Result<()> {
    let ms: MeasurementSet = read_json(measurements)?;
    let domain = model.parse::<ModelSpec>()?.domain(cfg)?;
    let truth: Option<Domain2D> = truth.map(read_json).transpose()?;
    let model = cfg.inversion_model(&domain, ms.protocol()?)?;
    let record = ModelRecord::new(&domain, &model);
    let rc = &cfg.reconstruction;
    if traditional {
        let t = run_traditional(&ms.voltages, &model, rc)?;
        save_traditional(out, &t, &record, &ms, rc)?;
        println!("relative residual: {:.4e}", t.relative_residual);
        return Ok(());
    }
    let targets = cfg.targets(truth.as_ref())?;
    match run_full(&ms.voltages, &domain, &model, &targets, rc) {
        Ok(r) => {
            let truth_boundary = truth.as_ref().map(|t| t.boundary());
            let m = save_result(out, &r, &record, &ms, rc, &targets, truth_boundary, cfg.raster_resolution)?;
            println!("relative residual: {:.4e}", m.relative_residual);
            if let (Some(e), Some(em)) = (m.domain_error, m.model_domain_error) {
                println!("domain error: {:.2}% (model domain {:.2}%)", 100.0 * e, 100.0 * em);
            }
            Ok(())
        }
        Err(f) => {
            save_failure(out, &f, &record, &ms)?;
            eprintln!("pipeline failed during {}", f.stage);
            Err(f.error)
        }
    }
}

fn write_difference(out: &Path, field: &DifferenceField, resolution: usize) -> Result<()> {
    eitshape::io::create_dir(out)?;
    write_samples_csv(&out.join("diff_samples.csv"), &field.points, &field.values)?;
    let raster = rasterize(&field.boundary, &field.points, &field.values, resolution)?;
    write_raster_csv(&out.join("diff.csv"), &raster)?;
    println!("energy: {:.6e}, max |diff|: {:.6e}", field.energy(), field.max_abs());
    Ok(())
}

fn diff(cfg: &RunConfig, result: &Path, against: &Path, mode: DiffMode, out: &Path) -> Result<()> {
    match mode {
        DiffMode::Fixed => {
            if against.is_dir() {
                return Err(Error::Config("fixed mode compares against a measurements file".into()));
            }
            let r1 = load_result(result)?;
            let ms: MeasurementSet = read_json(against)?;
            if ms.protocol()? != *r1.model.pixel_model().protocol() {
                return Err(Error::Config("measurement protocols differ".into()));
            }
            let field = diff_fixed_geometry(&r1.result, &ms.voltages, &r1.model, &r1.record.config)?;
            write_difference(out, &field, cfg.raster_resolution)
        }
        DiffMode::Domains => {
            if !against.is_dir() {
                return Err(Error::Config("domains mode compares against a result bundle".into()));
            }
            let (r1, r2) = (load_result(result)?, load_result(against)?);
            let field = diff_two_domains(&r1.result, &r2.result, cfg.raster_resolution)?;
            write_difference(out, &field, cfg.raster_resolution)
        }
    }
}

fn consistency(a: &Path, b: &Path, out: &Path) -> Result<()> {
    let (ra, rb) = (load_result(a)?, load_result(b)?);
    let stats = consistency_check(&ra.result, &rb.result).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::Config(m),
        e => e,
    })?;
    eitshape::io::create_dir(out)?;
    write_json(&out.join("stats.json"), &stats)?;
    write_pairs_csv(&out.join("mapped_boundary.csv"), &stats.pairs)?;
    println!("max {:.4e}, mean {:.4e} (relative to diameter {:.3})", stats.max, stats.mean, stats.diameter);
    Ok(())
}

fn print_metrics(result: &Path, truth: Option<&Path>) -> Result<()> {
    let truth: Option<Domain2D> = truth.map(read_json).transpose()?;
    let json = match load_record(result)?.2 {
        ResultRecord::Full(_) => {
            let r = load_result(result)?;
            serde_json::to_value(metrics(&r.result, truth.as_ref().map(|t| t.boundary()))?)
        }
        ResultRecord::Traditional(t) => {
            let model_error = match &truth {
                Some(t) => Some(domain_error(t.boundary(), load_record(result)?.0.domain.boundary())?),
                None => None,
            };
            serde_json::to_value(serde_json::json!({
                "relative_residual": t.relative_residual,
                "model_domain_error": model_error,
            }))
        }
        ResultRecord::Failed(f) => {
            return Err(Error::Config(format!("bundle holds a failed run ({}: {})", f.stage, f.error)))
        }
    }
    .map_err(|e| Error::Parse { path: result.display().to_string(), message: e.to_string() })?;
    println!("{}", serde_json::to_string_pretty(&json).expect("JSON value serializes"));
    Ok(())
}
