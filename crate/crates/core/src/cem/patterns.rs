//! Current injection patterns and electrode measurement operators.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Current patterns, one row of electrode currents per injection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentPatterns {
    pub currents: Vec<Vec<f64>>,
}

impl CurrentPatterns {
    /// Validates that every pattern has `n_electrodes` entries summing to zero.
    pub fn new(currents: Vec<Vec<f64>>, n_electrodes: usize) -> Result<Self> {
        if currents.is_empty() {
            return Err(Error::InvalidParameter("no current patterns".into()));
        }
        for (j, row) in currents.iter().enumerate() {
            if row.len() != n_electrodes {
                return Err(Error::InvalidParameter(format!(
                    "pattern {j} has {} entries, expected {n_electrodes}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            let scale = row.iter().map(|c| c.abs()).fold(0.0, f64::max).max(1.0);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!("pattern {j} does not conserve charge (sum {sum})")));
            }
        }
        Ok(Self { currents })
    }

    /// `+amplitude` on electrode `j`, `-amplitude` on `j + 1 (mod L)`.
    pub fn adjacent(n_electrodes: usize, amplitude: f64) -> Self {
        let currents = (0..n_electrodes)
            .map(|j| {
                let mut row = vec![0.0; n_electrodes];
                row[j] += amplitude;
                row[(j + 1) % n_electrodes] -= amplitude;
                row
            })
            .collect();
        Self { currents }
    }

    pub fn len(&self) -> usize {
        self.currents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.currents.is_empty()
    }

    pub fn n_electrodes(&self) -> usize {
        self.currents[0].len()
    }
}

/// Linear map from electrode potentials to readings, applied identically for
/// every injection. Each row holds the electrode weights of one reading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOperator {
    pub rows: Vec<Vec<f64>>,
}

impl MeasurementOperator {
    pub fn new(rows: Vec<Vec<f64>>, n_electrodes: usize) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != n_electrodes) {
            return Err(Error::InvalidParameter("measurement rows must have L entries".into()));
        }
        Ok(Self { rows })
    }

    /// Readings `U_k - U_{k+1 (mod L)}`.
    pub fn adjacent_difference(n_electrodes: usize) -> Self {
        let rows = (0..n_electrodes)
            .map(|k| {
                let mut row = vec![0.0; n_electrodes];
                row[k] += 1.0;
                row[(k + 1) % n_electrodes] -= 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    /// Every electrode potential read directly.
    pub fn full_potential(n_electrodes: usize) -> Self {
        let rows = (0..n_electrodes)
            .map(|k| {
                let mut row = vec![0.0; n_electrodes];
                row[k] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, potentials: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().zip(potentials).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Current patterns and measurement operator of one experiment. Data vectors
/// are stacked injection-major: reading `k` of injection `j` sits at
/// `j * K + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub patterns: CurrentPatterns,
    pub measurement: MeasurementOperator,
}

impl Protocol {
    /// Adjacent injection with adjacent-difference readings.
    pub fn adjacent(n_electrodes: usize, amplitude: f64) -> Self {
        Self {
            patterns: CurrentPatterns::adjacent(n_electrodes, amplitude),
            measurement: MeasurementOperator::adjacent_difference(n_electrodes),
        }
    }

    pub fn n_data(&self) -> usize {
        self.patterns.len() * self.measurement.len()
    }

    pub fn n_electrodes(&self) -> usize {
        self.patterns.n_electrodes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_patterns_conserve_charge() {
        let p = CurrentPatterns::adjacent(16, 3.0);
        assert!(CurrentPatterns::new(p.currents.clone(), 16).is_ok());
        assert_eq!(p.currents[15][15], 3.0);
        assert_eq!(p.currents[15][0], -3.0);
    }

    #[test]
    fn unbalanced_pattern_rejected() {
        assert!(CurrentPatterns::new(vec![vec![1.0, 0.0, 0.0]], 3).is_err());
    }

    #[test]
    fn adjacent_protocol_has_256_readings() {
        assert_eq!(Protocol::adjacent(16, 3.0).n_data(), 256);
    }
}
