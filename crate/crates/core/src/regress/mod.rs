//! Per-modality regressors: least squares, ridge, lasso, Bayesian ridge and
//! epsilon-SVR.
//!
//! Every model owns a [`Standardizer`] fitted on its training rows and
//! applies it before scoring, so callers always pass raw feature rows.
//! Intercepts are never penalized: the linear family centers the targets
//! and the SVR carries an explicit bias.

mod bayes;
mod linear;
mod svr;

pub use bayes::BayesParams;
pub use linear::{fit_linear, FitDiagnostics, LinearKind, LinearModel, LinearParams};
pub use svr::{fit_svr, KernelKind, SvrKernel, SvrModel, SvrParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("input matrix has no rows")]
    Empty,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("row {row} has {found} features, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("Gram matrix is singular (rank-deficient features); use ridge with a positive lambda instead")]
    Singular,
    #[error("{solver} did not converge after {iterations} iterations (last {measure} = {value:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        measure: &'static str,
        value: f64,
    },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
}

/// Anything that maps raw feature rows to scores.
pub trait Regressor {
    fn dimension(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> Result<f64, RegressError>;

    /// Raw, unclamped scores for every row.
    fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, RegressError> {
        x.iter().map(|row| self.predict_row(row)).collect()
    }
}

/// Free-function form of [`Regressor::predict`].
pub fn predict<M: Regressor + ?Sized>(model: &M, x: &[Vec<f64>]) -> Result<Vec<f64>, RegressError> {
    model.predict(x)
}

/// Per-dimension z-scoring. Constant dimensions keep a unit scale, so they
/// map to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and population standard deviations.
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, RegressError> {
        Self::fit_inner(x, true)
    }

    /// Centers without scaling (all `stds` are 1).
    pub fn fit_center_only(x: &[Vec<f64>]) -> Result<Self, RegressError> {
        Self::fit_inner(x, false)
    }

    /// The identity transform on `dimension` features.
    pub fn identity(dimension: usize) -> Self {
        Standardizer {
            means: vec![0.0; dimension],
            stds: vec![1.0; dimension],
        }
    }

    pub fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Result<Self, RegressError> {
        if means.len() != stds.len() {
            return Err(RegressError::InvalidHyper(
                "standardizer means and stds differ in length".into(),
            ));
        }
        if stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) || means.iter().any(|m| !m.is_finite()) {
            return Err(RegressError::InvalidHyper(
                "standardizer stds must be positive and finite".into(),
            ));
        }
        Ok(Standardizer { means, stds })
    }

    fn fit_inner(x: &[Vec<f64>], scale: bool) -> Result<Self, RegressError> {
        let d = check_matrix(x)?;
        let n = x.len() as f64;
        let mut means = vec![0.0; d];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![1.0; d];
        if scale {
            let mut ss = vec![0.0; d];
            for row in x {
                for ((s, v), m) in ss.iter_mut().zip(row).zip(&means) {
                    *s += (v - m) * (v - m);
                }
            }
            for ((std, s), m) in stds.iter_mut().zip(ss).zip(&means) {
                let sd = (s / n).sqrt();
                // Rounding in the mean leaves a residue around 1e-16 * |mean|
                // on genuinely constant columns.
                let floor = 1e-12 * m.abs().max(1e-300);
                *std = if sd > floor && sd > 0.0 { sd } else { 1.0 };
            }
        }
        Ok(Standardizer { means, stds })
    }

    pub fn dimension(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>, RegressError> {
        if row.len() != self.dimension() {
            return Err(RegressError::DimensionMismatch {
                row: 0,
                expected: self.dimension(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, RegressError> {
        x.iter()
            .enumerate()
            .map(|(i, row)| {
                self.apply_row(row).map_err(|e| match e {
                    RegressError::DimensionMismatch { expected, found, .. } => {
                        RegressError::DimensionMismatch { row: i, expected, found }
                    }
                    other => other,
                })
            })
            .collect()
    }
}

pub fn fit_standardizer(x: &[Vec<f64>]) -> Result<Standardizer, RegressError> {
    Standardizer::fit(x)
}

/// Validates a row matrix and returns its width.
pub(crate) fn check_matrix(x: &[Vec<f64>]) -> Result<usize, RegressError> {
    let first = x.first().ok_or(RegressError::Empty)?;
    let d = first.len();
    if d == 0 {
        return Err(RegressError::DimensionMismatch {
            row: 0,
            expected: 1,
            found: 0,
        });
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(RegressError::DimensionMismatch {
                row: i,
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::NonFinite { row: i });
        }
    }
    Ok(d)
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize, RegressError> {
    if x.len() != y.len() {
        return Err(RegressError::LengthMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(RegressError::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let d = check_matrix(x)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite { row: i });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_two_points() {
        let s = fit_standardizer(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(s.means(), &[2.0]);
        assert_eq!(s.stds(), &[1.0]);
        assert_eq!(s.apply(&[vec![1.0], vec![3.0]]).unwrap(), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn standardizer_constant_column() {
        let s = fit_standardizer(&[vec![5.0], vec![5.0]]).unwrap();
        assert_eq!(s.stds(), &[1.0]);
        assert_eq!(s.apply(&[vec![5.0], vec![5.0]]).unwrap(), vec![vec![0.0], vec![0.0]]);

        let s = fit_standardizer(&[vec![0.1], vec![0.1], vec![0.1]]).unwrap();
        assert_eq!(s.stds(), &[1.0]);
        assert!(s.apply_row(&[0.1]).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn standardizer_errors() {
        assert_eq!(fit_standardizer(&[]), Err(RegressError::Empty));
        assert!(matches!(
            fit_standardizer(&[vec![1.0, 2.0], vec![1.0]]),
            Err(RegressError::DimensionMismatch { row: 1, .. })
        ));
        let s = Standardizer::identity(2);
        assert!(matches!(
            s.apply(&[vec![1.0, 2.0], vec![3.0]]),
            Err(RegressError::DimensionMismatch { row: 1, expected: 2, found: 1 })
        ));
    }
}
