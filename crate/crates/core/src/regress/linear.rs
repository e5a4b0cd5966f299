use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bayes::{fit_bayes_ridge, BayesParams};
use super::{check_xy, RegressError, Regressor, Standardizer};
use crate::numeric::{dot, exact_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Ols,
    Ridge,
    Lasso,
    BayesRidge,
}

impl LinearKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearKind::Ols => "ols",
            LinearKind::Ridge => "ridge",
            LinearKind::Lasso => "lasso",
            LinearKind::BayesRidge => "bayes_ridge",
        }
    }
}

impl fmt::Display for LinearKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinearKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ols" => Ok(LinearKind::Ols),
            "ridge" => Ok(LinearKind::Ridge),
            "lasso" => Ok(LinearKind::Lasso),
            "bayes" | "bayes_ridge" | "bayesian_ridge" => Ok(LinearKind::BayesRidge),
            _ => Err(format!("unknown linear model {s:?}")),
        }
    }
}

/// Hyperparameters for [`fit_linear`]. Fields that do not apply to the
/// chosen kind are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    /// Penalty strength. Ridge minimizes `|y - Xw|^2 + lambda |w|^2`
    /// (default 1.0); lasso minimizes `|y - Xw|^2 / (2n) + lambda |w|_1`
    /// (default 0.01).
    pub lambda: Option<f64>,
    /// z-score features before fitting. When off, features are only centered.
    pub standardize: bool,
    /// Lasso: stop once no coefficient moves more than this in a sweep.
    pub lasso_tolerance: f64,
    pub lasso_max_sweeps: usize,
    pub bayes: BayesParams,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            lambda: None,
            standardize: true,
            lasso_tolerance: 1e-7,
            lasso_max_sweeps: 10_000,
            bayes: BayesParams::default(),
        }
    }
}

impl LinearParams {
    fn lambda_for(&self, kind: LinearKind) -> Result<f64, RegressError> {
        let lambda = match (kind, self.lambda) {
            (_, Some(l)) => l,
            (LinearKind::Lasso, None) => 0.01,
            _ => 1.0,
        };
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(RegressError::InvalidHyper(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(lambda)
    }
}

/// Convergence record of an iterative fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Bayesian ridge: objective value after each accepted iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_evidence: Vec<f64>,
}

/// A fitted member of the linear family. Weights act on standardized
/// features; the intercept is the training target mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub hyper: BTreeMap<String, f64>,
    pub standardizer: Standardizer,
    #[serde(default)]
    pub diagnostics: FitDiagnostics,
}

impl LinearModel {
    /// A model from explicit parts, e.g. for tests or imported weights.
    pub fn from_parts(
        kind: LinearKind,
        weights: Vec<f64>,
        intercept: f64,
        standardizer: Standardizer,
    ) -> Result<Self, RegressError> {
        if weights.len() != standardizer.dimension() {
            return Err(RegressError::InvalidHyper(format!(
                "{} weights for a {}-dimensional standardizer",
                weights.len(),
                standardizer.dimension()
            )));
        }
        Ok(LinearModel {
            kind,
            weights,
            intercept,
            hyper: BTreeMap::new(),
            standardizer,
            diagnostics: FitDiagnostics::default(),
        })
    }
}

impl Regressor for LinearModel {
    fn dimension(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, row: &[f64]) -> Result<f64, RegressError> {
        let z = self.standardizer.apply_row(row)?;
        Ok(dot(&self.weights, &z) + self.intercept)
    }
}

/// Centered design and targets shared by every linear fit.
pub(super) struct Design {
    pub standardizer: Standardizer,
    /// n x d, standardized (or centered) features.
    pub z: DMatrix<f64>,
    pub y_mean: f64,
    pub yc: DVector<f64>,
    /// Columns that are not identically zero after centering.
    pub active: Vec<usize>,
}

impl Design {
    pub fn new(x: &[Vec<f64>], y: &[f64], standardize: bool) -> Result<Self, RegressError> {
        let d = check_xy(x, y)?;
        let standardizer = if standardize {
            Standardizer::fit(x)?
        } else {
            Standardizer::fit_center_only(x)?
        };
        let rows = standardizer.apply(x)?;
        let n = rows.len();
        let z = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let y_mean = if y.iter().all(|v| *v == y[0]) {
            y[0]
        } else {
            exact_sum(y.iter().copied()) / n as f64
        };
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let active = (0..d)
            .filter(|&j| z.column(j).iter().any(|v| v.abs() > 1e-12 * standardizer.means()[j].abs().max(1.0)))
            .collect();
        Ok(Design {
            standardizer,
            z,
            y_mean,
            yc,
            active,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    /// Design restricted to active columns.
    pub fn active_z(&self) -> DMatrix<f64> {
        if self.active.len() == self.d() {
            self.z.clone()
        } else {
            self.z.select_columns(&self.active)
        }
    }

    /// Scatters active-column weights back to full width.
    pub fn expand(&self, w_active: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.d()];
        for (&j, &v) in self.active.iter().zip(w_active) {
            w[j] = v;
        }
        w
    }
}

/// Fits one member of the linear family.
pub fn fit_linear(
    x: &[Vec<f64>],
    y: &[f64],
    kind: LinearKind,
    params: &LinearParams,
) -> Result<LinearModel, RegressError> {
    let design = Design::new(x, y, params.standardize)?;
    let mut hyper = BTreeMap::new();
    let (weights, diagnostics) = match kind {
        LinearKind::Ols => (solve_ridge(&design, 0.0)?, FitDiagnostics::default()),
        LinearKind::Ridge => {
            let lambda = params.lambda_for(kind)?;
            hyper.insert("lambda".to_string(), lambda);
            (solve_ridge(&design, lambda)?, FitDiagnostics::default())
        }
        LinearKind::Lasso => {
            let lambda = params.lambda_for(kind)?;
            hyper.insert("lambda".to_string(), lambda);
            lasso(&design, lambda, params.lasso_tolerance, params.lasso_max_sweeps)?
        }
        LinearKind::BayesRidge => {
            let fit = fit_bayes_ridge(&design, &params.bayes)?;
            hyper.insert("noise_precision".to_string(), fit.noise_precision);
            hyper.insert("weight_precision".to_string(), fit.weight_precision);
            hyper.insert("alpha_1".to_string(), params.bayes.alpha_1);
            hyper.insert("alpha_2".to_string(), params.bayes.alpha_2);
            hyper.insert("lambda_1".to_string(), params.bayes.lambda_1);
            hyper.insert("lambda_2".to_string(), params.bayes.lambda_2);
            (fit.weights, fit.diagnostics)
        }
    };
    hyper.insert("standardize".to_string(), f64::from(u8::from(params.standardize)));
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(RegressError::NonFinite { row: i });
    }
    Ok(LinearModel {
        kind,
        weights,
        intercept: design.y_mean,
        hyper,
        standardizer: design.standardizer,
        diagnostics,
    })
}

/// Solves `(Z'Z + lambda I) w = Z'y` by Cholesky on the active columns.
fn solve_ridge(design: &Design, lambda: f64) -> Result<Vec<f64>, RegressError> {
    if design.active.is_empty() {
        return Ok(vec![0.0; design.d()]);
    }
    let z = design.active_z();
    let mut gram = z.tr_mul(&z);
    let max_diag = gram.diagonal().max();
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = z.tr_mul(&design.yc);
    let chol = gram.clone().cholesky().ok_or(RegressError::Singular)?;
    // A pivot this small relative to the Gram scale means the columns are
    // linearly dependent up to rounding.
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * max_diag.max(lambda)) {
        return Err(RegressError::Singular);
    }
    let w = chol.solve(&rhs);
    Ok(design.expand(w.as_slice()))
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on `|yc - Zw|^2 / (2n) + lambda |w|_1`.
fn lasso(
    design: &Design,
    lambda: f64,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, FitDiagnostics), RegressError> {
    let n = design.n() as f64;
    let z = &design.z;
    let cols: Vec<usize> = design.active.clone();
    let col_sq: Vec<f64> = cols.iter().map(|&j| z.column(j).norm_squared() / n).collect();
    let mut w = vec![0.0; design.d()];
    let mut residual = design.yc.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let mut max_change = 0.0_f64;
        for (&j, &sq) in cols.iter().zip(&col_sq) {
            let col = z.column(j);
            let old = w[j];
            let rho = col.dot(&residual) / n + sq * old;
            let new = soft_threshold(rho, lambda) / sq;
            if new != old {
                residual.axpy(old - new, &col, 1.0);
                w[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        last_change = max_change;
        if max_change < tolerance {
            return Ok((
                w,
                FitDiagnostics {
                    iterations: sweep,
                    log_evidence: Vec::new(),
                },
            ));
        }
    }
    Err(RegressError::NotConverged {
        solver: "lasso coordinate descent",
        iterations: max_sweeps,
        measure: "max coefficient change",
        value: last_change,
    })
}
