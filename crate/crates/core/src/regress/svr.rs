//! Epsilon-support vector regression trained by sequential minimal
//! optimization.
//!
//! The dual is posed over `2n` variables `a = (a+, a-)` with signs
//! `s = (+1, -1)`:
//!
//! ```text
//! min  1/2 a'Qa + p'a     Q_tu = s_t s_u K(x_t, x_u)
//! s.t. 0 <= a <= C,  sum_t s_t a_t = 0
//! p    = (eps - y, eps + y)
//! ```
//!
//! and the regression function is `f(x) = sum_i beta_i K(x_i, x) + b` with
//! `beta_i = a+_i - a-_i`. Each step picks the maximal-violating pair with
//! second-order working-set selection, solves the two-variable subproblem
//! analytically and updates the gradient. Training stops once the KKT gap
//! `m(a) - M(a)` falls below the tolerance.

use std::collections::{HashMap, VecDeque};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_xy, RegressError, Regressor, Standardizer};
use crate::numeric::dot;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
}

impl FromStr for KernelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            _ => Err(format!("unknown kernel {s:?}")),
        }
    }
}

/// A kernel with its parameters resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SvrKernel {
    Rbf { gamma: f64 },
    Linear,
}

impl SvrKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            SvrKernel::Linear => dot(a, b),
            SvrKernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrParams {
    pub kernel: KernelKind,
    /// RBF width; defaults to `1 / (d * var(X))` over the (standardized)
    /// training matrix.
    pub gamma: Option<f64>,
    pub c: f64,
    pub epsilon: f64,
    /// KKT gap at which SMO stops.
    pub tolerance: f64,
    pub max_updates: usize,
    pub standardize: bool,
    /// Kernel row cache budget in megabytes.
    pub cache_mb: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            kernel: KernelKind::Rbf,
            gamma: None,
            c: 1.0,
            epsilon: 0.1,
            tolerance: 1e-3,
            max_updates: 1_000_000,
            standardize: true,
            cache_mb: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: SvrKernel,
    pub c: f64,
    pub epsilon: f64,
    /// Standardized training rows with a nonzero dual coefficient.
    pub support_vectors: Vec<Vec<f64>>,
    /// `beta_j = a+_j - a-_j`, parallel to `support_vectors`.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    /// Pair updates performed.
    pub iterations: usize,
    /// KKT gap at termination.
    pub kkt_gap: f64,
}

impl SvrModel {
    /// Dual objective `1/2 beta'K beta - y'beta + eps |beta|_1` evaluated on
    /// the stored support vectors, given their training targets.
    pub fn dual_objective(&self, targets: &[f64]) -> f64 {
        let n = self.dual_coefs.len();
        assert_eq!(targets.len(), n);
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.dual_coefs[i]
                    * self.dual_coefs[j]
                    * self.kernel.eval(&self.support_vectors[i], &self.support_vectors[j]);
            }
        }
        let lin: f64 = self
            .dual_coefs
            .iter()
            .zip(targets)
            .map(|(b, y)| self.epsilon * b.abs() - y * b)
            .sum();
        0.5 * quad + lin
    }
}

impl Regressor for SvrModel {
    fn dimension(&self) -> usize {
        self.standardizer.dimension()
    }

    fn predict_row(&self, row: &[f64]) -> Result<f64, RegressError> {
        let z = self.standardizer.apply_row(row)?;
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, b)| b * self.kernel.eval(sv, &z))
            .sum::<f64>()
            + self.bias)
    }
}

/// LRU cache of kernel matrix rows over the `n` training points.
struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    kernel: SvrKernel,
    capacity: usize,
    rows: HashMap<usize, Arc<[f64]>>,
    order: VecDeque<usize>,
    parallel: bool,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], kernel: SvrKernel, cache_mb: usize) -> Self {
        let n = x.len();
        let row_bytes = n * std::mem::size_of::<f64>();
        let capacity = ((cache_mb << 20) / row_bytes.max(1)).clamp(2, n.max(2));
        KernelRows {
            x,
            kernel,
            capacity,
            rows: HashMap::new(),
            order: VecDeque::new(),
            parallel: n * x.first().map_or(0, Vec::len) >= 1 << 16,
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = self.rows.get(&i) {
            let r = Arc::clone(r);
            if let Some(pos) = self.order.iter().position(|&k| k == i) {
                self.order.remove(pos);
            }
            self.order.push_back(i);
            return r;
        }
        let xi = &self.x[i];
        let kernel = self.kernel;
        let r: Arc<[f64]> = if self.parallel {
            self.x.par_iter().map(|xj| kernel.eval(xi, xj)).collect::<Vec<_>>().into()
        } else {
            self.x.iter().map(|xj| kernel.eval(xi, xj)).collect::<Vec<_>>().into()
        };
        if self.rows.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        self.rows.insert(i, Arc::clone(&r));
        self.order.push_back(i);
        r
    }
}

/// Fits an epsilon-SVR.
pub fn fit_svr(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel, RegressError> {
    let d = check_xy(x, y)?;
    if !(params.c.is_finite() && params.c > 0.0) {
        return Err(RegressError::InvalidHyper(format!("C must be positive, got {}", params.c)));
    }
    if !(params.epsilon.is_finite() && params.epsilon >= 0.0) {
        return Err(RegressError::InvalidHyper(format!(
            "epsilon must be non-negative, got {}",
            params.epsilon
        )));
    }
    if !(params.tolerance.is_finite() && params.tolerance > 0.0) {
        return Err(RegressError::InvalidHyper("tolerance must be positive".into()));
    }
    let standardizer = if params.standardize {
        Standardizer::fit(x)?
    } else {
        Standardizer::identity(d)
    };
    let z = standardizer.apply(x)?;
    let kernel = match params.kernel {
        KernelKind::Linear => SvrKernel::Linear,
        KernelKind::Rbf => {
            let gamma = match params.gamma {
                Some(g) => g,
                None => default_gamma(&z),
            };
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(RegressError::InvalidHyper(format!("gamma must be positive, got {gamma}")));
            }
            SvrKernel::Rbf { gamma }
        }
    };

    let solution = smo(&z, y, kernel, params)?;
    let n = z.len();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        let beta = solution.alpha[i] - solution.alpha[i + n];
        if beta != 0.0 {
            support_vectors.push(z[i].clone());
            dual_coefs.push(beta);
        }
    }
    Ok(SvrModel {
        kernel,
        c: params.c,
        epsilon: params.epsilon,
        support_vectors,
        dual_coefs,
        bias: -solution.rho,
        standardizer,
        iterations: solution.iterations,
        kkt_gap: solution.gap.max(0.0),
    })
}

/// `1 / (d * var)` over every entry of `z`; 1.0 for a constant matrix.
fn default_gamma(z: &[Vec<f64>]) -> f64 {
    let d = z[0].len();
    let count = (z.len() * d) as f64;
    let mean = z.iter().flatten().sum::<f64>() / count;
    let var = z.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    gap: f64,
}

fn smo(z: &[Vec<f64>], y: &[f64], kernel: SvrKernel, params: &SvrParams) -> Result<Solution, RegressError> {
    let n = z.len();
    let l = 2 * n;
    let c = params.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let idx = |t: usize| if t < n { t } else { t - n };

    let mut rows = KernelRows::new(z, kernel, params.cache_mb);
    let diag: Vec<f64> = z.iter().map(|r| kernel.eval(r, r)).collect();
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { params.epsilon - y[t] } else { params.epsilon + y[t - n] })
        .collect();

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let gap;
    loop {
        // i: maximal -s_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            let in_up = if t < n { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up {
                let v = -sign(t) * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        let row_i = i_sel.map(|i| (i, rows.row(idx(i))));
        for t in 0..l {
            let in_low = if t < n { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = sign(t) * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            if let Some((i, ref ri)) = row_i {
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    // Q_ii + Q_tt - 2 s_i s_t Q_it, with Q_it = s_i s_t K
                    let quad = diag[idx(i)] + diag[idx(t)] - 2.0 * ri[idx(t)];
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            gap = gmax + gmax2;
            break;
        };
        if gmax + gmax2 < params.tolerance {
            gap = gmax + gmax2;
            break;
        }
        if iterations >= params.max_updates {
            return Err(RegressError::NotConverged {
                solver: "SMO",
                iterations,
                measure: "KKT gap",
                value: gmax + gmax2,
            });
        }
        iterations += 1;

        let ki = row_i.expect("i selected").1;
        let kj = rows.row(idx(j));
        let (si, sj) = (sign(i), sign(j));
        let q_ij = si * sj * ki[idx(j)];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if si != sj {
            let mut quad = diag[idx(i)] + diag[idx(j)] + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[idx(i)] + diag[idx(j)] - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_i;
        let daj = alpha[j] - old_j;
        for t in 0..l {
            let st = sign(t);
            let k = idx(t);
            grad[t] += st * (si * ki[k] * dai + sj * kj[k] * daj);
        }
    }

    // Bias from the free variables, or the midpoint of the feasible interval.
    let mut free = 0usize;
    let mut free_sum = 0.0;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..l {
        let st = sign(t);
        let yg = st * grad[t];
        if is_upper(alpha[t]) {
            if st < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if st > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    Ok(Solution {
        alpha,
        rho,
        iterations,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_targets_need_no_support_vectors() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![0.37; 10];
        let m = fit_svr(&x, &y, &SvrParams::default()).unwrap();
        assert!(m.dual_coefs.is_empty());
        assert!((m.bias - 0.37).abs() < 1e-12);
        assert!((m.predict_row(&[100.0, -5.0]).unwrap() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_model_predicts_bias() {
        let m = SvrModel {
            kernel: SvrKernel::Rbf { gamma: 0.5 },
            c: 1.0,
            epsilon: 0.1,
            support_vectors: vec![],
            dual_coefs: vec![],
            bias: 0.3,
            standardizer: Standardizer::identity(3),
            iterations: 0,
            kkt_gap: 0.0,
        };
        assert_eq!(m.predict_row(&[1.0, 2.0, 3.0]).unwrap(), 0.3);
        assert_eq!(m.predict_row(&[-9.0, 0.0, 4.0]).unwrap(), 0.3);
    }

    #[test]
    fn linear_kernel_fits_line_inside_tube() {
        let x: Vec<Vec<f64>> = (0..21).map(|i| vec![i as f64 / 20.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let params = SvrParams {
            kernel: KernelKind::Linear,
            ..SvrParams::default()
        };
        let m = fit_svr(&x, &y, &params).unwrap();
        for (p, t) in m.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() <= 0.1 + 1e-3, "{p} vs {t}");
        }
        let sum: f64 = m.dual_coefs.iter().sum();
        assert!(sum.abs() < 1e-6);
    }

    #[test]
    fn hyperparameter_validation() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![0.0, 1.0];
        for p in [
            SvrParams { c: 0.0, ..SvrParams::default() },
            SvrParams { epsilon: -0.1, ..SvrParams::default() },
            SvrParams { gamma: Some(-1.0), ..SvrParams::default() },
        ] {
            assert!(matches!(fit_svr(&x, &y, &p), Err(RegressError::InvalidHyper(_))));
        }
    }

    #[test]
    fn update_budget_exhaustion_is_reported() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
        let params = SvrParams {
            max_updates: 1,
            epsilon: 0.0,
            ..SvrParams::default()
        };
        assert!(matches!(
            fit_svr(&x, &y, &params),
            Err(RegressError::NotConverged { solver: "SMO", .. })
        ));
    }

    #[test]
    fn small_cache_gives_same_solution() {
        let x: Vec<Vec<f64>> = (0..25).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = (0..25).map(|i| (i as f64 * 0.2).sin()).collect();
        let big = fit_svr(&x, &y, &SvrParams::default()).unwrap();
        let small = fit_svr(&x, &y, &SvrParams { cache_mb: 0, ..SvrParams::default() }).unwrap();
        assert_eq!(big, small);
    }
}
