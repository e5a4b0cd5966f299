//! Recognition-decay normalization of memorability labels.
//!
//! Raw hit rates are confounded by the delay after which each viewer saw
//! the repeat. The model fitted here is linear in the log delay ratio,
//!
//! ```text
//! P(recognized | video i, delay t) = m_T(i) + alpha * ln(t / T)
//! ```
//!
//! with one global `alpha` and one `m_T(i)` per video, the memorability the
//! video would have had at the reference delay `T`. The fit alternates two
//! closed-form updates, each weighting video `i` by `1 / n(i)` (its number
//! of observations):
//!
//! ```text
//! alpha  <- sum_i 1/n(i) sum_j l_ij (x_ij - m_T(i))  /  sum_i 1/n(i) sum_j l_ij^2
//! m_T(i) <- 1/n(i) sum_j (x_ij - alpha * l_ij)
//! ```
//!
//! where `l_ij = ln(t_ij / T)`. Iteration starts from `alpha = 0` and the
//! raw hit rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotationLog, LabelTable, Term, VideoId};

/// Reference delay (seconds) the labels are normalized to.
pub const DEFAULT_TARGET_DURATION: f64 = 75.0;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum DecayError {
    #[error("annotation log is empty")]
    EmptyLog,
    #[error("target duration must be positive and finite, got {0}")]
    BadTargetDuration(f64),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("fit does not cover video {0} of the annotation log")]
    VideoMismatch(VideoId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayWarning {
    /// Every delay equals the target duration, so `alpha` is unidentifiable
    /// and was left at its current value.
    DegenerateDelays,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub target_duration: f64,
    pub iterations: usize,
    /// Stop early once `|delta alpha|` drops below this. Off by default.
    pub tolerance: Option<f64>,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            target_duration: DEFAULT_TARGET_DURATION,
            iterations: DEFAULT_ITERATIONS,
            tolerance: None,
        }
    }
}

/// Fitted decay rate and per-video memorability at the target duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub target_duration: f64,
    /// Unclamped; may leave `[0, 1]`.
    pub m_t: BTreeMap<VideoId, f64>,
    pub iterations_run: usize,
    pub alpha_trajectory: Vec<f64>,
    pub warnings: Vec<DecayWarning>,
}

/// Per-video log delay ratios and outcomes, laid out once up front.
struct Prepared {
    ids: Vec<VideoId>,
    /// `(ln(t/T), x)` per observation, grouped by video.
    obs: Vec<Vec<(f64, f64)>>,
    denominator: f64,
}

impl Prepared {
    fn new(log: &AnnotationLog, target: f64) -> Result<Self, DecayError> {
        if log.is_empty() {
            return Err(DecayError::EmptyLog);
        }
        if !(target.is_finite() && target > 0.0) {
            return Err(DecayError::BadTargetDuration(target));
        }
        let mut ids = Vec::with_capacity(log.len());
        let mut obs = Vec::with_capacity(log.len());
        for (id, list) in log.entries() {
            ids.push(id.clone());
            obs.push(
                list.iter()
                    .map(|o| ((o.delay_seconds() / target).ln(), o.hit()))
                    .collect::<Vec<_>>(),
            );
        }
        let denominator = obs
            .iter()
            .map(|v| v.iter().map(|(l, _)| l * l).sum::<f64>() / v.len() as f64)
            .sum();
        Ok(Prepared {
            ids,
            obs,
            denominator,
        })
    }

    fn hit_rates(&self) -> Vec<f64> {
        self.memorability(0.0)
    }

    /// `m_T(i) = mean_j (x_ij - alpha * l_ij)`.
    fn memorability(&self, alpha: f64) -> Vec<f64> {
        self.obs
            .iter()
            .map(|v| v.iter().map(|(l, x)| x - alpha * l).sum::<f64>() / v.len() as f64)
            .collect()
    }

    /// Least-squares `alpha` given the current memorabilities, or `None`
    /// when every log ratio is zero.
    fn alpha(&self, m: &[f64]) -> Option<f64> {
        if self.denominator == 0.0 {
            return None;
        }
        let numerator: f64 = self
            .obs
            .iter()
            .zip(m)
            .map(|(v, mi)| v.iter().map(|(l, x)| l * (x - mi)).sum::<f64>() / v.len() as f64)
            .sum();
        Some(numerator / self.denominator)
    }
}

/// Fits the decay model with the default options but the given target and
/// iteration count.
pub fn fit_decay(log: &AnnotationLog, target_duration: f64, iterations: usize) -> Result<DecayFit, DecayError> {
    fit_decay_with(
        log,
        &DecayOptions {
            target_duration,
            iterations,
            tolerance: None,
        },
    )
}

pub fn fit_decay_with(log: &AnnotationLog, options: &DecayOptions) -> Result<DecayFit, DecayError> {
    let prepared = Prepared::new(log, options.target_duration)?;
    let m = prepared.hit_rates();
    run(&prepared, 0.0, m, options)
}

impl DecayFit {
    /// Runs `iterations` further rounds starting from this fit's state.
    pub fn continue_fit(&self, log: &AnnotationLog, iterations: usize) -> Result<DecayFit, DecayError> {
        let prepared = Prepared::new(log, self.target_duration)?;
        let m = prepared
            .ids
            .iter()
            .map(|id| {
                self.m_t
                    .get(id)
                    .copied()
                    .ok_or_else(|| DecayError::VideoMismatch(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if m.len() != self.m_t.len() {
            let extra = self.m_t.keys().find(|id| log.observations(id).is_none());
            if let Some(id) = extra {
                return Err(DecayError::VideoMismatch(id.clone()));
            }
        }
        let mut next = run(
            &prepared,
            self.alpha,
            m,
            &DecayOptions {
                target_duration: self.target_duration,
                iterations,
                tolerance: None,
            },
        )?;
        let mut trajectory = self.alpha_trajectory.clone();
        trajectory.extend_from_slice(&next.alpha_trajectory);
        next.alpha_trajectory = trajectory;
        next.iterations_run += self.iterations_run;
        for w in &self.warnings {
            if !next.warnings.contains(w) {
                next.warnings.insert(0, w.clone());
            }
        }
        Ok(next)
    }
}

fn run(prepared: &Prepared, mut alpha: f64, mut m: Vec<f64>, options: &DecayOptions) -> Result<DecayFit, DecayError> {
    if options.iterations == 0 {
        return Err(DecayError::NoIterations);
    }
    let mut trajectory = Vec::with_capacity(options.iterations);
    let mut warnings = Vec::new();
    for _ in 0..options.iterations {
        let previous = alpha;
        match prepared.alpha(&m) {
            Some(a) => alpha = a,
            None => {
                if warnings.is_empty() {
                    warnings.push(DecayWarning::DegenerateDelays);
                }
            }
        }
        m = prepared.memorability(alpha);
        trajectory.push(alpha);
        if let Some(tol) = options.tolerance {
            if (alpha - previous).abs() < tol {
                break;
            }
        }
    }
    Ok(DecayFit {
        alpha,
        target_duration: options.target_duration,
        m_t: prepared.ids.iter().cloned().zip(m).collect(),
        iterations_run: trajectory.len(),
        alpha_trajectory: trajectory,
        warnings,
    })
}

/// Exports the fitted memorabilities as training labels, clamped to `[0, 1]`.
pub fn adjust_labels(fit: &DecayFit, term: Term) -> LabelTable {
    let mut table = LabelTable::new(term);
    for (id, m) in &fit.m_t {
        table
            .insert(id.clone(), m.clamp(0.0, 1.0))
            .expect("clamped finite score is a valid label");
    }
    table
}
