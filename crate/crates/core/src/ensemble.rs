//! Weighted-average ensembles searched over a bucketed probability simplex.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{Coverage, PredictionTable};
use crate::corpus::{LabelTable, VideoId};
use crate::metrics::spearman;

pub const DEFAULT_BUCKET: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("at least one model is required")]
    NoModels,
    #[error("bucket {0} does not divide 1 into a whole number of steps")]
    Bucket(f64),
    #[error("model {model} has no prediction for video {video}")]
    MissingVideo { model: String, video: VideoId },
    #[error("need at least 2 labelled videos, got {0}")]
    TooFewVideos(usize),
    #[error("every candidate produced an undefined rank correlation")]
    AllCandidatesUndefined,
    #[error("weights name models {expected:?}, tables are {found:?}")]
    NameMismatch { expected: Vec<String>, found: Vec<String> },
}

/// Number of steps `B` with `bucket * B = 1`.
pub fn bucket_steps(bucket: f64) -> Result<u32, EnsembleError> {
    if !(bucket > 0.0 && bucket <= 1.0) {
        return Err(EnsembleError::Bucket(bucket));
    }
    let inv = 1.0 / bucket;
    let b = inv.round();
    if (inv - b).abs() > 1e-9 || b > u32::MAX as f64 {
        return Err(EnsembleError::Bucket(bucket));
    }
    Ok(b as u32)
}

/// All `k`-vectors of non-negative integers summing to `steps`, in
/// lexicographic order.
pub fn enumerate_counts(k: usize, steps: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(k, steps, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn to_weights(counts: &[u32], steps: u32) -> Vec<f64> {
    counts.iter().map(|&c| f64::from(c) / f64::from(steps)).collect()
}

/// Simplex grid points as weights, in lexicographic order.
pub fn enumerate_simplex(k: usize, bucket: f64) -> Result<Vec<Vec<f64>>, EnsembleError> {
    if k == 0 {
        return Err(EnsembleError::NoModels);
    }
    let steps = bucket_steps(bucket)?;
    Ok(enumerate_counts(k, steps).iter().map(|c| to_weights(c, steps)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub model_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bucket: f64,
    pub validation_srcc: f64,
    /// Candidates skipped because their combined scores were constant.
    #[serde(default)]
    pub skipped_candidates: usize,
}

/// `sum_m w_m * s_m` in model order.
fn combine(weights: &[f64], scores: &[f64]) -> f64 {
    weights.iter().zip(scores).map(|(w, s)| w * s).sum()
}

/// Score matrix `[video][model]` over the truth's ids.
fn score_matrix(tables: &[PredictionTable], ids: &[&VideoId]) -> Result<Vec<Vec<f64>>, EnsembleError> {
    ids.iter()
        .map(|id| {
            tables
                .iter()
                .map(|t| {
                    t.get(id).ok_or_else(|| EnsembleError::MissingVideo {
                        model: t.model_name.clone(),
                        video: (*id).clone(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Exhaustive search for the weight vector whose combined prediction has the
/// highest rank correlation with `truth`. Ties go to the lexicographically
/// smallest weight vector, whatever the number of worker threads.
pub fn grid_search(tables: &[PredictionTable], truth: &LabelTable, bucket: f64) -> Result<EnsembleWeights, EnsembleError> {
    if tables.is_empty() {
        return Err(EnsembleError::NoModels);
    }
    let steps = bucket_steps(bucket)?;
    let ids: Vec<&VideoId> = truth.ids().collect();
    if ids.len() < 2 {
        return Err(EnsembleError::TooFewVideos(ids.len()));
    }
    let matrix = score_matrix(tables, &ids)?;
    let targets: Vec<f64> = truth.scores().values().copied().collect();

    let candidates = enumerate_counts(tables.len(), steps);
    let results: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|counts| {
            let w = to_weights(counts, steps);
            let combined: Vec<f64> = matrix.iter().map(|row| combine(&w, row)).collect();
            spearman(&combined, &targets).ok()
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(s) = *r {
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let (index, srcc) = best.ok_or(EnsembleError::AllCandidatesUndefined)?;
    Ok(EnsembleWeights {
        model_names: tables.iter().map(|t| t.model_name.clone()).collect(),
        weights: to_weights(&candidates[index], steps),
        bucket,
        validation_srcc: srcc,
        skipped_candidates: results.iter().filter(|r| r.is_none()).count(),
    })
}

/// Per-video convex combination over the first table's ids. A video is
/// marked fallback when any table with non-zero weight fell back on it.
pub fn apply_weights(w: &EnsembleWeights, tables: &[PredictionTable]) -> Result<PredictionTable, EnsembleError> {
    let found: Vec<String> = tables.iter().map(|t| t.model_name.clone()).collect();
    if found != w.model_names || w.weights.len() != tables.len() {
        return Err(EnsembleError::NameMismatch {
            expected: w.model_names.clone(),
            found,
        });
    }
    let first = tables.first().ok_or(EnsembleError::NoModels)?;
    let ids: Vec<&VideoId> = first.ids().collect();
    let matrix = score_matrix(tables, &ids)?;
    let mut out = PredictionTable {
        model_name: "ensemble".to_string(),
        scores: Default::default(),
        coverage: Default::default(),
        aggregation: None,
    };
    for (id, row) in ids.into_iter().zip(&matrix) {
        let fallback = tables
            .iter()
            .zip(&w.weights)
            .any(|(t, wt)| *wt > 0.0 && t.coverage.get(id) == Some(&Coverage::Fallback));
        out.scores.insert(id.clone(), combine(&w.weights, row));
        out.coverage
            .insert(id.clone(), if fallback { Coverage::Fallback } else { Coverage::Direct });
    }
    Ok(out)
}
