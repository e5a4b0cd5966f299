//! Collapsing per-row predictions into one score per video.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VideoId;
use crate::numeric::exact_sum;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("the id universe is empty")]
    EmptyUniverse,
    #[error("no video in the universe has any rows, so there is no fallback basis")]
    NoDirectScores,
    #[error("video {0} has a non-finite row score")]
    NonFinite(VideoId),
    #[error("unknown aggregation {0:?} (expected median, mean, max or min)")]
    UnknownStrategy(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
    Max,
    Min,
}

impl Aggregation {
    pub const ALL: [Aggregation; 4] = [Aggregation::Median, Aggregation::Mean, Aggregation::Max, Aggregation::Min];

    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregation::Median => "median",
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Min => "min",
        }
    }

    /// Aggregate of a non-empty list of finite values.
    ///
    /// Values are sorted first, so the result never depends on input order.
    pub fn apply(&self, values: &[f64]) -> f64 {
        assert!(!values.is_empty(), "aggregate of an empty list");
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        match self {
            Aggregation::Median if n % 2 == 1 => v[n / 2],
            Aggregation::Median => (v[n / 2 - 1] + v[n / 2]) / 2.0,
            Aggregation::Mean => exact_sum(v) / n as f64,
            Aggregation::Max => v[n - 1],
            Aggregation::Min => v[0],
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = AggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Aggregation::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AggregateError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coverage {
    Direct,
    Fallback,
}

impl Coverage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Coverage::Direct => "direct",
            Coverage::Fallback => "fallback",
        }
    }
}

/// One score per video for a single model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub model_name: String,
    pub scores: BTreeMap<VideoId, f64>,
    pub coverage: BTreeMap<VideoId, Coverage>,
    /// `None` for tables produced by combining other tables.
    pub aggregation: Option<Aggregation>,
}

impl PredictionTable {
    pub fn get(&self, id: &VideoId) -> Option<f64> {
        self.scores.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &VideoId> {
        self.scores.keys()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn fallback_count(&self) -> usize {
        self.coverage.values().filter(|c| **c == Coverage::Fallback).count()
    }
}

/// Aggregates each video's rows with `strategy`. Videos in `universe`
/// without rows get the mean of the directly aggregated scores. Rows for
/// videos outside `universe` are ignored.
pub fn aggregate_rows(
    model_name: &str,
    per_row_scores: &BTreeMap<VideoId, Vec<f64>>,
    strategy: Aggregation,
    universe: &BTreeSet<VideoId>,
) -> Result<PredictionTable, AggregateError> {
    if universe.is_empty() {
        return Err(AggregateError::EmptyUniverse);
    }
    let mut scores = BTreeMap::new();
    let mut coverage = BTreeMap::new();
    for id in universe {
        let Some(rows) = per_row_scores.get(id).filter(|r| !r.is_empty()) else {
            continue;
        };
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(AggregateError::NonFinite(id.clone()));
        }
        scores.insert(id.clone(), strategy.apply(rows));
        coverage.insert(id.clone(), Coverage::Direct);
    }
    if scores.is_empty() {
        return Err(AggregateError::NoDirectScores);
    }
    let fallback = exact_sum(scores.values().copied()) / scores.len() as f64;
    for id in universe {
        if !scores.contains_key(id) {
            scores.insert(id.clone(), fallback);
            coverage.insert(id.clone(), Coverage::Fallback);
        }
    }
    Ok(PredictionTable {
        model_name: model_name.to_string(),
        scores,
        coverage,
        aggregation: Some(strategy),
    })
}

/// Writes `video_id,score,coverage`. With `clamp`, scores are clipped into
/// `[0, 1]`.
pub fn write_prediction_csv(table: &PredictionTable, path: impl AsRef<Path>, clamp: bool) -> Result<(), AggregateError> {
    let path = path.as_ref();
    let io = |source| AggregateError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::from("video_id,score,coverage\n");
    for (id, s) in &table.scores {
        let s = if clamp { s.clamp(0.0, 1.0) } else { *s };
        let cov = table.coverage.get(id).copied().unwrap_or(Coverage::Direct);
        out.push_str(&format!("{id},{s},{}\n", cov.as_str()));
    }
    std::fs::write(path, out).map_err(io)
}

/// Reads a prediction CSV. The header and the coverage column are optional.
pub fn load_prediction_csv(path: impl AsRef<Path>, model_name: &str) -> Result<PredictionTable, AggregateError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AggregateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: usize, message: String| AggregateError::Parse {
        path: path.to_path_buf(),
        line: line as u64 + 1,
        message,
    };
    let mut scores = BTreeMap::new();
    let mut coverage = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("video_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(i, format!("expected 2 or 3 fields, found {}", fields.len())));
        }
        let id = VideoId::new(fields[0]).map_err(|e| err(i, e.to_string()))?;
        let score: f64 = fields[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(i, format!("bad score {:?}", fields[1])))?;
        let cov = match fields.get(2) {
            None | Some(&"direct") => Coverage::Direct,
            Some(&"fallback") => Coverage::Fallback,
            Some(other) => return Err(err(i, format!("bad coverage {other:?}"))),
        };
        if scores.insert(id.clone(), score).is_some() {
            return Err(err(i, format!("duplicate video id {id}")));
        }
        coverage.insert(id, cov);
    }
    if scores.is_empty() {
        return Err(err(0, "no predictions".into()));
    }
    Ok(PredictionTable {
        model_name: model_name.to_string(),
        scores,
        coverage,
        aggregation: None,
    })
}
