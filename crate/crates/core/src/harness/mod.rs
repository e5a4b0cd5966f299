//! Experiment orchestration: seeded splits, multi-seed feature runs,
//! ensemble searches, synthetic corpora and reports.

mod config;
mod experiment;
mod report;
mod split;
mod synth;

pub use config::{DataConfig, DecayConfig, EnsembleConfig, ExperimentConfig, FeatureConfig};
pub use experiment::{
    run_ensemble_experiment, run_experiment, run_experiment_in_dir, run_feature_experiment, write_report, Corpus,
};
pub use report::{
    ensemble_columns, DecaySummary, EnsembleRow, ExperimentReport, FeatureRow, TermResult, FEATURE_COLUMNS,
};
pub use split::{split, SplitSpec, DEFAULT_SEEDS, DEFAULT_TRAIN_FRACTION};
pub use synth::{
    generate_synthetic, write_synthetic, CaptionSpec, Link, SyntheticCorpus, SyntheticCorpusSpec, SyntheticFeature,
    SyntheticFiles, SyntheticTruth,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aggregate::AggregateError;
use crate::corpus::CorpusError;
use crate::decay::DecayError;
use crate::ensemble::EnsembleError;
use crate::metrics::MetricError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("split: {0}")]
    Split(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
