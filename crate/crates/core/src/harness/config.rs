use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::{DEFAULT_SEEDS, DEFAULT_TRAIN_FRACTION};
use super::HarnessError;
use crate::aggregate::Aggregation;
use crate::corpus::Modality;
use crate::decay::{DEFAULT_ITERATIONS, DEFAULT_TARGET_DURATION};
use crate::ensemble::{bucket_steps, DEFAULT_BUCKET};
use crate::model::{ModelKind, ModelParams};

/// An experiment as read from a TOML file. Relative paths are resolved
/// against the file's directory by [`ExperimentConfig::load`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_bucket")]
    pub bucket: f64,
    /// Worker threads; all cores when absent. Results do not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Write per-model JSON artifacts and prediction CSVs for ensemble runs.
    #[serde(default = "yes")]
    pub save_artifacts: bool,
    pub data: DataConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    pub features: Vec<FeatureConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

fn default_bucket() -> f64 {
    DEFAULT_BUCKET
}

fn yes() -> bool {
    true
}

/// Input files. A term runs when it has labels, either given directly or
/// derived from an annotation log through the decay fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub labels_short: Option<PathBuf>,
    pub labels_long: Option<PathBuf>,
    pub annotations_short: Option<PathBuf>,
    pub annotations_long: Option<PathBuf>,
    /// Held-out labels scored by the ensemble.
    pub test_labels_short: Option<PathBuf>,
    pub test_labels_long: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub target_duration: f64,
    pub iterations: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            target_duration: DEFAULT_TARGET_DURATION,
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub name: String,
    pub modality: Modality,
    /// Feature CSV; text models read the shared captions instead.
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub model: ModelKind,
    /// Model hyperparameters; defaults when absent.
    #[serde(default)]
    pub params: Option<serde_json::Value>,
}

impl FeatureConfig {
    pub fn model_params(&self) -> Result<ModelParams, HarnessError> {
        self.model
            .params(self.params.clone())
            .map_err(|e| HarnessError::Config(format!("feature {:?}: {e}", self.name)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub enabled: bool,
    /// Feature names to combine, in column order. When absent, the best
    /// feature of each modality (by mean validation rank correlation) is
    /// taken for each term.
    pub features: Option<Vec<String>>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            enabled: true,
            features: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let d = &mut self.data;
        for p in [
            &mut d.labels_short,
            &mut d.labels_long,
            &mut d.annotations_short,
            &mut d.annotations_long,
            &mut d.test_labels_short,
            &mut d.test_labels_long,
            &mut d.captions,
            &mut d.word_vectors,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for f in &mut self.features {
            if let Some(p) = &mut f.path {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        bucket_steps(self.bucket).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        let d = &self.data;
        if d.labels_short.is_none() && d.labels_long.is_none() && d.annotations_short.is_none() && d.annotations_long.is_none() {
            return bad("data needs labels or annotations for at least one term".into());
        }
        if self.features.is_empty() {
            return bad("at least one [[features]] entry is required".into());
        }
        let mut names = BTreeSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return bad(format!("duplicate feature name {:?}", f.name));
            }
            if f.model.is_text() {
                if f.path.is_some() {
                    return bad(format!("feature {:?}: text models read captions, not a path", f.name));
                }
                if d.captions.is_none() {
                    return bad(format!("feature {:?} needs data.captions", f.name));
                }
                if f.model == ModelKind::Gru && d.word_vectors.is_none() {
                    return bad(format!("feature {:?} needs data.word_vectors", f.name));
                }
            } else if f.path.is_none() {
                return bad(format!("feature {:?} needs a path", f.name));
            }
            f.model_params()?;
        }
        if let Some(sel) = &self.ensemble.features {
            if sel.is_empty() {
                return bad("ensemble.features must not be empty".into());
            }
            let mut seen = BTreeSet::new();
            for name in sel {
                if !names.contains(name.as_str()) || !seen.insert(name) {
                    return bad(format!("ensemble feature {name:?} is unknown or repeated"));
                }
            }
        }
        Ok(())
    }
}
