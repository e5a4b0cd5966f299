//! Model families behind one interface: choosing hyperparameters, training
//! on a labelled subset of videos and producing per-row scores.
//!
//! Feature models (linear family, SVR) train one sample per feature row.
//! Text models (bag-of-words linear, GRU) train one sample per caption.
//! Either way every row inherits its video's label, and predictions come
//! back grouped by video, ready for [`crate::aggregate::aggregate_rows`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaptionSet, FeatureSet, LabelTable, VideoId, WordVectorTable};
use crate::regress::{fit_linear, fit_svr, LinearKind, LinearModel, LinearParams, RegressError, Regressor, SvrModel, SvrParams};
use crate::textmodel::{
    embed, gru_train, tokenize, BowLinearModel, GruRegressor, TextError, TextSample, TrainConfig, DEFAULT_DENSE_DROPOUT,
    DEFAULT_DENSE_WIDTHS, DEFAULT_GRU_DROPOUT, DEFAULT_HIDDEN_UNITS,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("invalid parameters for {kind}: {message}")]
    Params { kind: ModelKind, message: String },
    #[error("{0} needs feature rows")]
    NeedsFeatures(ModelKind),
    #[error("{0} needs captions")]
    NeedsCaptions(ModelKind),
    #[error("the GRU needs a word-vector table")]
    NeedsWordVectors,
    #[error("no training rows: none of the {0} labelled videos has usable inputs")]
    NoTrainingRows(usize),
    #[error("unknown model {0:?}")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ols,
    Ridge,
    Lasso,
    Bayes,
    Svr,
    Gru,
    BowOls,
    BowRidge,
    BowLasso,
    BowBayes,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::Ols,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::Bayes,
        ModelKind::Svr,
        ModelKind::Gru,
        ModelKind::BowOls,
        ModelKind::BowRidge,
        ModelKind::BowLasso,
        ModelKind::BowBayes,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Bayes => "bayes",
            ModelKind::Svr => "svr",
            ModelKind::Gru => "gru",
            ModelKind::BowOls => "bow-ols",
            ModelKind::BowRidge => "bow-ridge",
            ModelKind::BowLasso => "bow-lasso",
            ModelKind::BowBayes => "bow-bayes",
        }
    }

    /// Whether the model reads captions rather than feature rows.
    pub fn is_text(&self) -> bool {
        matches!(
            self,
            ModelKind::Gru | ModelKind::BowOls | ModelKind::BowRidge | ModelKind::BowLasso | ModelKind::BowBayes
        )
    }

    fn linear_kind(&self) -> Option<LinearKind> {
        match self {
            ModelKind::Ols | ModelKind::BowOls => Some(LinearKind::Ols),
            ModelKind::Ridge | ModelKind::BowRidge => Some(LinearKind::Ridge),
            ModelKind::Lasso | ModelKind::BowLasso => Some(LinearKind::Lasso),
            ModelKind::Bayes | ModelKind::BowBayes => Some(LinearKind::BayesRidge),
            ModelKind::Svr | ModelKind::Gru => None,
        }
    }

    /// Parses hyperparameters for this kind. `None` gives the defaults.
    pub fn params(&self, value: Option<serde_json::Value>) -> Result<ModelParams, ModelError> {
        let value = value.unwrap_or_else(|| serde_json::Value::Object(Default::default()));
        let err = |e: serde_json::Error| ModelError::Params {
            kind: *self,
            message: e.to_string(),
        };
        Ok(match self {
            ModelKind::Svr => ModelParams::Svr(serde_json::from_value(value).map_err(err)?),
            ModelKind::Gru => ModelParams::Gru(serde_json::from_value(value).map_err(err)?),
            _ => ModelParams::Linear(serde_json::from_value(value).map_err(err)?),
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(ModelError::UnknownKind(s))
    }
}

/// GRU architecture and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruSettings {
    pub hidden_units: usize,
    pub dense_widths: Vec<usize>,
    pub gru_dropout: f64,
    pub dense_dropout: f64,
    pub train: TrainConfig,
}

impl Default for GruSettings {
    fn default() -> Self {
        GruSettings {
            hidden_units: DEFAULT_HIDDEN_UNITS,
            dense_widths: DEFAULT_DENSE_WIDTHS.to_vec(),
            gru_dropout: DEFAULT_GRU_DROPOUT,
            dense_dropout: DEFAULT_DENSE_DROPOUT,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    Linear(LinearParams),
    Svr(SvrParams),
    Gru(GruSettings),
}

/// A trained model of any family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Linear(LinearModel),
    Svr(SvrModel),
    BowLinear(BowLinearModel),
    Gru(GruRegressor),
}

impl TrainedModel {
    pub fn is_text(&self) -> bool {
        matches!(self, TrainedModel::BowLinear(_) | TrainedModel::Gru(_))
    }

    pub fn family(&self) -> &'static str {
        match self {
            TrainedModel::Linear(_) => "linear",
            TrainedModel::Svr(_) => "svr",
            TrainedModel::BowLinear(_) => "bow_linear",
            TrainedModel::Gru(_) => "gru",
        }
    }
}

/// What a model reads.
#[derive(Clone, Copy, Debug)]
pub enum Inputs<'a> {
    Features(&'a FeatureSet),
    Text {
        captions: &'a CaptionSet,
        word_vectors: Option<&'a WordVectorTable>,
    },
}

/// Trains `kind` on every labelled video in `labels` that has inputs.
/// `seed` drives GRU initialization, validation split, shuffles and dropout.
pub fn train_model(
    kind: ModelKind,
    params: &ModelParams,
    inputs: Inputs<'_>,
    labels: &LabelTable,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let bad_params = || ModelError::Params {
        kind,
        message: "parameters belong to a different model family".into(),
    };
    match (kind, inputs) {
        (ModelKind::Svr, Inputs::Features(set)) => {
            let ModelParams::Svr(p) = params else { return Err(bad_params()) };
            let (x, y) = feature_rows(set, labels)?;
            Ok(TrainedModel::Svr(fit_svr(&x, &y, p)?))
        }
        (ModelKind::Gru, Inputs::Text { captions, word_vectors }) => {
            let ModelParams::Gru(p) = params else { return Err(bad_params()) };
            let table = word_vectors.ok_or(ModelError::NeedsWordVectors)?;
            let mut samples = Vec::new();
            for (id, y) in labels.scores() {
                for c in captions.captions_for(id) {
                    if let Ok(tokens) = tokenize(c) {
                        samples.push(TextSample {
                            video: id.clone(),
                            sequence: embed(&tokens, table),
                            label: *y,
                        });
                    }
                }
            }
            if samples.is_empty() {
                return Err(ModelError::NoTrainingRows(labels.len()));
            }
            let mut model = GruRegressor::new(
                table.dimension(),
                p.hidden_units,
                p.dense_widths.clone(),
                p.gru_dropout,
                p.dense_dropout,
                seed,
            )?;
            model.train_config = p.train.clone();
            Ok(TrainedModel::Gru(gru_train(model, &samples)?))
        }
        (k, Inputs::Text { captions, .. }) if k.is_text() => {
            let ModelParams::Linear(p) = params else { return Err(bad_params()) };
            let mut texts = Vec::new();
            let mut y = Vec::new();
            for (id, label) in labels.scores() {
                for c in captions.captions_for(id) {
                    if tokenize(c).is_ok() {
                        texts.push(c.as_str());
                        y.push(*label);
                    }
                }
            }
            if texts.is_empty() {
                return Err(ModelError::NoTrainingRows(labels.len()));
            }
            let lk = k.linear_kind().expect("bag-of-words kinds are linear");
            Ok(TrainedModel::BowLinear(BowLinearModel::fit(&texts, &y, lk, p)?))
        }
        (k, Inputs::Features(set)) if !k.is_text() => {
            let ModelParams::Linear(p) = params else { return Err(bad_params()) };
            let (x, y) = feature_rows(set, labels)?;
            let lk = k.linear_kind().expect("feature kinds other than svr are linear");
            Ok(TrainedModel::Linear(fit_linear(&x, &y, lk, p)?))
        }
        (k, Inputs::Features(_)) => Err(ModelError::NeedsCaptions(k)),
        (k, Inputs::Text { .. }) => Err(ModelError::NeedsFeatures(k)),
    }
}

fn feature_rows(set: &FeatureSet, labels: &LabelTable) -> Result<(Vec<Vec<f64>>, Vec<f64>), ModelError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, label) in labels.scores() {
        for row in set.rows_for(id) {
            x.push(row.clone());
            y.push(*label);
        }
    }
    if x.is_empty() {
        return Err(ModelError::NoTrainingRows(labels.len()));
    }
    Ok((x, y))
}

/// Raw per-row scores for every id that has inputs. Captions without any
/// token are skipped, so such a video may be absent from the result.
pub fn predict_rows(
    model: &TrainedModel,
    inputs: Inputs<'_>,
    ids: &[VideoId],
) -> Result<BTreeMap<VideoId, Vec<f64>>, ModelError> {
    let per_video: Vec<(VideoId, Vec<f64>)> = ids
        .par_iter()
        .map(|id| Ok((id.clone(), predict_video(model, inputs, id)?)))
        .collect::<Result<_, ModelError>>()?;
    Ok(per_video.into_iter().filter(|(_, v)| !v.is_empty()).collect())
}

fn predict_video(model: &TrainedModel, inputs: Inputs<'_>, id: &VideoId) -> Result<Vec<f64>, ModelError> {
    match (model, inputs) {
        (TrainedModel::Linear(m), Inputs::Features(set)) => Ok(m.predict(set.rows_for(id))?),
        (TrainedModel::Svr(m), Inputs::Features(set)) => Ok(m.predict(set.rows_for(id))?),
        (TrainedModel::BowLinear(m), Inputs::Text { captions, .. }) => captions
            .captions_for(id)
            .iter()
            .filter(|c| tokenize(c).is_ok())
            .map(|c| m.predict_caption(c).map_err(ModelError::from))
            .collect(),
        (TrainedModel::Gru(m), Inputs::Text { captions, word_vectors }) => {
            let table = word_vectors.ok_or(ModelError::NeedsWordVectors)?;
            captions
                .captions_for(id)
                .iter()
                .filter_map(|c| tokenize(c).ok())
                .map(|t| m.predict(&embed(&t, table)).map_err(ModelError::from))
                .collect()
        }
        (TrainedModel::Linear(_) | TrainedModel::Svr(_), _) => Err(ModelError::NeedsFeatures(ModelKind::Svr)),
        (_, _) => Err(ModelError::NeedsCaptions(ModelKind::Gru)),
    }
}
