use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{gru_forward, GruParams, GruRegressor, Mode};
use super::{TextError, TokenSequence};
use crate::corpus::VideoId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of training captions held out for early stopping, carved by
    /// video id. Zero disables early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 150,
            patience: 10,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TextError> {
        let bad = |m: &str| Err(TextError::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam moment decay rates must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch count must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One caption with its video's label.
#[derive(Clone, Debug, PartialEq)]
pub struct TextSample {
    pub video: VideoId,
    pub sequence: TokenSequence,
    pub label: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error over training captions, with dropout active.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_samples: usize,
    pub validation_samples: usize,
}

struct Adam {
    m: GruParams,
    v: GruParams,
    t: i32,
}

impl Adam {
    fn new(p: &GruParams) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GruParams, grads: &GruParams, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let bufs = params
            .buffers_mut()
            .into_iter()
            .zip(grads.buffers())
            .zip(self.m.buffers_mut())
            .zip(self.v.buffers_mut());
        for (((p, g), m), v) in bufs {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

/// Splits sample indices into (train, validation), holding out whole videos
/// until at least `fraction` of the captions are set aside.
fn split_by_video(samples: &[TextSample], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let n = samples.len();
    if fraction == 0.0 {
        return ((0..n).collect(), Vec::new());
    }
    let mut by_video: BTreeMap<&VideoId, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_video.entry(&s.video).or_default().push(i);
    }
    let target = ((fraction * n as f64).ceil() as usize).max(1);
    if by_video.len() < 2 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let val = idx.split_off(n - target.min(n - 1));
        idx.sort_unstable();
        let mut val = val;
        val.sort_unstable();
        return (idx, val);
    }
    let mut groups: Vec<Vec<usize>> = by_video.into_values().collect();
    groups.shuffle(rng);
    let mut val = Vec::new();
    let mut train = Vec::new();
    let last = groups.len() - 1;
    for (g, rows) in groups.into_iter().enumerate() {
        if val.len() < target && g < last {
            val.extend(rows);
        } else {
            train.extend(rows);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn eval_loss(model: &GruRegressor, samples: &[TextSample], idx: &[usize]) -> Result<f64, TextError> {
    let mut total = 0.0;
    for &i in idx {
        let e = model.predict(&samples[i].sequence)? - samples[i].label;
        total += e * e;
    }
    Ok(total / idx.len() as f64)
}

/// Trains on per-caption samples with Adam on mean squared error. The
/// configuration comes from `model.train_config`; all randomness (the
/// validation split, shuffles and dropout masks) is drawn from
/// `model.rng_seed`. Returns the model holding the best-epoch parameters
/// and its training log.
pub fn gru_train(mut model: GruRegressor, samples: &[TextSample]) -> Result<GruRegressor, TextError> {
    let cfg = model.train_config.clone();
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(TextError::TooFewSamples(samples.len()));
    }
    for s in samples {
        if s.sequence.is_empty() {
            return Err(TextError::EmptySequence);
        }
        if !s.label.is_finite() {
            return Err(TextError::Config("labels must be finite".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    rng.set_stream(1);
    let (mut train, val) = split_by_video(samples, cfg.validation_fraction, &mut rng);

    let label_mean = train.iter().map(|&i| samples[i].label).sum::<f64>() / train.len() as f64;
    if let Some(last) = model.params.dense.last_mut() {
        last.b[0] = label_mean;
    }

    let mut adam = Adam::new(&model.params);
    let mut grads = model.params.zeros_like();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, GruParams)> = None;
    let mut waited = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train.chunks(cfg.batch_size) {
            for b in grads.buffers_mut() {
                b.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let (y, cache) = gru_forward(&model, &samples[i].sequence, Mode::Train, &mut rng)?;
                let err = y - samples[i].label;
                total += err * err;
                model.backward_into(&cache, scale * err, &mut grads);
            }
            adam.step(&mut model.params, &grads, &cfg);
        }
        let train_loss = total / train.len() as f64;
        if !train_loss.is_finite() || !model.params.is_finite() {
            return Err(TextError::Diverged { epoch, loss: train_loss });
        }

        let validation_loss = if val.is_empty() {
            None
        } else {
            let l = eval_loss(&model, samples, &val)?;
            if !l.is_finite() {
                return Err(TextError::Diverged { epoch, loss: l });
            }
            Some(l)
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        });

        if let Some(l) = validation_loss {
            match &best {
                Some((b, _, _)) if l >= *b => {
                    waited += 1;
                    if waited >= cfg.patience {
                        stopped_early = epoch < cfg.max_epochs;
                        break;
                    }
                }
                _ => {
                    best = Some((l, epoch, model.params.clone()));
                    waited = 0;
                }
            }
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => epochs.len(),
    };
    model.training_log = Some(TrainingLog {
        epochs,
        best_epoch,
        stopped_early,
        train_samples: train.len(),
        validation_samples: val.len(),
    });
    Ok(model)
}
