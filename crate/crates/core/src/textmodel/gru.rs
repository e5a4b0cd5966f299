//! GRU sequence regressor with a dense ReLU head.
//!
//! Recurrence, with `h_0 = 0`:
//!
//! ```text
//! z_t  = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//! r_t  = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//! c_t  = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//! h_t  = z_t * h_{t-1} + (1 - z_t) * c_t
//! ```
//!
//! The last hidden state passes through dropout and the dense stack (ReLU +
//! dropout on every layer but the scalar output). Dropout is inverted:
//! kept units are scaled by `1 / (1 - rate)` in training and nothing
//! happens at evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{TrainConfig, TrainingLog};
use super::{TextError, TokenSequence};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Glorot-uniform initialization.
    fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += M x`
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += M' g`
    fn t_mul_add(&self, g: &[f64], out: &mut [f64]) {
        for (r, gr) in g.iter().enumerate() {
            if *gr == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(r)) {
                *o += m * gr;
            }
        }
    }

    /// `M += g x'`
    fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        let cols = self.cols;
        for (r, gr) in g.iter().enumerate() {
            if *gr == 0.0 {
                continue;
            }
            for (m, xv) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *m += gr * xv;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_z: Mat,
    pub w_r: Mat,
    pub w_h: Mat,
    pub u_z: Mat,
    pub u_r: Mat,
    pub u_h: Mat,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`
    pub w: Mat,
    pub b: Vec<f64>,
}

/// All trainable tensors. Gradients and optimizer moments use the same
/// shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub cell: GruCell,
    pub dense: Vec<Dense>,
}

impl GruParams {
    fn init<R: Rng>(input_dim: usize, hidden: usize, widths: &[usize], rng: &mut R) -> Self {
        let cell = GruCell {
            w_z: Mat::glorot(hidden, input_dim, rng),
            w_r: Mat::glorot(hidden, input_dim, rng),
            w_h: Mat::glorot(hidden, input_dim, rng),
            u_z: Mat::glorot(hidden, hidden, rng),
            u_r: Mat::glorot(hidden, hidden, rng),
            u_h: Mat::glorot(hidden, hidden, rng),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        };
        let mut dense = Vec::with_capacity(widths.len());
        let mut fan_in = hidden;
        for &w in widths {
            dense.push(Dense {
                w: Mat::glorot(w, fan_in, rng),
                b: vec![0.0; w],
            });
            fan_in = w;
        }
        GruParams { cell, dense }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.buffers_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    /// Every parameter buffer in a fixed order.
    pub fn buffers(&self) -> Vec<&Vec<f64>> {
        let c = &self.cell;
        let mut out = vec![
            &c.w_z.data, &c.w_r.data, &c.w_h.data, &c.u_z.data, &c.u_r.data, &c.u_h.data, &c.b_z, &c.b_r, &c.b_h,
        ];
        for d in &self.dense {
            out.push(&d.w.data);
            out.push(&d.b);
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let c = &mut self.cell;
        let mut out = vec![
            &mut c.w_z.data,
            &mut c.w_r.data,
            &mut c.w_h.data,
            &mut c.u_z.data,
            &mut c.u_r.data,
            &mut c.u_h.data,
            &mut c.b_z,
            &mut c.b_r,
            &mut c.b_h,
        ];
        for d in &mut self.dense {
            out.push(&mut d.w.data);
            out.push(&mut d.b);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruRegressor {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// Output widths of the dense layers; the last must be 1.
    pub dense_widths: Vec<usize>,
    /// Drop probability on the GRU output.
    pub gru_dropout: f64,
    /// Drop probability after each hidden dense layer.
    pub dense_dropout: f64,
    pub train_config: TrainConfig,
    pub rng_seed: u64,
    pub params: GruParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_log: Option<TrainingLog>,
}

pub const DEFAULT_HIDDEN_UNITS: usize = 64;
pub const DEFAULT_DENSE_WIDTHS: [usize; 4] = [32, 16, 8, 1];
pub const DEFAULT_GRU_DROPOUT: f64 = 0.8;
pub const DEFAULT_DENSE_DROPOUT: f64 = 0.25;

impl GruRegressor {
    /// A freshly initialized model; parameters are drawn from `rng_seed`.
    pub fn new(
        input_dim: usize,
        hidden_units: usize,
        dense_widths: Vec<usize>,
        gru_dropout: f64,
        dense_dropout: f64,
        rng_seed: u64,
    ) -> Result<Self, TextError> {
        if input_dim == 0 || hidden_units == 0 {
            return Err(TextError::Config("input and hidden sizes must be positive".into()));
        }
        if dense_widths.last() != Some(&1) || dense_widths.contains(&0) {
            return Err(TextError::Config(
                "dense widths must be positive and end with a single output".into(),
            ));
        }
        for rate in [gru_dropout, dense_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(TextError::Config(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let params = GruParams::init(input_dim, hidden_units, &dense_widths, &mut rng);
        Ok(GruRegressor {
            input_dim,
            hidden_units,
            dense_widths,
            gru_dropout,
            dense_dropout,
            train_config: TrainConfig::default(),
            rng_seed,
            params,
            training_log: None,
        })
    }

    /// 64 hidden units, a 32-16-8-1 head, dropout 0.8 / 0.25.
    pub fn with_defaults(input_dim: usize, rng_seed: u64) -> Result<Self, TextError> {
        Self::new(
            input_dim,
            DEFAULT_HIDDEN_UNITS,
            DEFAULT_DENSE_WIDTHS.to_vec(),
            DEFAULT_GRU_DROPOUT,
            DEFAULT_DENSE_DROPOUT,
            rng_seed,
        )
    }

    /// Evaluation-mode score of one sequence.
    pub fn predict(&self, seq: &TokenSequence) -> Result<f64, TextError> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        gru_forward(self, seq, Mode::Eval, &mut unused).map(|(y, _)| y)
    }

    /// Gradient of `d_out * output` with respect to every parameter, for
    /// the pass recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache, d_out: f64) -> GruParams {
        let mut grads = self.params.zeros_like();
        self.backward_into(cache, d_out, &mut grads);
        grads
    }

    pub(crate) fn backward_into(&self, cache: &ForwardCache, d_out: f64, grads: &mut GruParams) {
        let layers = &self.params.dense;
        let last = layers.len() - 1;
        let mut g = vec![d_out];
        for k in (0..layers.len()).rev() {
            if k < last {
                if let Some(mask) = &cache.dense_masks[k] {
                    g.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
                }
                g.iter_mut()
                    .zip(&cache.dense_pre[k])
                    .for_each(|(a, p)| if *p <= 0.0 { *a = 0.0 });
            }
            let input = &cache.dense_inputs[k];
            grads.dense[k].w.add_outer(&g, input);
            grads.dense[k].b.iter_mut().zip(&g).for_each(|(b, v)| *b += v);
            let mut gin = vec![0.0; input.len()];
            layers[k].w.t_mul_add(&g, &mut gin);
            g = gin;
        }
        if let Some(mask) = &cache.gru_mask {
            g.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
        }

        let p = &self.params.cell;
        let gc = &mut grads.cell;
        let hdim = self.hidden_units;
        let mut dh = g;
        for (step, x) in cache.steps.iter().zip(&cache.inputs).rev() {
            let mut dh_prev = vec![0.0; hdim];
            let mut da_z = vec![0.0; hdim];
            let mut da_h = vec![0.0; hdim];
            for i in 0..hdim {
                let z = step.z[i];
                let c = step.c[i];
                dh_prev[i] = dh[i] * z;
                da_z[i] = dh[i] * (step.h_prev[i] - c) * z * (1.0 - z);
                da_h[i] = dh[i] * (1.0 - z) * (1.0 - c * c);
            }
            gc.w_h.add_outer(&da_h, x);
            gc.u_h.add_outer(&da_h, &step.rh);
            gc.b_h.iter_mut().zip(&da_h).for_each(|(b, v)| *b += v);
            let mut d_rh = vec![0.0; hdim];
            p.u_h.t_mul_add(&da_h, &mut d_rh);
            let mut da_r = vec![0.0; hdim];
            for i in 0..hdim {
                let r = step.r[i];
                dh_prev[i] += d_rh[i] * r;
                da_r[i] = d_rh[i] * step.h_prev[i] * r * (1.0 - r);
            }
            gc.w_r.add_outer(&da_r, x);
            gc.u_r.add_outer(&da_r, &step.h_prev);
            gc.b_r.iter_mut().zip(&da_r).for_each(|(b, v)| *b += v);
            p.u_r.t_mul_add(&da_r, &mut dh_prev);

            gc.w_z.add_outer(&da_z, x);
            gc.u_z.add_outer(&da_z, &step.h_prev);
            gc.b_z.iter_mut().zip(&da_z).for_each(|(b, v)| *b += v);
            p.u_z.t_mul_add(&da_z, &mut dh_prev);
            dh = dh_prev;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    c: Vec<f64>,
}

/// Intermediate values of one forward pass, consumed by backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    /// Final hidden state before dropout.
    pub last_hidden: Vec<f64>,
    gru_mask: Option<Vec<f64>>,
    dense_inputs: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    dense_masks: Vec<Option<Vec<f64>>>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Inverted dropout: each unit is zeroed with probability `rate` and the
/// survivors are scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Runs the network on one sequence. In [`Mode::Train`] dropout masks are
/// drawn from `rng`; [`Mode::Eval`] never touches it.
pub fn gru_forward<R: Rng>(
    model: &GruRegressor,
    seq: &TokenSequence,
    mode: Mode,
    rng: &mut R,
) -> Result<(f64, ForwardCache), TextError> {
    if seq.is_empty() {
        return Err(TextError::EmptySequence);
    }
    if let Some(v) = seq.vectors.iter().find(|v| v.len() != model.input_dim) {
        return Err(TextError::DimensionMismatch {
            expected: model.input_dim,
            found: v.len(),
        });
    }
    let p = &model.params.cell;
    let hdim = model.hidden_units;
    let mut h = vec![0.0; hdim];
    let mut steps = Vec::with_capacity(seq.len());
    for x in &seq.vectors {
        let mut az = p.b_z.clone();
        p.w_z.mul_add(x, &mut az);
        p.u_z.mul_add(&h, &mut az);
        let mut ar = p.b_r.clone();
        p.w_r.mul_add(x, &mut ar);
        p.u_r.mul_add(&h, &mut ar);
        let z: Vec<f64> = az.into_iter().map(sigmoid).collect();
        let r: Vec<f64> = ar.into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let mut ac = p.b_h.clone();
        p.w_h.mul_add(x, &mut ac);
        p.u_h.mul_add(&rh, &mut ac);
        let c: Vec<f64> = ac.into_iter().map(f64::tanh).collect();
        let h_new: Vec<f64> = (0..hdim).map(|i| z[i] * h[i] + (1.0 - z[i]) * c[i]).collect();
        steps.push(StepCache {
            h_prev: std::mem::replace(&mut h, h_new),
            z,
            r,
            rh,
            c,
        });
    }

    let train = mode == Mode::Train;
    let gru_mask = (train && model.gru_dropout > 0.0).then(|| dropout_mask(hdim, model.gru_dropout, rng));
    let mut v = match &gru_mask {
        Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => h.clone(),
    };
    let layers = &model.params.dense;
    let last = layers.len() - 1;
    let mut dense_inputs = Vec::with_capacity(layers.len());
    let mut dense_pre = Vec::with_capacity(layers.len());
    let mut dense_masks = Vec::with_capacity(layers.len());
    for (k, layer) in layers.iter().enumerate() {
        let mut pre = layer.b.clone();
        layer.w.mul_add(&v, &mut pre);
        dense_inputs.push(std::mem::take(&mut v));
        if k < last {
            let mut out: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
            let mask = (train && model.dense_dropout > 0.0)
                .then(|| dropout_mask(out.len(), model.dense_dropout, rng));
            if let Some(m) = &mask {
                out.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
            }
            dense_masks.push(mask);
            v = out;
        } else {
            dense_masks.push(None);
            v = pre.clone();
        }
        dense_pre.push(pre);
    }
    let output = v[0];
    Ok((
        output,
        ForwardCache {
            inputs: seq.vectors.clone(),
            steps,
            last_hidden: h,
            gru_mask,
            dense_inputs,
            dense_pre,
            dense_masks,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[&[f64]]) -> TokenSequence {
        TokenSequence::from_vectors(rows.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn zero_network_outputs_final_bias() {
        let mut m = GruRegressor::new(3, 4, vec![3, 2, 1], 0.0, 0.0, 1).unwrap();
        for b in m.params.buffers_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        m.params.dense.last_mut().unwrap().b[0] = 0.42;
        assert_eq!(m.predict(&seq(&[&[1.0, 2.0, 3.0]])).unwrap(), 0.42);
        assert_eq!(m.predict(&seq(&[&[-5.0, 0.0, 9.0], &[1.0, 1.0, 1.0]])).unwrap(), 0.42);
    }

    #[test]
    fn no_dropout_train_equals_eval() {
        let m = GruRegressor::new(5, 6, vec![4, 3, 1], 0.0, 0.0, 9).unwrap();
        let s = seq(&[&[0.1, -0.2, 0.3, 0.0, 1.0], &[0.5, 0.5, -1.0, 0.2, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (train, _) = gru_forward(&m, &s, Mode::Train, &mut rng).unwrap();
        let (eval, _) = gru_forward(&m, &s, Mode::Eval, &mut rng).unwrap();
        assert_eq!(train.to_bits(), eval.to_bits());
    }

    #[test]
    fn dropout_changes_training_output() {
        let m = GruRegressor::with_defaults(5, 2).unwrap();
        let s = seq(&[&[0.1, -0.2, 0.3, 0.0, 1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let outs: Vec<f64> = (0..8)
            .map(|_| gru_forward(&m, &s, Mode::Train, &mut rng).unwrap().0)
            .collect();
        assert!(outs.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn rejects_bad_inputs_and_config() {
        let m = GruRegressor::new(2, 3, vec![1], 0.5, 0.5, 0).unwrap();
        assert_eq!(m.predict(&TokenSequence::from_vectors(vec![])), Err(TextError::EmptySequence));
        assert!(matches!(
            m.predict(&seq(&[&[1.0]])),
            Err(TextError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(GruRegressor::new(2, 3, vec![4, 2], 0.0, 0.0, 0).is_err());
        assert!(GruRegressor::new(2, 3, vec![1], 1.0, 0.0, 0).is_err());
        assert!(GruRegressor::new(0, 3, vec![1], 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn default_shapes() {
        let m = GruRegressor::with_defaults(300, 0).unwrap();
        assert_eq!(m.hidden_units, 64);
        assert_eq!(m.dense_widths, vec![32, 16, 8, 1]);
        assert_eq!(m.params.cell.w_z.rows, 64);
        assert_eq!(m.params.cell.w_z.cols, 300);
        assert_eq!(m.params.dense[0].w.cols, 64);
        assert_eq!(m.gru_dropout, 0.8);
        assert_eq!(m.dense_dropout, 0.25);
    }
}
