//! One-hidden-layer tanh MLP with softmax cross-entropy.
//!
//! The flat parameter layout is `[W1 (h×f), b1 (h), W2 (C×h), b2 (C)]`, all
//! row-major.

use rand::seq::SliceRandom;
use rand::Rng;

use super::data::SyntheticDataset;
use super::HarnessError;
use crate::clustering::WeightVector;
use crate::rng::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(inputs: usize, hidden: usize, classes: usize) -> Result<Self, HarnessError> {
        if inputs == 0 || hidden == 0 || classes < 2 {
            return Err(HarnessError::InvalidArgument(format!(
                "bad architecture {inputs}→{hidden}→{classes}"
            )));
        }
        Ok(Self {
            inputs,
            hidden,
            classes,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.classes * self.hidden + self.classes
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (b1, w2, b2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyModel {
    arch: Architecture,
    params: Vec<f64>,
}

impl TinyModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = derived_rng(seed, "model-init", 0);
        let (b1, w2, b2) = arch.offsets();
        let mut params = vec![0.0; arch.parameter_count()];
        let l1 = (6.0 / (arch.inputs + arch.hidden) as f64).sqrt();
        let l2 = (6.0 / (arch.hidden + arch.classes) as f64).sqrt();
        for p in &mut params[..b1] {
            *p = rng.gen_range(-l1..l1);
        }
        for p in &mut params[w2..b2] {
            *p = rng.gen_range(-l2..l2);
        }
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self, HarnessError> {
        if params.len() != arch.parameter_count() {
            return Err(HarnessError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                arch.parameter_count(),
                params.len()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn from_weights(arch: Architecture, w: &WeightVector) -> Result<Self, HarnessError> {
        Self::from_params(arch, w.as_slice().to_vec())
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn to_weights(&self) -> Result<WeightVector, HarnessError> {
        Ok(WeightVector::new(self.params.clone())?)
    }

    /// tanh hidden activations for one input.
    pub fn hidden(&self, x: &[f64], out: &mut [f64]) {
        let a = &self.arch;
        let (b1, _, _) = a.offsets();
        for (j, o) in out.iter_mut().enumerate().take(a.hidden) {
            let row = &self.params[j * a.inputs..(j + 1) * a.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + j];
            *o = z.tanh();
        }
    }

    fn logits(&self, hidden: &[f64], out: &mut [f64]) {
        let a = &self.arch;
        let (_, w2, b2) = a.offsets();
        for (c, o) in out.iter_mut().enumerate().take(a.classes) {
            let row = &self.params[w2 + c * a.hidden..w2 + (c + 1) * a.hidden];
            *o = row.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.params[b2 + c];
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut h = vec![0.0; self.arch.hidden];
        let mut z = vec![0.0; self.arch.classes];
        self.hidden(x, &mut h);
        self.logits(&h, &mut z);
        argmax(&z)
    }

    pub fn accuracy(&self, data: &SyntheticDataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) == data.label(i))
            .count();
        correct as f64 / data.len() as f64
    }

    /// Mean cross-entropy over `indices`.
    pub fn loss(&self, data: &SyntheticDataset, indices: &[usize]) -> f64 {
        let mut h = vec![0.0; self.arch.hidden];
        let mut z = vec![0.0; self.arch.classes];
        let total: f64 = indices
            .iter()
            .map(|&i| {
                self.hidden(data.row(i), &mut h);
                self.logits(&h, &mut z);
                let lse = log_sum_exp(&z);
                lse - z[data.label(i)]
            })
            .sum();
        total / indices.len().max(1) as f64
    }

    /// Analytic gradient of [`TinyModel::loss`] with respect to the flat
    /// parameters.
    pub fn gradient(&self, data: &SyntheticDataset, indices: &[usize]) -> Vec<f64> {
        let a = self.arch;
        let (b1, w2, b2) = a.offsets();
        let mut g = vec![0.0; self.params.len()];
        let mut h = vec![0.0; a.hidden];
        let mut z = vec![0.0; a.classes];
        let mut dh = vec![0.0; a.hidden];
        let scale = 1.0 / indices.len().max(1) as f64;
        for &i in indices {
            let x = data.row(i);
            self.hidden(x, &mut h);
            self.logits(&h, &mut z);
            let lse = log_sum_exp(&z);
            dh.fill(0.0);
            for c in 0..a.classes {
                let dz = ((z[c] - lse).exp() - f64::from(u8::from(c == data.label(i)))) * scale;
                g[b2 + c] += dz;
                let row = w2 + c * a.hidden;
                for j in 0..a.hidden {
                    g[row + j] += dz * h[j];
                    dh[j] += dz * self.params[row + j];
                }
            }
            for j in 0..a.hidden {
                let dz1 = dh[j] * (1.0 - h[j] * h[j]);
                g[b1 + j] += dz1;
                let row = j * a.inputs;
                for (k, xk) in x.iter().enumerate() {
                    g[row + k] += dz1 * xk;
                }
            }
        }
        g
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 1,
            lr: 0.05,
            batch: 32,
        }
    }
}

/// Mini-batch SGD on `shard` for `params.epochs` epochs.
pub fn local_train(
    model: &TinyModel,
    data: &SyntheticDataset,
    shard: &[usize],
    params: TrainParams,
    seed: u64,
) -> Result<TinyModel, HarnessError> {
    if shard.is_empty() {
        return Err(HarnessError::InvalidArgument("empty shard".into()));
    }
    if params.batch == 0 || !(params.lr.is_finite() && params.lr > 0.0) {
        return Err(HarnessError::InvalidArgument(format!(
            "bad training parameters {params:?}"
        )));
    }
    let mut m = model.clone();
    let mut order = shard.to_vec();
    for epoch in 0..params.epochs {
        order.shuffle(&mut derived_rng(seed, "epoch", epoch as u64));
        for batch in order.chunks(params.batch) {
            let g = m.gradient(data, batch);
            for (p, gi) in m.params.iter_mut().zip(&g) {
                *p -= params.lr * gi;
            }
        }
    }
    Ok(m)
}
