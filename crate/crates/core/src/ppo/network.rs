//! Two-headed MLP: a tanh trunk shared by an action-logits head and a scalar
//! value head, with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PpoError;
use crate::seed::rng_from_seed;

/// Initialisation gains (uniform with variance `gain^2 / fan_in`).
pub const TRUNK_GAIN: f64 = std::f64::consts::SQRT_2;
pub const POLICY_HEAD_GAIN: f64 = 0.01;
pub const VALUE_HEAD_GAIN: f64 = 1.0;

/// Dense layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn init(inputs: usize, outputs: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let bound = gain * (3.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let rows = self.weights.chunks_exact(self.inputs).zip(&self.bias);
        match sparse_support(x) {
            Some(nz) => rows.map(|(row, b)| b + nz.iter().map(|&i| row[i] * x[i]).sum::<f64>()).collect(),
            None => rows.map(|(row, b)| b + dot(row, x)).collect(),
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dz` at input
    /// `x` and, if `need_dx`, returns the gradient with respect to `x`.
    fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Layer, need_dx: bool) -> Vec<f64> {
        let mut dx = if need_dx { vec![0.0; self.inputs] } else { Vec::new() };
        let nz = sparse_support(x);
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[o] += d;
            let row = o * self.inputs;
            let grow = &mut grad.weights[row..row + self.inputs];
            match &nz {
                Some(nz) => nz.iter().for_each(|&i| grow[i] += d * x[i]),
                None => grow.iter_mut().zip(x).for_each(|(g, v)| *g += d * v),
            }
            if need_dx {
                for (dxi, w) in dx.iter_mut().zip(&self.weights[row..row + self.inputs]) {
                    *dxi += d * w;
                }
            }
        }
        dx
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub obs_dim: usize,
    pub action_count: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Trunk layers, then the policy head, then the value head.
    pub layers: Vec<Layer>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Post-tanh output of each trunk layer.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl PolicyParams {
    pub fn init(obs_dim: usize, action_count: usize, hidden: &[usize], seed: u64) -> Result<Self, PpoError> {
        if obs_dim == 0 || action_count < 2 || hidden.contains(&0) {
            return Err(PpoError::BadDimensions(format!(
                "obs_dim {obs_dim} (need >= 1), action_count {action_count} (need >= 2), hidden {hidden:?}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 2);
        let mut width = obs_dim;
        for &h in hidden {
            layers.push(Layer::init(width, h, TRUNK_GAIN, &mut rng));
            width = h;
        }
        layers.push(Layer::init(width, action_count, POLICY_HEAD_GAIN, &mut rng));
        layers.push(Layer::init(width, 1, VALUE_HEAD_GAIN, &mut rng));
        Ok(Self { obs_dim, action_count, hidden: hidden.to_vec(), seed, layers })
    }

    fn trunk_len(&self) -> usize {
        self.layers.len() - 2
    }

    pub fn policy_head(&self) -> &Layer {
        &self.layers[self.trunk_len()]
    }

    pub fn policy_head_mut(&mut self) -> &mut Layer {
        let i = self.trunk_len();
        &mut self.layers[i]
    }

    pub fn value_head(&self) -> &Layer {
        &self.layers[self.trunk_len() + 1]
    }

    pub fn check_input(&self, obs: &[f64]) -> Result<(), PpoError> {
        if obs.len() != self.obs_dim {
            return Err(PpoError::DimensionMismatch { expected: self.obs_dim, got: obs.len() });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Forward {
        debug_assert_eq!(obs.len(), self.obs_dim);
        let mut hidden = Vec::with_capacity(self.trunk_len());
        for layer in &self.layers[..self.trunk_len()] {
            let x = hidden.last().map_or(obs, Vec::as_slice);
            let mut z = layer.forward(x);
            z.iter_mut().for_each(|v| *v = v.tanh());
            hidden.push(z);
        }
        let features = hidden.last().map_or(obs, Vec::as_slice);
        let logits = self.policy_head().forward(features);
        let value = self.value_head().forward(features)[0];
        Forward { hidden, logits, value }
    }

    /// Backpropagates `dlogits` and `dvalue` through the network, adding into
    /// `grads`.
    pub fn backward(&self, obs: &[f64], fwd: &Forward, dlogits: &[f64], dvalue: f64, grads: &mut Gradients) {
        let t = self.trunk_len();
        let features = fwd.hidden.last().map_or(obs, Vec::as_slice);
        let need_dx = t > 0;
        let mut dh = self.layers[t].backward(features, dlogits, &mut grads.layers[t], need_dx);
        let dv = self.layers[t + 1].backward(features, &[dvalue], &mut grads.layers[t + 1], need_dx);
        dh.iter_mut().zip(dv).for_each(|(a, b)| *a += b);
        for l in (0..t).rev() {
            let a = &fwd.hidden[l];
            let dz: Vec<f64> = dh.iter().zip(a).map(|(g, y)| g * (1.0 - y * y)).collect();
            let x = if l == 0 { obs } else { fwd.hidden[l - 1].as_slice() };
            dh = self.layers[l].backward(x, &dz, &mut grads.layers[l], l > 0);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn params_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params_iter().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        self.params_iter_mut().zip(values).for_each(|(p, v)| *p = *v);
    }

    pub fn all_finite(&self) -> bool {
        self.params_iter().all(|p| p.is_finite())
    }
}

/// Same shape as the parameters of a [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(params: &PolicyParams) -> Self {
        Self { layers: params.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn global_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|g| *g *= factor);
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Indices of the nonzero entries when fewer than half are nonzero.
fn sparse_support(x: &[f64]) -> Option<Vec<usize>> {
    let nz = x.iter().filter(|v| **v != 0.0).count();
    (2 * nz < x.len()).then(|| x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect())
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}
