//! Proximal policy optimisation for the defence gym.
//!
//! Everything is plain `f64` Rust: a small tanh MLP with a policy head and a
//! value head ([`network`]), GAE ([`gae`]), the clipped surrogate loss with
//! analytic gradients ([`loss`]), Adam ([`optim`]) and the rollout/update
//! loop ([`train`]). Networks are small enough (observation ≤ 2650, ≤ 101
//! actions) that no tensor library is needed.

pub mod buffer;
pub mod checkpoint;
pub mod gae;
pub mod loss;
pub mod network;
pub mod optim;
pub mod train;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
pub use buffer::RolloutBuffer;
pub use gae::compute_gae;
pub use loss::{ppo_loss, ppo_loss_and_grad, LossCoefficients, LossStats, Sample};
pub use network::{Gradients, PolicyParams};
pub use optim::Adam;
pub use train::{evaluate_policy, train, CurvePoint, PpoPolicy, TrainOutcome, TrainingCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("bad network dimensions: {0}")]
    BadDimensions(String),
    #[error("observation has length {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sequence lengths differ: rewards {rewards}, values {values}, dones {dones}")]
    LengthMismatch { rewards: usize, values: usize, dones: usize },
    #[error("non-finite loss or parameters after {timestep} timesteps")]
    NonFiniteLoss { timestep: u64 },
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub rollout_horizon: usize,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden_layers: Vec<usize>,
    pub total_timesteps: u64,
    pub eval_interval: u64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            rollout_horizon: 2048,
            update_epochs: 10,
            minibatch_size: 64,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden_layers: vec![64, 64],
            total_timesteps: 1_000_000,
            eval_interval: 10_000,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: String| Err(PpoError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if self.clip_epsilon.is_nan() || self.clip_epsilon <= 0.0 {
            return bad("clip_epsilon must be > 0".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be > 0".into());
        }
        if self.minibatch_size == 0 || self.rollout_horizon == 0 {
            return bad("rollout_horizon and minibatch_size must be >= 1".into());
        }
        if !self.rollout_horizon.is_multiple_of(self.minibatch_size) {
            return bad(format!(
                "rollout_horizon {} is not divisible by minibatch_size {}",
                self.rollout_horizon, self.minibatch_size
            ));
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be >= 1".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }

    pub fn loss_coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Default training budget by network size.
pub fn default_total_timesteps(num_nodes: usize) -> u64 {
    match num_nodes {
        0..=5 => 1_000_000,
        6..=10 => 1_500_000,
        11..=20 => 2_000_000,
        _ => 2_500_000,
    }
}

/// Samples from the policy's categorical distribution. Returns
/// `(action, log_prob, value)`.
pub fn sample_action(
    params: &PolicyParams,
    observation: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, f64, f64), PpoError> {
    params.check_input(observation)?;
    let fwd = params.forward(observation);
    let logp = network::log_softmax(&fwd.logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut action = logp.len() - 1;
    for (i, l) in logp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            action = i;
            break;
        }
    }
    Ok((action, logp[action], fwd.value))
}

/// Rescales to zero mean and unit (population) variance. Batches of one are
/// zeroed.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n < 2 {
        advantages.fill(0.0);
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Parameters plus optimiser state.
#[derive(Debug, Clone)]
pub struct Learner {
    pub params: PolicyParams,
    optimizer: Adam,
    grads: Gradients,
}

impl Learner {
    pub fn new(params: PolicyParams, learning_rate: f64) -> Self {
        let optimizer = Adam::new(params.param_count(), learning_rate);
        let grads = Gradients::zeros_like(&params);
        Self { params, optimizer, grads }
    }

    /// `update_epochs` passes of shuffled minibatches over the buffer.
    /// Advantages are normalised once for the whole buffer. Returns `None`
    /// if the loss, gradients or parameters stop being finite.
    pub fn update(
        &mut self,
        buffer: &RolloutBuffer,
        advantages: &[f64],
        returns: &[f64],
        config: &PpoConfig,
        rng: &mut ChaCha8Rng,
    ) -> Option<UpdateStats> {
        let mut adv = advantages.to_vec();
        normalize_advantages(&mut adv);
        let coefs = config.loss_coefficients();
        let mut order: Vec<usize> = (0..buffer.len()).collect();
        let mut totals = UpdateStats::default();
        let mut batches = 0usize;
        for _ in 0..config.update_epochs {
            order.shuffle(rng);
            for chunk in order.chunks(config.minibatch_size) {
                let batch: Vec<Sample> = chunk
                    .iter()
                    .map(|&i| Sample {
                        observation: buffer.observation(i),
                        action: buffer.actions[i],
                        old_log_prob: buffer.log_probs[i],
                        advantage: adv[i],
                        target_return: returns[i],
                    })
                    .collect();
                let stats = ppo_loss_and_grad(&self.params, &batch, coefs, &mut self.grads);
                let norm = self.grads.global_norm();
                if !stats.total.is_finite() || !norm.is_finite() {
                    return None;
                }
                if config.max_grad_norm > 0.0 && norm > config.max_grad_norm {
                    self.grads.scale(config.max_grad_norm / norm);
                }
                self.optimizer.step(&mut self.params, &self.grads);
                totals.policy_loss += stats.policy;
                totals.value_loss += stats.value;
                totals.entropy += stats.entropy;
                totals.approx_kl += stats.approx_kl;
                totals.clip_fraction += stats.clip_fraction;
                totals.grad_norm += norm;
                batches += 1;
            }
        }
        if !self.params.all_finite() {
            return None;
        }
        if batches > 0 {
            let b = batches as f64;
            totals.policy_loss /= b;
            totals.value_loss /= b;
            totals.entropy /= b;
            totals.approx_kl /= b;
            totals.clip_fraction /= b;
            totals.grad_norm /= b;
        }
        Some(totals)
    }
}
