//! The PPO minibatch loss
//!
//! `L = mean(-min(r A, clip(r, 1-e, 1+e) A) + c_v (V - R)^2 - c_e H)`
//!
//! and its gradient with respect to every network parameter.

use super::network::{log_softmax, Gradients, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// One training example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub observation: &'a [f64],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target_return: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    /// Mean negated clipped surrogate.
    pub policy: f64,
    /// Mean squared value error (before `value_coef`).
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Loss only.
pub fn ppo_loss(params: &PolicyParams, batch: &[Sample], coefs: LossCoefficients) -> LossStats {
    evaluate(params, batch, coefs, None)
}

/// Loss plus gradients accumulated into `grads` (which is reset first).
pub fn ppo_loss_and_grad(
    params: &PolicyParams,
    batch: &[Sample],
    coefs: LossCoefficients,
    grads: &mut Gradients,
) -> LossStats {
    grads.reset();
    evaluate(params, batch, coefs, Some(grads))
}

fn evaluate(
    params: &PolicyParams,
    batch: &[Sample],
    coefs: LossCoefficients,
    mut grads: Option<&mut Gradients>,
) -> LossStats {
    let inv_b = 1.0 / batch.len() as f64;
    let eps = coefs.clip_epsilon;
    let mut stats = LossStats::default();
    let mut dlogits = vec![0.0; params.action_count];

    for s in batch {
        let fwd = params.forward(s.observation);
        let logp = log_softmax(&fwd.logits);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();

        let log_ratio = logp[s.action] - s.old_log_prob;
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        let unclipped_obj = ratio * s.advantage;
        let clipped_obj = clipped * s.advantage;
        let surrogate = unclipped_obj.min(clipped_obj);
        let value_err = fwd.value - s.target_return;

        stats.policy -= surrogate * inv_b;
        stats.value += value_err * value_err * inv_b;
        stats.entropy += entropy * inv_b;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
        if (ratio - 1.0).abs() > eps {
            stats.clip_fraction += inv_b;
        }

        if let Some(g) = grads.as_deref_mut() {
            // d(-surrogate)/d(logp): only the unclipped branch carries gradient.
            let dlogp = if unclipped_obj <= clipped_obj { -unclipped_obj } else { 0.0 };
            for (j, d) in dlogits.iter_mut().enumerate() {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                let policy_part = dlogp * (onehot - probs[j]);
                let entropy_part = coefs.entropy_coef * probs[j] * (logp[j] + entropy);
                *d = (policy_part + entropy_part) * inv_b;
            }
            let dvalue = 2.0 * coefs.value_coef * value_err * inv_b;
            params.backward(s.observation, &fwd, &dlogits, dvalue, g);
        }
    }
    stats.total = stats.policy + coefs.value_coef * stats.value - coefs.entropy_coef * stats.entropy;
    stats
}
