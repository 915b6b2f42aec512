//! Rollout collection, updates, curve logging and policy evaluation.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, PolicyParams};
use super::{compute_gae, sample_action, Learner, PpoConfig, PpoError, RolloutBuffer, UpdateStats};
use crate::env::{ActionSpace, BlueAction, Env, EnvConfig, Observation};
use crate::evaluation::{evaluate_blue_policy, BluePolicy, EvaluationSummary};
use crate::metrics::step_ground_truth_penalty;
use crate::seed::{derive_seed, rng_from_seed, stream};

/// Aggregate of the training episodes that finished inside one
/// `eval_interval` window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Timesteps consumed when the point was logged.
    pub timestep: u64,
    pub episodes: usize,
    pub mean_episodic_reward: f64,
    pub mean_ground_truth: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub points: Vec<CurvePoint>,
}

impl TrainingCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ground_truth(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_ground_truth).collect()
    }

    pub fn episodic_reward(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_episodic_reward).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: TrainingCurve,
    pub last_update: Option<UpdateStats>,
    pub updates: usize,
}

#[derive(Default)]
struct EpisodeTally {
    reward: f64,
    penalty: f64,
    steps: usize,
    finished_rewards: Vec<f64>,
    finished_scores: Vec<f64>,
}

impl EpisodeTally {
    fn record_step(&mut self, reward: f64, penalty: f64) {
        self.reward += reward;
        self.penalty += penalty;
        self.steps += 1;
    }

    fn finish_episode(&mut self) {
        self.finished_rewards.push(self.reward);
        self.finished_scores.push(self.penalty / self.steps as f64);
        self.reward = 0.0;
        self.penalty = 0.0;
        self.steps = 0;
    }

    fn take_point(&mut self, timestep: u64) -> Option<CurvePoint> {
        let episodes = self.finished_rewards.len();
        if episodes == 0 {
            return None;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let point = CurvePoint {
            timestep,
            episodes,
            mean_episodic_reward: mean(&self.finished_rewards),
            mean_ground_truth: mean(&self.finished_scores),
        };
        self.finished_rewards.clear();
        self.finished_scores.clear();
        Some(point)
    }
}

/// Trains a policy with PPO. A pure function of its two configs: the
/// environment stream comes from `env_config.rng_seed`, initialisation,
/// action sampling and minibatch shuffling from `ppo_config.seed`.
///
/// A curve point is logged at every multiple of `eval_interval` timesteps
/// at which at least one training episode has finished since the previous
/// point.
pub fn train(env_config: &EnvConfig, ppo_config: &PpoConfig) -> Result<TrainOutcome, PpoError> {
    ppo_config.validate()?;
    let mut env = Env::new(env_config.clone())?;
    let params = PolicyParams::init(
        env_config.observation_len(),
        env_config.action_count(),
        &ppo_config.hidden_layers,
        derive_seed(ppo_config.seed, stream::INIT),
    )?;
    let mut learner = Learner::new(params, ppo_config.learning_rate);
    let mut rng = rng_from_seed(derive_seed(ppo_config.seed, stream::ACTIONS));
    let mut buffer = RolloutBuffer::new(env_config.observation_len(), ppo_config.rollout_horizon);
    let mut curve = TrainingCurve::default();
    let mut tally = EpisodeTally::default();
    let mut last_update = None;
    let mut updates = 0usize;

    let mut obs = env.reset(None);
    let mut timestep = 0u64;
    while timestep < ppo_config.total_timesteps {
        let horizon = (ppo_config.total_timesteps - timestep).min(ppo_config.rollout_horizon as u64);
        buffer.clear();
        for _ in 0..horizon {
            let (action, log_prob, value) = sample_action(&learner.params, obs.as_slice(), &mut rng)?;
            let out = env.step_index(action)?;
            let penalty = step_ground_truth_penalty(&out.trace);
            buffer.push(obs.as_slice(), action, log_prob, out.reward, value, out.done, penalty);
            tally.record_step(out.reward, penalty);
            timestep += 1;
            obs = if out.done {
                tally.finish_episode();
                env.reset(None)
            } else {
                out.observation
            };
            if timestep.is_multiple_of(ppo_config.eval_interval) {
                curve.points.extend(tally.take_point(timestep));
            }
        }

        let last_done = buffer.dones.last().copied().unwrap_or(true);
        let bootstrap = if last_done { 0.0 } else { learner.params.forward(obs.as_slice()).value };
        let (advantages, returns) = compute_gae(
            &buffer.rewards,
            &buffer.values,
            &buffer.dones,
            bootstrap,
            ppo_config.gamma,
            ppo_config.gae_lambda,
        )?;
        let stats = learner
            .update(&buffer, &advantages, &returns, ppo_config, &mut rng)
            .ok_or(PpoError::NonFiniteLoss { timestep })?;
        last_update = Some(stats);
        updates += 1;
    }

    Ok(TrainOutcome { params: learner.params, curve, last_update, updates })
}

/// A trained network acting as a blue policy.
#[derive(Debug, Clone)]
pub struct PpoPolicy<'a> {
    params: &'a PolicyParams,
    num_nodes: usize,
    space: ActionSpace,
    deterministic: bool,
    rng: ChaCha8Rng,
}

impl<'a> PpoPolicy<'a> {
    pub fn new(params: &'a PolicyParams, env_config: &EnvConfig, deterministic: bool, seed: u64) -> Result<Self, PpoError> {
        if params.obs_dim != env_config.observation_len() || params.action_count != env_config.action_count() {
            return Err(PpoError::BadDimensions(format!(
                "policy is {}→{}, environment needs {}→{}",
                params.obs_dim,
                params.action_count,
                env_config.observation_len(),
                env_config.action_count()
            )));
        }
        Ok(Self {
            params,
            num_nodes: env_config.num_nodes,
            space: env_config.action_space,
            deterministic,
            rng: rng_from_seed(seed),
        })
    }

    pub fn action_index(&mut self, observation: &Observation) -> usize {
        if self.deterministic {
            argmax(&self.params.forward(observation.as_slice()).logits)
        } else {
            sample_action(self.params, observation.as_slice(), &mut self.rng)
                .expect("dimensions checked at construction")
                .0
        }
    }
}

impl BluePolicy for PpoPolicy<'_> {
    fn act(&mut self, observation: &Observation) -> BlueAction {
        let index = self.action_index(observation);
        BlueAction::from_index(index, self.num_nodes, self.space)
            .expect("action_count matches the environment")
    }
}

/// Runs `episodes` fresh episodes with the network. With `deterministic` the
/// highest-logit action is taken; otherwise actions are sampled from a stream
/// derived from `env_config.rng_seed`.
pub fn evaluate_policy(
    params: &PolicyParams,
    env_config: &EnvConfig,
    episodes: usize,
    deterministic: bool,
) -> Result<EvaluationSummary, PpoError> {
    let mut policy = PpoPolicy::new(
        params,
        env_config,
        deterministic,
        derive_seed(env_config.rng_seed, stream::ACTIONS),
    )?;
    Ok(evaluate_blue_policy(&mut policy, env_config, episodes)?)
}
