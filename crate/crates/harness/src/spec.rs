//! Sweep specification files.
//!
//! A spec is a TOML document. Every key is optional:
//!
//! ```toml
//! network_sizes = [2, 5, 10, 20, 50]
//! reward_functions = ["sparse-positive", "sparse-negative", "dense"]
//! agent_orders = ["red-then-blue", "blue-then-red"]
//! action_spaces = ["basic", "extended"]
//! seeds = [0, 1, 2]            # default: 0..25
//! eval_episodes = 1000
//! parallel_workers = 4         # default: available cores
//! dv_window = 30
//! dv_curve = "mean-ground-truth-score"
//!
//! [env]                        # applied to every cell
//! red_attack_prob = 0.9
//!
//! [ppo]                        # any PpoConfig field
//! total_timesteps = 200000     # default: per-size budget
//! ```

use std::collections::HashSet;

use cybergym::metrics::{CurveMeaning, DEFAULT_DV_WINDOW};
use cybergym::ppo::{default_total_timesteps, PpoConfig};
use cybergym::{ActionSpace, AgentOrder, DecoyLifetime, EnvConfig, RewardFunctionKind, TargetMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("could not parse sweep spec: {0}")]
    Parse(String),
    #[error("invalid sweep spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOverrides {
    pub entry_node: Option<usize>,
    pub episode_length: Option<usize>,
    pub red_attack_prob: Option<f64>,
    pub detection_prob: Option<f64>,
    pub decoy_lifetime: Option<DecoyLifetime>,
    pub red_target_mode: Option<TargetMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoOverrides {
    pub gamma: Option<f64>,
    pub gae_lambda: Option<f64>,
    pub clip_epsilon: Option<f64>,
    pub learning_rate: Option<f64>,
    pub rollout_horizon: Option<usize>,
    pub update_epochs: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub entropy_coef: Option<f64>,
    pub value_coef: Option<f64>,
    pub max_grad_norm: Option<f64>,
    pub hidden_layers: Option<Vec<usize>>,
    pub total_timesteps: Option<u64>,
    pub eval_interval: Option<u64>,
}

macro_rules! apply {
    ($over:expr, $base:expr, $($field:ident),+) => {
        $(if let Some(v) = &$over.$field { $base.$field = v.clone(); })+
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub network_sizes: Vec<usize>,
    pub reward_functions: Vec<RewardFunctionKind>,
    pub agent_orders: Vec<AgentOrder>,
    pub action_spaces: Vec<ActionSpace>,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    pub parallel_workers: usize,
    pub dv_window: usize,
    pub dv_curve: CurveMeaning,
    pub env: EnvOverrides,
    pub ppo: PpoOverrides,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            network_sizes: vec![2, 5, 10, 20, 50],
            reward_functions: RewardFunctionKind::ALL.to_vec(),
            agent_orders: vec![AgentOrder::RedThenBlue, AgentOrder::BlueThenRed],
            action_spaces: vec![ActionSpace::Basic, ActionSpace::Extended],
            seeds: (0..25).collect(),
            eval_episodes: 1000,
            parallel_workers: 0,
            dv_window: DEFAULT_DV_WINDOW,
            dv_curve: CurveMeaning::MeanGroundTruthScore,
            env: EnvOverrides::default(),
            ppo: PpoOverrides::default(),
        }
    }
}

/// One (config, seed) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunJob {
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub seed: u64,
    pub eval_episodes: usize,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        let spec: Self = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |m: &str| Err(SpecError::Invalid(m.to_string()));
        if self.network_sizes.is_empty()
            || self.reward_functions.is_empty()
            || self.agent_orders.is_empty()
            || self.action_spaces.is_empty()
            || self.seeds.is_empty()
        {
            return invalid("every grid axis needs at least one value");
        }
        let distinct: HashSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return invalid("seeds must be pairwise distinct");
        }
        if self.eval_episodes == 0 {
            return invalid("eval_episodes must be >= 1");
        }
        for job in self.jobs() {
            job.env.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
            job.ppo.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        if self.parallel_workers > 0 {
            self.parallel_workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    pub fn grid_size(&self) -> usize {
        self.network_sizes.len()
            * self.reward_functions.len()
            * self.agent_orders.len()
            * self.action_spaces.len()
            * self.seeds.len()
    }

    pub fn env_config(&self, nodes: usize, reward: RewardFunctionKind, order: AgentOrder, space: ActionSpace, seed: u64) -> EnvConfig {
        let mut env = EnvConfig {
            num_nodes: nodes,
            agent_order: order,
            action_space: space,
            reward_function: reward,
            rng_seed: seed,
            ..EnvConfig::default()
        };
        apply!(self.env, env, entry_node, episode_length, red_attack_prob, detection_prob, decoy_lifetime, red_target_mode);
        env
    }

    pub fn ppo_config(&self, nodes: usize, seed: u64) -> PpoConfig {
        let mut ppo = PpoConfig {
            total_timesteps: default_total_timesteps(nodes),
            seed,
            ..PpoConfig::default()
        };
        apply!(
            self.ppo, ppo, gamma, gae_lambda, clip_epsilon, learning_rate, rollout_horizon, update_epochs,
            minibatch_size, entropy_coef, value_coef, max_grad_norm, hidden_layers, total_timesteps, eval_interval
        );
        ppo
    }

    /// All runs in grid order: size, reward, order, space, seed.
    pub fn jobs(&self) -> Vec<RunJob> {
        let mut jobs = Vec::with_capacity(self.grid_size());
        for &nodes in &self.network_sizes {
            for &reward in &self.reward_functions {
                for &order in &self.agent_orders {
                    for &space in &self.action_spaces {
                        for &seed in &self.seeds {
                            jobs.push(RunJob {
                                env: self.env_config(nodes, reward, order, space, seed),
                                ppo: self.ppo_config(nodes, seed),
                                seed,
                                eval_episodes: self.eval_episodes,
                            });
                        }
                    }
                }
            }
        }
        jobs
    }
}
