//! Rolling out blue policies and summarising their ground-truth performance.

use serde::{Deserialize, Serialize};

use crate::agents::OraclePolicy;
use crate::env::{BlueAction, Env, EnvConfig, EnvError, Observation, StepTrace};
use crate::metrics::{episode_ground_truth_score, mean_and_se, EpisodeEvaluation};
use crate::rewards::RewardFunctionKind;

/// Anything that maps an observation to a blue action.
pub trait BluePolicy {
    fn act(&mut self, observation: &Observation) -> BlueAction;
}

impl BluePolicy for OraclePolicy {
    fn act(&mut self, observation: &Observation) -> BlueAction {
        self.select_action(observation)
    }
}

impl<F: FnMut(&Observation) -> BlueAction> BluePolicy for F {
    fn act(&mut self, observation: &Observation) -> BlueAction {
        self(observation)
    }
}

/// Mean per-step end-of-step reward under each reward function, whichever
/// one the environment was configured with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub sparse_positive: f64,
    pub sparse_negative: f64,
    pub dense: f64,
}

impl RewardBreakdown {
    pub fn get(&self, kind: RewardFunctionKind) -> f64 {
        match kind {
            RewardFunctionKind::SparsePositive => self.sparse_positive,
            RewardFunctionKind::SparseNegative => self.sparse_negative,
            RewardFunctionKind::Dense => self.dense,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub episodes: usize,
    pub ground_truth_mean: f64,
    pub ground_truth_se: f64,
    pub episodic_reward_mean: f64,
    pub episodic_reward_se: f64,
    pub step_rewards: RewardBreakdown,
}

/// Runs one episode from the environment's current (reset) state.
pub fn run_episode<P: BluePolicy + ?Sized>(
    env: &mut Env,
    policy: &mut P,
) -> Result<(EpisodeEvaluation, Vec<StepTrace>), EnvError> {
    let mut obs = env.observation();
    let mut traces = Vec::with_capacity(env.config().episode_length);
    let mut episodic_reward = 0.0;
    loop {
        let out = env.step(policy.act(&obs))?;
        episodic_reward += out.reward;
        traces.push(out.trace);
        obs = out.observation;
        if out.done {
            break;
        }
    }
    let ground_truth_score =
        episode_ground_truth_score(&traces).expect("episode_length >= 1 is validated");
    Ok((EpisodeEvaluation { ground_truth_score, episodic_reward, steps: traces.len() }, traces))
}

/// Evaluates `policy` for `episodes` consecutive episodes of one environment
/// seeded from `config.rng_seed`.
pub fn evaluate_blue_policy<P: BluePolicy + ?Sized>(
    policy: &mut P,
    config: &EnvConfig,
    episodes: usize,
) -> Result<EvaluationSummary, EnvError> {
    let mut env = Env::new(config.clone())?;
    let mut scores = Vec::with_capacity(episodes);
    let mut returns = Vec::with_capacity(episodes);
    let mut breakdown = RewardBreakdown::default();
    let mut steps = 0usize;
    for _ in 0..episodes {
        env.reset(None);
        let (eval, traces) = run_episode(&mut env, policy)?;
        scores.push(eval.ground_truth_score);
        returns.push(eval.episodic_reward);
        for trace in &traces {
            let end = trace.end_of_step();
            breakdown.sparse_positive += RewardFunctionKind::SparsePositive.reward(end);
            breakdown.sparse_negative += RewardFunctionKind::SparseNegative.reward(end);
            breakdown.dense += RewardFunctionKind::Dense.reward(end);
        }
        steps += traces.len();
    }
    if steps > 0 {
        let s = steps as f64;
        breakdown.sparse_positive /= s;
        breakdown.sparse_negative /= s;
        breakdown.dense /= s;
    }
    let (ground_truth_mean, ground_truth_se) = mean_and_se(&scores);
    let (episodic_reward_mean, episodic_reward_se) = mean_and_se(&returns);
    Ok(EvaluationSummary {
        episodes,
        ground_truth_mean,
        ground_truth_se,
        episodic_reward_mean,
        episodic_reward_se,
        step_rewards: breakdown,
    })
}
