//! A small graph-based cyber defence gym and the tooling needed to study how
//! reward design affects the defenders trained in it.
//!
//! The environment models a linear chain of hosts. A scripted red attacker
//! enters through a fixed node and moves laterally; a blue defender scans,
//! restores, and (optionally) places decoys. Each step produces a
//! [`StepTrace`](env::StepTrace) holding the network state after every
//! individual action, so agents can be scored on what actually happened
//! inside the step rather than only on the end-of-step state their reward
//! sees.
//!
//! Modules:
//! - [`env`]: configuration, state, actions, observation encoding, stepping.
//! - [`agents`]: the stochastic red attacker and scripted blue baselines.
//! - [`rewards`]: sparse-positive, sparse-negative and dense reward functions.
//! - [`metrics`]: ground-truth score and dispersion variability.
//! - [`evaluation`]: episode rollouts for any blue policy.
//! - [`ppo`]: a dependency-free PPO trainer with a small MLP.

pub mod agents;
pub mod env;
pub mod evaluation;
pub mod metrics;
pub mod ppo;
pub mod rewards;
pub mod seed;

pub use agents::{OraclePolicy, OraclePolicyKind, RedPolicy, RedPolicyConfig, TargetMode};
pub use env::{
    ActionSpace, AgentOrder, BlueAction, DecoyLifetime, Env, EnvConfig, EnvError, NetworkState,
    Observation, RedAction, StepOutcome, StepTrace,
};
pub use evaluation::{evaluate_blue_policy, BluePolicy, EvaluationSummary};
pub use metrics::{EpisodeEvaluation, MetricsError};
pub use rewards::RewardFunctionKind;
