//! Scripted-baseline evaluation (the `oracle` subcommand).

use cybergym::agents::AgentError;
use cybergym::evaluation::run_episode;
use cybergym::{evaluate_blue_policy, Env, EnvConfig, EnvError, EvaluationSummary, OraclePolicy, OraclePolicyKind, StepTrace};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Policy(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub policy: OraclePolicyKind,
    pub env: EnvConfig,
    pub summary: EvaluationSummary,
}

pub fn run_oracle(kind: OraclePolicyKind, env: &EnvConfig, episodes: usize) -> Result<OracleReport, OracleError> {
    let mut policy = OraclePolicy::new(kind, env)?;
    let summary = evaluate_blue_policy(&mut policy, env, episodes)?;
    Ok(OracleReport { policy: kind, env: env.clone(), summary })
}

/// Traces of the first episode, for export.
pub fn first_episode_traces(kind: OraclePolicyKind, env: &EnvConfig) -> Result<Vec<StepTrace>, OracleError> {
    let mut policy = OraclePolicy::new(kind, env)?;
    let mut e = Env::new(env.clone())?;
    Ok(run_episode(&mut e, &mut policy)?.1)
}
