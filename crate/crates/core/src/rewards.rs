//! End-of-step reward functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RewardError {
    #[error("reward requested for an empty network")]
    EmptyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardFunctionKind {
    /// +1 when no node is compromised.
    SparsePositive,
    /// -1 when every node is compromised.
    SparseNegative,
    /// -1 per compromised node.
    Dense,
}

impl RewardFunctionKind {
    pub const ALL: [Self; 3] = [Self::SparsePositive, Self::SparseNegative, Self::Dense];

    pub fn name(self) -> &'static str {
        match self {
            Self::SparsePositive => "sparse-positive",
            Self::SparseNegative => "sparse-negative",
            Self::Dense => "dense",
        }
    }

    /// Reward for an end-of-step compromise vector. An empty vector scores 0.
    pub fn reward(self, compromised: &[bool]) -> f64 {
        let count = compromised.iter().filter(|&&c| c).count();
        match self {
            Self::SparsePositive => f64::from(u8::from(count == 0)),
            Self::SparseNegative => 0.0 - f64::from(u8::from(count == compromised.len())),
            Self::Dense => 0.0 - count as f64,
        }
    }
}

impl fmt::Display for RewardFunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardFunctionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown reward function '{s}' (expected sparse-positive, sparse-negative or dense)"))
    }
}

pub fn compute_reward(kind: RewardFunctionKind, compromised: &[bool]) -> Result<f64, RewardError> {
    if compromised.is_empty() {
        return Err(RewardError::EmptyState);
    }
    Ok(kind.reward(compromised))
}
