//! Scripted agents: the stochastic red attacker that lives inside the
//! environment, and hand-coded blue baselines.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ActionSpace, BlueAction, EnvConfig, NetworkState, Observation, RedAction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("oracle policy {kind} is not valid with the {space} action space")]
    IllegalPolicy { kind: OraclePolicyKind, space: ActionSpace },
}

/// How red picks among attackable nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The candidate furthest from the entry node (largest index on ties).
    DeepestCandidate,
    /// Uniformly random candidate.
    UniformCandidate,
}

impl TargetMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::DeepestCandidate => "deepest-candidate",
            Self::UniformCandidate => "uniform-candidate",
        }
    }
}

impl FromStr for TargetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deepest-candidate" => Ok(Self::DeepestCandidate),
            "uniform-candidate" => Ok(Self::UniformCandidate),
            other => Err(format!("unknown target mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedPolicyConfig {
    pub attack_prob: f64,
    pub target_mode: TargetMode,
}

impl Default for RedPolicyConfig {
    fn default() -> Self {
        Self { attack_prob: 0.9, target_mode: TargetMode::DeepestCandidate }
    }
}

/// Nodes red can attack this turn: the entry node if it is clean, plus every
/// clean chain neighbour of a compromised node. Sorted by index.
pub fn attack_candidates(compromised: &[bool], entry_node: usize) -> Vec<usize> {
    let n = compromised.len();
    (0..n)
        .filter(|&i| !compromised[i])
        .filter(|&i| {
            i == entry_node
                || (i > 0 && compromised[i - 1])
                || (i + 1 < n && compromised[i + 1])
        })
        .collect()
}

fn deepest(nodes: impl IntoIterator<Item = usize>, entry_node: usize) -> Option<usize> {
    nodes.into_iter().max_by_key(|&i| (i.abs_diff(entry_node), i))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedPolicy {
    config: RedPolicyConfig,
}

impl RedPolicy {
    pub fn new(config: RedPolicyConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> RedPolicyConfig {
        self.config
    }

    /// Exactly one uniform draw decides attack vs. dormant, so blue policies
    /// facing the same seed see the same sequence of attack rolls.
    pub fn select_action(
        &self,
        state: &NetworkState,
        entry_node: usize,
        rng: &mut ChaCha8Rng,
    ) -> RedAction {
        if rng.gen::<f64>() >= self.config.attack_prob {
            return RedAction::DoNothing;
        }
        let candidates = attack_candidates(&state.compromised, entry_node);
        let target = match self.config.target_mode {
            TargetMode::DeepestCandidate => deepest(candidates.iter().copied(), entry_node),
            TargetMode::UniformCandidate if candidates.is_empty() => None,
            TargetMode::UniformCandidate => Some(candidates[rng.gen_range(0..candidates.len())]),
        };
        target.map_or(RedAction::DoNothing, RedAction::BasicAttack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OraclePolicyKind {
    /// Restore the entry node every step.
    RestoreEntry,
    /// Decoy the entry node while it looks clean, otherwise restore it.
    DecoyEntry,
    /// Restore the deepest node known to be compromised; scan if none.
    GreedyRestoreDeepest,
    /// Always scan.
    NoOp,
}

impl OraclePolicyKind {
    pub const ALL: [Self; 4] = [Self::RestoreEntry, Self::DecoyEntry, Self::GreedyRestoreDeepest, Self::NoOp];

    pub fn name(self) -> &'static str {
        match self {
            Self::RestoreEntry => "restore-entry",
            Self::DecoyEntry => "decoy-entry",
            Self::GreedyRestoreDeepest => "greedy-restore-deepest",
            Self::NoOp => "noop",
        }
    }
}

impl fmt::Display for OraclePolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OraclePolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "restore-entry" => Ok(Self::RestoreEntry),
            "decoy-entry" => Ok(Self::DecoyEntry),
            "greedy-restore-deepest" => Ok(Self::GreedyRestoreDeepest),
            "noop" => Ok(Self::NoOp),
            other => Err(format!("unknown oracle policy '{other}'")),
        }
    }
}

/// A scripted blue policy. Decisions use the observation only, so they stay
/// meaningful when detection is imperfect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OraclePolicy {
    kind: OraclePolicyKind,
    entry_node: usize,
}

impl OraclePolicy {
    pub fn new(kind: OraclePolicyKind, config: &EnvConfig) -> Result<Self, AgentError> {
        if kind == OraclePolicyKind::DecoyEntry && config.action_space == ActionSpace::Basic {
            return Err(AgentError::IllegalPolicy { kind, space: config.action_space });
        }
        Ok(Self { kind, entry_node: config.entry_node })
    }

    pub fn kind(&self) -> OraclePolicyKind {
        self.kind
    }

    pub fn select_action(&self, obs: &Observation) -> BlueAction {
        let entry = self.entry_node;
        match self.kind {
            OraclePolicyKind::RestoreEntry => BlueAction::Restore(entry),
            OraclePolicyKind::DecoyEntry if obs.appears_compromised(entry) => {
                BlueAction::Restore(entry)
            }
            OraclePolicyKind::DecoyEntry => BlueAction::PlaceDecoy(entry),
            OraclePolicyKind::GreedyRestoreDeepest => {
                deepest((0..obs.num_nodes()).filter(|&i| obs.appears_compromised(i)), entry)
                    .map_or(BlueAction::Scan, BlueAction::Restore)
            }
            OraclePolicyKind::NoOp => BlueAction::Scan,
        }
    }
}
