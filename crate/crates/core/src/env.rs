//! The linear-network defence game.
//!
//! A step is two turns, one red and one blue, in the configured
//! [`AgentOrder`]. After each turn the true compromise flags are copied into
//! a snapshot; the snapshots of a step form its [`StepTrace`]. The training
//! reward only ever sees the state after the second turn.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{RedPolicy, RedPolicyConfig, TargetMode};
use crate::rewards::RewardFunctionKind;
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("illegal blue action {action}: {reason}")]
    IllegalAction { action: String, reason: String },
    #[error("episode finished; call reset before stepping again")]
    EpisodeFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentOrder {
    RedThenBlue,
    BlueThenRed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSpace {
    /// Scan plus restore-per-node.
    Basic,
    /// Basic plus place-decoy-per-node.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyLifetime {
    /// A decoy shields its node for the rest of the step it was placed in.
    CurrentStepOnly,
    /// A decoy stays until an attack hits it.
    UntilConsumed,
}

macro_rules! kebab_names {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown {} '{}' (expected one of: {})",
                        stringify!($ty),
                        other,
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

kebab_names!(AgentOrder { RedThenBlue => "red-then-blue", BlueThenRed => "blue-then-red" });
kebab_names!(ActionSpace { Basic => "basic", Extended => "extended" });
kebab_names!(DecoyLifetime {
    CurrentStepOnly => "current-step-only",
    UntilConsumed => "until-consumed",
});

/// Everything needed to build an [`Env`]. Field names double as the keys of
/// the TOML config file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_nodes: usize,
    pub entry_node: usize,
    pub agent_order: AgentOrder,
    pub action_space: ActionSpace,
    pub episode_length: usize,
    pub red_attack_prob: f64,
    pub detection_prob: f64,
    pub decoy_lifetime: DecoyLifetime,
    pub reward_function: RewardFunctionKind,
    pub red_target_mode: TargetMode,
    pub rng_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_nodes: 2,
            entry_node: 0,
            agent_order: AgentOrder::RedThenBlue,
            action_space: ActionSpace::Basic,
            episode_length: 100,
            red_attack_prob: 0.9,
            detection_prob: 1.0,
            decoy_lifetime: DecoyLifetime::CurrentStepOnly,
            reward_function: RewardFunctionKind::SparsePositive,
            red_target_mode: TargetMode::DeepestCandidate,
            rng_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn with_nodes(num_nodes: usize) -> Self {
        Self { num_nodes, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.num_nodes < 2 {
            return bad(format!("num_nodes must be >= 2, got {}", self.num_nodes));
        }
        if self.entry_node >= self.num_nodes {
            return bad(format!(
                "entry_node {} out of range for {} nodes",
                self.entry_node, self.num_nodes
            ));
        }
        if self.episode_length == 0 {
            return bad("episode_length must be >= 1".into());
        }
        for (name, p) in [
            ("red_attack_prob", self.red_attack_prob),
            ("detection_prob", self.detection_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let config: Self =
            toml::from_str(text).map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("EnvConfig always serialises")
    }

    pub fn observation_len(&self) -> usize {
        observation_len(self.num_nodes)
    }

    pub fn action_count(&self) -> usize {
        action_count(self.action_space, self.num_nodes)
    }

    pub fn red_policy_config(&self) -> RedPolicyConfig {
        RedPolicyConfig {
            attack_prob: self.red_attack_prob,
            target_mode: self.red_target_mode,
        }
    }
}

/// Observation length for an `n`-node chain: adjacency, vulnerability,
/// isolation and known-compromise blocks.
pub fn observation_len(num_nodes: usize) -> usize {
    num_nodes * num_nodes + 3 * num_nodes
}

/// Number of discrete blue actions. Restore and decoy are targeted per node.
pub fn action_count(space: ActionSpace, num_nodes: usize) -> usize {
    match space {
        ActionSpace::Basic => 1 + num_nodes,
        ActionSpace::Extended => 1 + 2 * num_nodes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlueAction {
    Scan,
    Restore(usize),
    PlaceDecoy(usize),
}

impl BlueAction {
    /// Index layout: `0` scan, `1..=n` restore, `n+1..=2n` place decoy.
    pub fn from_index(index: usize, num_nodes: usize, space: ActionSpace) -> Result<Self, EnvError> {
        let action = match index {
            0 => Self::Scan,
            i if i <= num_nodes => Self::Restore(i - 1),
            i if i <= 2 * num_nodes => Self::PlaceDecoy(i - 1 - num_nodes),
            i => {
                return Err(EnvError::IllegalAction {
                    action: format!("index {i}"),
                    reason: format!("only {} actions exist", action_count(space, num_nodes)),
                })
            }
        };
        action.check_legal(num_nodes, space)?;
        Ok(action)
    }

    pub fn to_index(self, num_nodes: usize) -> usize {
        match self {
            Self::Scan => 0,
            Self::Restore(t) => 1 + t,
            Self::PlaceDecoy(t) => 1 + num_nodes + t,
        }
    }

    pub fn check_legal(self, num_nodes: usize, space: ActionSpace) -> Result<(), EnvError> {
        let illegal = |reason: String| {
            Err(EnvError::IllegalAction { action: self.to_string(), reason })
        };
        match self {
            Self::Scan => Ok(()),
            Self::Restore(t) | Self::PlaceDecoy(t) if t >= num_nodes => {
                illegal(format!("target {t} out of range for {num_nodes} nodes"))
            }
            Self::PlaceDecoy(_) if space == ActionSpace::Basic => {
                illegal("place-decoy is not in the basic action space".into())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BlueAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scan => write!(f, "scan"),
            Self::Restore(t) => write!(f, "restore({t})"),
            Self::PlaceDecoy(t) => write!(f, "place-decoy({t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RedAction {
    DoNothing,
    BasicAttack(usize),
}

impl fmt::Display for RedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DoNothing => write!(f, "do-nothing"),
            Self::BasicAttack(t) => write!(f, "basic-attack({t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Red,
    Blue,
}

impl AgentOrder {
    pub fn turns(self) -> [Actor; 2] {
        match self {
            Self::RedThenBlue => [Actor::Red, Actor::Blue],
            Self::BlueThenRed => [Actor::Blue, Actor::Red],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnAction {
    Red(RedAction),
    Blue(BlueAction),
}

impl TurnAction {
    pub fn actor(&self) -> Actor {
        match self {
            Self::Red(_) => Actor::Red,
            Self::Blue(_) => Actor::Blue,
        }
    }
}

impl fmt::Display for TurnAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Red(a) => a.fmt(f),
            Self::Blue(a) => a.fmt(f),
        }
    }
}

/// Ground-truth simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub compromised: Vec<bool>,
    pub decoy_present: Vec<bool>,
    /// Blue's belief about compromise, refreshed by scans and attacks.
    pub known_compromised: Vec<bool>,
    /// Always 1.0: a launched attack on an undecoyed node never fails.
    pub vulnerability: Vec<f64>,
    /// Always false: isolation is not modelled.
    pub isolated: Vec<bool>,
    pub step_index: usize,
}

impl NetworkState {
    pub fn clean(num_nodes: usize) -> Self {
        Self {
            compromised: vec![false; num_nodes],
            decoy_present: vec![false; num_nodes],
            known_compromised: vec![false; num_nodes],
            vulnerability: vec![1.0; num_nodes],
            isolated: vec![false; num_nodes],
            step_index: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.compromised.len()
    }

    pub fn compromised_count(&self) -> usize {
        self.compromised.iter().filter(|&&c| c).count()
    }

    pub fn apply_blue_action(&mut self, action: BlueAction) {
        match action {
            BlueAction::Scan => self.known_compromised.clone_from(&self.compromised),
            BlueAction::Restore(t) => {
                self.compromised[t] = false;
                self.known_compromised[t] = false;
            }
            BlueAction::PlaceDecoy(t) => {
                // A canary on a host the attacker already owns does nothing.
                if !self.compromised[t] {
                    self.decoy_present[t] = true;
                }
            }
        }
    }

    /// Applies a red action. `rng` is drawn from only when
    /// `detection_prob < 1` and an attack lands.
    pub fn apply_red_action(
        &mut self,
        action: RedAction,
        lifetime: DecoyLifetime,
        detection_prob: f64,
        rng: &mut ChaCha8Rng,
    ) {
        let RedAction::BasicAttack(t) = action else {
            return;
        };
        if self.decoy_present[t] {
            if lifetime == DecoyLifetime::UntilConsumed {
                self.decoy_present[t] = false;
            }
            return;
        }
        self.compromised[t] = true;
        if detection_prob >= 1.0 || rng.gen::<f64>() < detection_prob {
            self.known_compromised[t] = true;
        }
    }
}

/// Flat observation vector: `[adjacency (n*n) | vulnerability (n) |
/// isolated (n) | known compromised (n)]`, all entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    num_nodes: usize,
    values: Vec<f64>,
}

impl Observation {
    pub fn encode(state: &NetworkState) -> Self {
        let n = state.num_nodes();
        let mut values = Vec::with_capacity(observation_len(n));
        for i in 0..n {
            for j in 0..n {
                values.push(if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
            }
        }
        values.extend_from_slice(&state.vulnerability);
        values.extend(state.isolated.iter().map(|&b| f64::from(u8::from(b))));
        values.extend(state.known_compromised.iter().map(|&b| f64::from(u8::from(b))));
        Self { num_nodes: n, values }
    }

    /// Wraps a raw vector, e.g. for feeding a policy outside the environment.
    pub fn from_values(num_nodes: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == observation_len(num_nodes)).then_some(Self { num_nodes, values })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn block(&self, index: usize) -> &[f64] {
        let n = self.num_nodes;
        let start = n * n + index * n;
        &self.values[start..start + n]
    }

    pub fn adjacency(&self) -> &[f64] {
        &self.values[..self.num_nodes * self.num_nodes]
    }

    pub fn vulnerability(&self) -> &[f64] {
        self.block(0)
    }

    pub fn isolation(&self) -> &[f64] {
        self.block(1)
    }

    pub fn known_compromised(&self) -> &[f64] {
        self.block(2)
    }

    pub fn appears_compromised(&self, node: usize) -> bool {
        self.known_compromised()[node] > 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub action: TurnAction,
    pub compromised: Vec<bool>,
}

impl Snapshot {
    pub fn actor(&self) -> Actor {
        self.action.actor()
    }
}

/// The post-action snapshots of one step, in turn order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    /// 1-based index of the step this trace belongs to.
    pub step_index: usize,
    pub snapshots: Vec<Snapshot>,
    pub compromised_union: Vec<bool>,
}

impl StepTrace {
    pub fn new(step_index: usize, snapshots: Vec<Snapshot>) -> Self {
        let n = snapshots.first().map_or(0, |s| s.compromised.len());
        let mut union = vec![false; n];
        for snap in &snapshots {
            for (u, &c) in union.iter_mut().zip(&snap.compromised) {
                *u |= c;
            }
        }
        Self { step_index, snapshots, compromised_union: union }
    }

    /// The state the training reward is computed from.
    pub fn end_of_step(&self) -> &[bool] {
        self.snapshots.last().map_or(&[], |s| s.compromised.as_slice())
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        self.snapshots.iter().map(|snap| TraceRecord {
            step_index: self.step_index,
            actor: snap.actor(),
            action: snap.action.to_string(),
            compromised: compromised_hex(&snap.compromised),
        })
    }
}

/// One line of the JSONL trace export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step_index: usize,
    pub actor: Actor,
    pub action: String,
    /// Hex bitmask, node 0 in the least significant bit, `ceil(n/4)` digits.
    pub compromised: String,
}

pub fn compromised_hex(flags: &[bool]) -> String {
    let digits = flags.len().div_ceil(4).max(1);
    (0..digits)
        .rev()
        .map(|d| {
            let nibble = (0..4)
                .filter(|b| flags.get(d * 4 + b).copied().unwrap_or(false))
                .fold(0u32, |acc, b| acc | (1 << b));
            char::from_digit(nibble, 16).expect("nibble < 16")
        })
        .collect()
}

pub fn parse_compromised_hex(hex: &str, num_nodes: usize) -> Option<Vec<bool>> {
    let mut flags = vec![false; num_nodes];
    for (d, ch) in hex.chars().rev().enumerate() {
        let nibble = ch.to_digit(16)?;
        for b in 0..4 {
            if nibble & (1 << b) != 0 {
                *flags.get_mut(d * 4 + b)? = true;
            }
        }
    }
    Some(flags)
}

pub fn write_trace_jsonl<'a, W: Write>(
    traces: impl IntoIterator<Item = &'a StepTrace>,
    mut out: W,
) -> io::Result<()> {
    for trace in traces {
        for record in trace.records() {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub trace: StepTrace,
}

/// A single environment instance. Not shared between threads; run one per
/// worker.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    red: RedPolicy,
    state: NetworkState,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let rng = rng_from_seed(derive_seed(config.rng_seed, stream::ENV));
        Ok(Self {
            red: RedPolicy::new(config.red_policy_config()),
            state: NetworkState::clean(config.num_nodes),
            config,
            rng,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn action_count(&self) -> usize {
        self.config.action_count()
    }

    pub fn observation(&self) -> Observation {
        Observation::encode(&self.state)
    }

    pub fn is_done(&self) -> bool {
        self.state.step_index >= self.config.episode_length
    }

    /// Starts a fresh episode. The random stream carries on from the previous
    /// episode unless `seed` is given, in which case it restarts from it.
    pub fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(seed) = seed {
            self.rng = rng_from_seed(derive_seed(seed, stream::ENV));
        }
        self.state = NetworkState::clean(self.config.num_nodes);
        self.observation()
    }

    pub fn step_index(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        let action =
            BlueAction::from_index(action_index, self.config.num_nodes, self.config.action_space)?;
        self.step(action)
    }

    pub fn step(&mut self, blue: BlueAction) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        blue.check_legal(self.config.num_nodes, self.config.action_space)?;

        let mut snapshots = Vec::with_capacity(2);
        for actor in self.config.agent_order.turns() {
            let action = match actor {
                Actor::Red => {
                    let red = self.red.select_action(&self.state, self.config.entry_node, &mut self.rng);
                    self.state.apply_red_action(
                        red,
                        self.config.decoy_lifetime,
                        self.config.detection_prob,
                        &mut self.rng,
                    );
                    TurnAction::Red(red)
                }
                Actor::Blue => {
                    self.state.apply_blue_action(blue);
                    TurnAction::Blue(blue)
                }
            };
            snapshots.push(Snapshot { action, compromised: self.state.compromised.clone() });
        }

        if self.config.decoy_lifetime == DecoyLifetime::CurrentStepOnly {
            self.state.decoy_present.fill(false);
        }
        self.state.step_index += 1;

        let reward = self.config.reward_function.reward(&self.state.compromised);
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.is_done(),
            trace: StepTrace::new(self.state.step_index, snapshots),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{OraclePolicy, OraclePolicyKind};
    use proptest::prelude::*;

    fn config(n: usize) -> EnvConfig {
        EnvConfig::with_nodes(n)
    }

    #[test]
    fn fresh_env_is_clean() {
        let env = Env::new(config(2)).unwrap();
        assert_eq!(env.state().compromised, vec![false, false]);
        assert_eq!(env.state().step_index, 0);
    }

    #[test]
    fn observation_length_for_fifty_nodes() {
        let env = Env::new(config(50)).unwrap();
        assert_eq!(env.observation().len(), 2650);
        assert_eq!(config(50).observation_len(), 50 * 50 + 150);
    }

    #[test]
    fn entry_out_of_range_rejected() {
        let cfg = EnvConfig { entry_node: 5, ..config(2) };
        assert!(matches!(Env::new(cfg), Err(EnvError::InvalidConfig(_))));
        let cfg = EnvConfig { episode_length: 0, ..config(2) };
        assert!(matches!(Env::new(cfg), Err(EnvError::InvalidConfig(_))));
        let cfg = EnvConfig { red_attack_prob: 1.5, ..config(2) };
        assert!(matches!(Env::new(cfg), Err(EnvError::InvalidConfig(_))));
    }

    #[test]
    fn action_counts_match_enumeration() {
        for (space, n) in [(ActionSpace::Basic, 2), (ActionSpace::Extended, 2), (ActionSpace::Extended, 50)] {
            let enumerated: Vec<_> = (0..)
                .map_while(|i| BlueAction::from_index(i, n, space).ok())
                .collect();
            assert_eq!(enumerated.len(), action_count(space, n));
            for (i, a) in enumerated.iter().enumerate() {
                assert_eq!(a.to_index(n), i);
            }
        }
        assert_eq!(action_count(ActionSpace::Basic, 2), 3);
        assert_eq!(action_count(ActionSpace::Extended, 2), 5);
        assert_eq!(action_count(ActionSpace::Extended, 50), 101);
    }

    #[test]
    fn reset_observation_blocks() {
        let mut env = Env::new(config(2)).unwrap();
        for _ in 0..7 {
            env.step(BlueAction::Scan).unwrap();
        }
        let obs = env.reset(None);
        assert!(obs.known_compromised().iter().all(|&x| x == 0.0));
        assert_eq!(obs.adjacency(), &[0.0, 1.0, 1.0, 0.0]);
        let obs5 = Env::new(config(5)).unwrap().observation();
        assert_eq!(obs5.vulnerability(), &[1.0; 5]);
        assert_eq!(obs5.isolation(), &[0.0; 5]);
    }

    #[test]
    fn illegal_actions_and_finished_episodes() {
        let mut env = Env::new(config(2)).unwrap();
        assert!(matches!(env.step(BlueAction::PlaceDecoy(0)), Err(EnvError::IllegalAction { .. })));
        assert!(matches!(env.step(BlueAction::Restore(2)), Err(EnvError::IllegalAction { .. })));
        let mut env = Env::new(EnvConfig { episode_length: 1, ..config(2) }).unwrap();
        assert!(env.step(BlueAction::Scan).unwrap().done);
        assert_eq!(env.step(BlueAction::Scan), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn dormant_red_and_scan_leave_network_clean() {
        let cfg = EnvConfig { red_attack_prob: 0.0, reward_function: RewardFunctionKind::Dense, ..config(2) };
        let mut env = Env::new(cfg).unwrap();
        let out = env.step(BlueAction::Scan).unwrap();
        assert_eq!(out.trace.compromised_union, vec![false, false]);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn restore_after_attack_hides_compromise_from_reward() {
        let cfg = EnvConfig { red_attack_prob: 1.0, reward_function: RewardFunctionKind::Dense, ..config(2) };
        let mut env = Env::new(cfg).unwrap();
        let out = env.step(BlueAction::Restore(0)).unwrap();
        assert_eq!(out.trace.end_of_step(), &[false, false]);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.trace.compromised_union, vec![true, false]);
        assert_eq!(out.trace.snapshots[0].action, TurnAction::Red(RedAction::BasicAttack(0)));
    }

    #[test]
    fn decoy_blocks_attack_when_blue_moves_first() {
        let cfg = EnvConfig {
            red_attack_prob: 1.0,
            agent_order: AgentOrder::BlueThenRed,
            action_space: ActionSpace::Extended,
            ..config(2)
        };
        let mut env = Env::new(cfg).unwrap();
        let out = env.step(BlueAction::PlaceDecoy(0)).unwrap();
        assert_eq!(out.trace.compromised_union, vec![false, false]);
        assert_eq!(out.reward, 1.0);
        assert_eq!(env.state().decoy_present, vec![false, false]);
    }

    #[test]
    fn decoy_placed_after_red_is_useless() {
        let cfg = EnvConfig {
            red_attack_prob: 1.0,
            action_space: ActionSpace::Extended,
            ..config(2)
        };
        let mut env = Env::new(cfg).unwrap();
        let out = env.step(BlueAction::PlaceDecoy(1)).unwrap();
        assert_eq!(out.trace.compromised_union, vec![true, false]);
        let out = env.step(BlueAction::Scan).unwrap();
        assert_eq!(out.trace.compromised_union, vec![true, true]);
    }

    #[test]
    fn until_consumed_decoy_absorbs_one_attack() {
        let cfg = EnvConfig {
            red_attack_prob: 1.0,
            agent_order: AgentOrder::BlueThenRed,
            action_space: ActionSpace::Extended,
            decoy_lifetime: DecoyLifetime::UntilConsumed,
            ..config(3)
        };
        let mut env = Env::new(cfg).unwrap();
        env.step(BlueAction::PlaceDecoy(0)).unwrap();
        assert_eq!(env.state().compromised, vec![false; 3]);
        assert!(!env.state().decoy_present[0]);
        env.step(BlueAction::PlaceDecoy(2)).unwrap();
        assert_eq!(env.state().compromised, vec![true, false, false]);
        assert!(env.state().decoy_present[2]);
    }

    #[test]
    fn blue_action_semantics() {
        let mut s = NetworkState::clean(2);
        s.compromised = vec![true, false];
        s.apply_blue_action(BlueAction::Restore(0));
        assert_eq!(s.compromised, vec![false, false]);
        let before = s.clone();
        s.apply_blue_action(BlueAction::Restore(1));
        assert_eq!(s, before);
        s.compromised[0] = true;
        s.apply_blue_action(BlueAction::PlaceDecoy(0));
        assert!(!s.decoy_present[0]);
        s.apply_blue_action(BlueAction::Scan);
        assert_eq!(s.known_compromised, s.compromised);
    }

    #[test]
    fn red_action_semantics() {
        let mut rng = rng_from_seed(0);
        let mut s = NetworkState::clean(3);
        s.apply_red_action(RedAction::BasicAttack(0), DecoyLifetime::CurrentStepOnly, 1.0, &mut rng);
        assert!(s.compromised[0] && s.known_compromised[0]);
        let mut d = NetworkState::clean(3);
        d.decoy_present[0] = true;
        d.apply_red_action(RedAction::BasicAttack(0), DecoyLifetime::CurrentStepOnly, 1.0, &mut rng);
        assert!(!d.compromised[0]);
        let before = s.clone();
        s.apply_red_action(RedAction::DoNothing, DecoyLifetime::CurrentStepOnly, 1.0, &mut rng);
        assert_eq!(s, before);
    }

    #[test]
    fn undetected_attacks_need_a_scan() {
        let mut rng = rng_from_seed(0);
        let mut s = NetworkState::clean(3);
        s.apply_red_action(RedAction::BasicAttack(0), DecoyLifetime::CurrentStepOnly, 0.0, &mut rng);
        assert!(s.compromised[0] && !s.known_compromised[0]);
        s.apply_blue_action(BlueAction::Scan);
        assert!(s.known_compromised[0]);
    }

    #[test]
    fn hex_bitmask_layout() {
        assert_eq!(compromised_hex(&[true, false]), "1");
        assert_eq!(compromised_hex(&[false, true]), "2");
        let mut flags = vec![false; 50];
        flags[0] = true;
        flags[49] = true;
        let hex = compromised_hex(&flags);
        assert_eq!(hex.len(), 13);
        assert_eq!(hex, "2000000000001");
        assert_eq!(parse_compromised_hex(&hex, 50).unwrap(), flags);
    }

    #[test]
    fn trace_export_lines() {
        let cfg = EnvConfig { red_attack_prob: 1.0, ..config(2) };
        let mut env = Env::new(cfg).unwrap();
        let out = env.step(BlueAction::Restore(0)).unwrap();
        let mut buf = Vec::new();
        write_trace_jsonl([&out.trace], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            r#"{"step_index":1,"actor":"red","action":"basic-attack(0)","compromised":"1"}"#
        );
        assert_eq!(
            lines[1],
            r#"{"step_index":1,"actor":"blue","action":"restore(0)","compromised":"0"}"#
        );
    }

    #[test]
    fn toml_config_round_trip() {
        let text = r#"
            num_nodes = 5
            agent_order = "blue-then-red"
            action_space = "extended"
            reward_function = "dense"
            rng_seed = 42
        "#;
        let cfg = EnvConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.num_nodes, 5);
        assert_eq!(cfg.agent_order, AgentOrder::BlueThenRed);
        assert_eq!(cfg.episode_length, 100);
        assert_eq!(cfg.red_attack_prob, 0.9);
        assert_eq!(EnvConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert!(EnvConfig::from_toml_str("num_nodez = 3").is_err());
        assert!(EnvConfig::from_toml_str("num_nodes = 3\nentry_node = 3").is_err());
    }

    fn arb_blue(n: usize) -> impl Strategy<Value = BlueAction> {
        prop_oneof![
            Just(BlueAction::Scan),
            (0..n).prop_map(BlueAction::Restore),
            (0..n).prop_map(BlueAction::PlaceDecoy),
        ]
    }

    fn arb_case() -> impl Strategy<Value = (EnvConfig, Vec<BlueAction>)> {
        (2usize..8, any::<u64>(), any::<bool>(), any::<bool>(), 0.0..=1.0f64).prop_flat_map(
            |(n, seed, blue_first, until_consumed, p)| {
                let cfg = EnvConfig {
                    num_nodes: n,
                    agent_order: if blue_first { AgentOrder::BlueThenRed } else { AgentOrder::RedThenBlue },
                    action_space: ActionSpace::Extended,
                    decoy_lifetime: if until_consumed {
                        DecoyLifetime::UntilConsumed
                    } else {
                        DecoyLifetime::CurrentStepOnly
                    },
                    red_attack_prob: p,
                    episode_length: 40,
                    rng_seed: seed,
                    ..EnvConfig::default()
                };
                (Just(cfg), prop::collection::vec(arb_blue(n), 1..40))
            },
        )
    }

    proptest! {
        #[test]
        fn traces_follow_turn_order((cfg, actions) in arb_case()) {
            let mut env = Env::new(cfg.clone()).unwrap();
            for a in actions {
                let current_step_only = cfg.decoy_lifetime == DecoyLifetime::CurrentStepOnly;
                if current_step_only {
                    prop_assert!(env.state().decoy_present.iter().all(|d| !d));
                }
                let out = env.step(a).unwrap();
                let actors: Vec<_> = out.trace.snapshots.iter().map(Snapshot::actor).collect();
                prop_assert_eq!(actors, cfg.agent_order.turns().to_vec());
                for i in 0..cfg.num_nodes {
                    let any = out.trace.snapshots.iter().any(|s| s.compromised[i]);
                    prop_assert_eq!(out.trace.compromised_union[i], any);
                }
                prop_assert_eq!(out.trace.end_of_step(), env.state().compromised.as_slice());
                let known = out.observation.known_compromised();
                for (k, c) in known.iter().zip(&env.state().compromised) {
                    prop_assert_eq!(*k > 0.5, *c);
                }
            }
        }

        #[test]
        fn identical_configs_are_deterministic((cfg, actions) in arb_case()) {
            let mut a = Env::new(cfg.clone()).unwrap();
            let mut b = Env::new(cfg).unwrap();
            for act in actions {
                prop_assert_eq!(a.step(act).unwrap(), b.step(act).unwrap());
            }
        }

        #[test]
        fn unopposed_attacker_walks_the_chain(n in 2usize..12, steps in 1usize..30, seed in any::<u64>()) {
            let cfg = EnvConfig { num_nodes: n, red_attack_prob: 1.0, rng_seed: seed, ..EnvConfig::default() };
            let mut env = Env::new(cfg).unwrap();
            for k in 1..=steps {
                env.step(BlueAction::Scan).unwrap();
                let expected: Vec<bool> = (0..n).map(|i| i < k.min(n)).collect();
                prop_assert_eq!(&env.state().compromised, &expected);
            }
        }

        #[test]
        fn restore_entry_contains_attacker(n in 2usize..30, seed in any::<u64>()) {
            let cfg = EnvConfig { num_nodes: n, rng_seed: seed, ..EnvConfig::default() };
            let oracle = OraclePolicy::new(OraclePolicyKind::RestoreEntry, &cfg).unwrap();
            let mut env = Env::new(cfg).unwrap();
            let mut obs = env.observation();
            for _ in 0..100 {
                let out = env.step(oracle.select_action(&obs)).unwrap();
                let hit: Vec<usize> = (0..n).filter(|&i| out.trace.compromised_union[i]).collect();
                prop_assert!(hit.is_empty() || hit == vec![0]);
                obs = out.observation;
            }
        }
    }
}
