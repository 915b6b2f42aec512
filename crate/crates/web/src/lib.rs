//! Browser bindings for the cybergym demo page.
//!
//! Every exported function returns a JSON string. The `*_json` functions do
//! the work and are plain Rust so they can be tested natively.

use cybergym::env::Actor;
use cybergym::evaluation::run_episode;
use cybergym::metrics::{detrend_differences, dispersion_variability, iqr, step_ground_truth_penalty};
use cybergym::{
    evaluate_blue_policy, ActionSpace, AgentOrder, Env, EnvConfig, OraclePolicy, OraclePolicyKind, RewardFunctionKind,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct StepView {
    step: usize,
    turns: Vec<TurnView>,
    union: Vec<bool>,
    ground_truth_penalty: f64,
    rewards: [f64; 3],
}

#[derive(Serialize)]
struct TurnView {
    actor: String,
    action: String,
    compromised: Vec<bool>,
}

#[derive(Serialize)]
struct EpisodeView {
    num_nodes: usize,
    ground_truth_score: f64,
    episodic_rewards: [f64; 3],
    steps: Vec<StepView>,
}

#[derive(Serialize)]
struct PolicyScore {
    policy: String,
    ground_truth_mean: Option<f64>,
    ground_truth_se: Option<f64>,
    step_rewards: Option<[f64; 3]>,
    error: Option<String>,
}

#[derive(Serialize)]
struct DispersionView {
    dv: f64,
    window: usize,
    differences: Vec<f64>,
    window_iqrs: Vec<f64>,
}

fn parse<T: std::str::FromStr>(what: &str, text: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e| format!("{what}: {e}"))
}

fn env_config(nodes: usize, order: &str, action_space: &str, attack_prob: f64, seed: u64) -> Result<EnvConfig, String> {
    let config = EnvConfig {
        agent_order: parse::<AgentOrder>("order", order)?,
        action_space: parse::<ActionSpace>("action space", action_space)?,
        red_attack_prob: attack_prob,
        rng_seed: seed,
        ..EnvConfig::with_nodes(nodes)
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn rewards_of(end_of_step: &[bool]) -> [f64; 3] {
    RewardFunctionKind::ALL.map(|k| k.reward(end_of_step))
}

/// One episode under a scripted blue policy, every intermediate state included.
pub fn simulate_episode_json(
    nodes: usize,
    order: &str,
    action_space: &str,
    policy: &str,
    attack_prob: f64,
    seed: u64,
) -> Result<String, String> {
    let config = env_config(nodes, order, action_space, attack_prob, seed)?;
    let kind = parse::<OraclePolicyKind>("policy", policy)?;
    let mut oracle = OraclePolicy::new(kind, &config).map_err(|e| e.to_string())?;
    let mut env = Env::new(config).map_err(|e| e.to_string())?;
    env.reset(None);
    let (eval, traces) = run_episode(&mut env, &mut oracle).map_err(|e| e.to_string())?;
    let mut episodic_rewards = [0.0; 3];
    let steps = traces
        .iter()
        .map(|t| {
            let rewards = rewards_of(t.end_of_step());
            episodic_rewards.iter_mut().zip(rewards).for_each(|(a, r)| *a += r);
            StepView {
                step: t.step_index,
                turns: t
                    .snapshots
                    .iter()
                    .map(|s| TurnView {
                        actor: match s.actor() {
                            Actor::Red => "red",
                            Actor::Blue => "blue",
                        }
                        .to_string(),
                        action: s.action.to_string(),
                        compromised: s.compromised.clone(),
                    })
                    .collect(),
                union: t.compromised_union.clone(),
                ground_truth_penalty: step_ground_truth_penalty(t),
                rewards,
            }
        })
        .collect();
    let view = EpisodeView { num_nodes: nodes, ground_truth_score: eval.ground_truth_score, episodic_rewards, steps };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Ground truth and mean per-step rewards of every scripted policy.
pub fn score_policies_json(
    nodes: usize,
    order: &str,
    action_space: &str,
    attack_prob: f64,
    episodes: usize,
    seed: u64,
) -> Result<String, String> {
    let config = env_config(nodes, order, action_space, attack_prob, seed)?;
    let scores: Vec<PolicyScore> = OraclePolicyKind::ALL
        .iter()
        .map(|&kind| {
            let outcome = OraclePolicy::new(kind, &config)
                .map_err(|e| e.to_string())
                .and_then(|mut p| evaluate_blue_policy(&mut p, &config, episodes).map_err(|e| e.to_string()));
            match outcome {
                Ok(s) => PolicyScore {
                    policy: kind.to_string(),
                    ground_truth_mean: Some(s.ground_truth_mean),
                    ground_truth_se: Some(s.ground_truth_se),
                    step_rewards: Some(RewardFunctionKind::ALL.map(|k| s.step_rewards.get(k))),
                    error: None,
                },
                Err(e) => PolicyScore {
                    policy: kind.to_string(),
                    ground_truth_mean: None,
                    ground_truth_se: None,
                    step_rewards: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    serde_json::to_string(&scores).map_err(|e| e.to_string())
}

/// Dispersion variability of a curve given as comma- or whitespace-separated
/// numbers.
pub fn dispersion_json(curve: &str, window: usize) -> Result<String, String> {
    let values = curve
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let dv = dispersion_variability(&values, window).map_err(|e| e.to_string())?;
    let differences = detrend_differences(&values).map_err(|e| e.to_string())?;
    let used = window.min(differences.len());
    let window_iqrs = differences.windows(used).map(|w| iqr(w).expect("window >= 2")).collect();
    serde_json::to_string(&DispersionView { dv, window: used, differences, window_iqrs }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate_episode(
    nodes: usize,
    order: &str,
    action_space: &str,
    policy: &str,
    attack_prob: f64,
    seed: u64,
) -> Result<String, JsError> {
    simulate_episode_json(nodes, order, action_space, policy, attack_prob, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score_policies(
    nodes: usize,
    order: &str,
    action_space: &str,
    attack_prob: f64,
    episodes: usize,
    seed: u64,
) -> Result<String, JsError> {
    score_policies_json(nodes, order, action_space, attack_prob, episodes, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dispersion(curve: &str, window: usize) -> Result<String, JsError> {
    dispersion_json(curve, window).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn episode_view_has_every_turn() {
        let json = simulate_episode_json(4, "red-then-blue", "basic", "restore-entry", 0.9, 3).unwrap();
        let v: Value = serde_json::from_str(&json).unwrap();
        let steps = v["steps"].as_array().unwrap();
        assert_eq!(steps.len(), 100);
        assert_eq!(steps[0]["turns"].as_array().unwrap().len(), 2);
        assert_eq!(steps[0]["turns"][0]["actor"], "red");
        // Restoring the entry every step leaves nothing compromised at step end.
        assert!(steps.iter().all(|s| s["rewards"][2] == 0.0));
        let penalties: f64 = steps.iter().map(|s| s["ground_truth_penalty"].as_f64().unwrap()).sum();
        assert_eq!(v["ground_truth_score"].as_f64().unwrap(), penalties / 100.0);
        assert_eq!(json, simulate_episode_json(4, "red-then-blue", "basic", "restore-entry", 0.9, 3).unwrap());
    }

    #[test]
    fn scores_cover_all_policies() {
        let v: Value = serde_json::from_str(&score_policies_json(3, "blue-then-red", "basic", 0.9, 20, 1).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        let decoy = rows.iter().find(|r| r["policy"] == "decoy-entry").unwrap();
        assert!(decoy["error"].is_string());
        let restore = rows.iter().find(|r| r["policy"] == "restore-entry").unwrap();
        assert!(restore["ground_truth_mean"].as_f64().unwrap() < 0.0);
    }

    #[test]
    fn dispersion_of_a_line_is_zero() {
        let v: Value = serde_json::from_str(&dispersion_json("1, 2, 3, 4, 5 6", 30).unwrap()).unwrap();
        assert_eq!(v["dv"], 0.0);
        assert_eq!(v["window"], 5);
        assert!(dispersion_json("1, x", 3).is_err());
        assert!(dispersion_json("1 2", 3).is_err());
        assert!(simulate_episode_json(1, "red-then-blue", "basic", "noop", 0.9, 0).is_err());
        assert!(simulate_episode_json(3, "sideways", "basic", "noop", 0.9, 0).is_err());
    }
}
