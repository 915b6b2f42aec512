//! Train one policy and print its curve and greedy evaluation.
//!
//! `cargo run --release -p cybergym-core --example train_one -- <nodes> <reward> <timesteps> <seed>`

use std::env::args;
use std::time::Instant;

use cybergym::ppo::{evaluate_policy, train, PpoConfig};
use cybergym::seed::{derive_seed, stream};
use cybergym::{EnvConfig, RewardFunctionKind};

fn main() {
    let a: Vec<String> = args().collect();
    let nodes: usize = a.get(1).map_or(2, |s| s.parse().unwrap());
    let reward: RewardFunctionKind = a.get(2).map_or(Ok(RewardFunctionKind::SparsePositive), |s| s.parse()).unwrap();
    let steps: u64 = a.get(3).map_or(200_000, |s| s.parse().unwrap());
    let seed: u64 = a.get(4).map_or(0, |s| s.parse().unwrap());

    let env = EnvConfig { num_nodes: nodes, reward_function: reward, rng_seed: seed, ..EnvConfig::default() };
    let ppo = PpoConfig { total_timesteps: steps, seed, ..PpoConfig::default() };
    let start = Instant::now();
    let out = train(&env, &ppo).expect("training failed");
    for p in &out.curve.points {
        println!("{:>8} reward {:>9.3} ground-truth {:>7.3}", p.timestep, p.mean_episodic_reward, p.mean_ground_truth);
    }
    let eval_env = EnvConfig { rng_seed: derive_seed(seed, stream::EVAL), ..env };
    let summary = evaluate_policy(&out.params, &eval_env, 1000, true).unwrap();
    println!("trained in {:.1?}; greedy ground truth {:.4} ± {:.4}", start.elapsed(), summary.ground_truth_mean, summary.ground_truth_se);
}
