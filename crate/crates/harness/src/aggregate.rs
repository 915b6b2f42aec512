//! Cross-seed aggregation of run records into per-cell summaries.

use std::collections::BTreeMap;

use cybergym::metrics::{dispersion_variability, mean_and_se, CurveMeaning};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{CellKey, RunRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("cell {cell}: records disagree on environment semantics ({detail})")]
    MixedConfig { cell: String, detail: String },
    #[error("cell {cell}: seed {seed} appears more than once")]
    DuplicateSeed { cell: String, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCurvePoint {
    pub iteration: usize,
    pub mean_episodic_reward: f64,
    pub mean_ground_truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: CellKey,
    /// Mean over completed seeds of each seed's mean evaluation score.
    pub eval_score_mean: f64,
    /// Standard error of that mean across seeds.
    pub eval_score_se: f64,
    pub episodic_reward_mean: f64,
    /// DV of the cross-seed mean curve; `None` when the curve is too short.
    pub dv: Option<f64>,
    pub window: usize,
    pub dv_curve: CurveMeaning,
    pub n_seeds: usize,
    pub n_diverged: usize,
    pub mean_curve: Vec<MeanCurvePoint>,
}

fn semantics(r: &RunRecord) -> String {
    let e = &r.env;
    format!(
        "entry_node={} episode_length={} red_attack_prob={} detection_prob={} decoy_lifetime={} red_target_mode={}",
        e.entry_node,
        e.episode_length,
        e.red_attack_prob,
        e.detection_prob,
        e.decoy_lifetime,
        e.red_target_mode.name()
    )
}

/// Pointwise mean over seeds, truncated to the shortest curve.
fn mean_curve(runs: &[&RunRecord]) -> Vec<MeanCurvePoint> {
    let len = runs.iter().map(|r| r.curve.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let n = runs.len() as f64;
            let reward = runs.iter().map(|r| r.curve.points[i].mean_episodic_reward).sum::<f64>() / n;
            let truth = runs.iter().map(|r| r.curve.points[i].mean_ground_truth).sum::<f64>() / n;
            MeanCurvePoint { iteration: i, mean_episodic_reward: reward, mean_ground_truth: truth }
        })
        .collect()
}

/// Groups records by cell and summarises each one. Output is sorted by cell
/// key and does not depend on the order of `records`.
pub fn aggregate(
    records: &[RunRecord],
    window: usize,
    dv_curve: CurveMeaning,
) -> Result<Vec<CellSummary>, AggregateError> {
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry(r.cell()).or_default().push(r);
    }

    let mut summaries = Vec::with_capacity(cells.len());
    for (key, mut runs) in cells {
        runs.sort_by_key(|r| r.seed);
        if let Some(pair) = runs.windows(2).find(|w| w[0].seed == w[1].seed) {
            return Err(AggregateError::DuplicateSeed { cell: key.to_string(), seed: pair[0].seed });
        }
        let reference = semantics(runs[0]);
        if let Some(other) = runs.iter().map(|r| semantics(r)).find(|s| *s != reference) {
            return Err(AggregateError::MixedConfig {
                cell: key.to_string(),
                detail: format!("{reference} vs {other}"),
            });
        }

        let completed: Vec<&RunRecord> = runs
            .iter()
            .copied()
            .filter(|r| r.is_completed() && r.evaluation.is_some())
            .collect();
        let scores: Vec<f64> = completed.iter().filter_map(|r| r.evaluation.as_ref()).map(|e| e.ground_truth_mean).collect();
        let returns: Vec<f64> = completed.iter().filter_map(|r| r.evaluation.as_ref()).map(|e| e.episodic_reward_mean).collect();
        let (eval_score_mean, eval_score_se) = mean_and_se(&scores);
        let (episodic_reward_mean, _) = mean_and_se(&returns);

        let curve = mean_curve(&completed);
        let series: Vec<f64> = match dv_curve {
            CurveMeaning::MeanGroundTruthScore => curve.iter().map(|p| p.mean_ground_truth).collect(),
            CurveMeaning::MeanEpisodicReward => curve.iter().map(|p| p.mean_episodic_reward).collect(),
        };
        let dv = dispersion_variability(&series, window).ok();

        summaries.push(CellSummary {
            key,
            eval_score_mean,
            eval_score_se,
            episodic_reward_mean,
            dv,
            window,
            dv_curve,
            n_seeds: completed.len(),
            n_diverged: runs.len() - completed.len(),
            mean_curve: curve,
        });
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::RunStatus;
    use cybergym::evaluation::{EvaluationSummary, RewardBreakdown};
    use cybergym::ppo::{CurvePoint, PpoConfig, TrainingCurve};
    use cybergym::EnvConfig;

    pub(crate) fn fake_record(seed: u64, score: f64, curve: &[f64]) -> RunRecord {
        RunRecord {
            config_hash: String::new(),
            env: EnvConfig { rng_seed: seed, ..EnvConfig::default() },
            ppo: PpoConfig { seed, ..PpoConfig::default() },
            seed,
            eval_episodes: 10,
            status: RunStatus::Completed,
            curve: TrainingCurve {
                points: curve
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| CurvePoint {
                        timestep: (i as u64 + 1) * 100,
                        episodes: 1,
                        mean_episodic_reward: v * 10.0,
                        mean_ground_truth: v,
                    })
                    .collect(),
            },
            evaluation: Some(EvaluationSummary {
                episodes: 10,
                ground_truth_mean: score,
                ground_truth_se: 0.0,
                episodic_reward_mean: 0.0,
                episodic_reward_se: 0.0,
                step_rewards: RewardBreakdown::default(),
            }),
            wall_clock_secs: 1.0,
            error: None,
        }
    }

    #[test]
    fn cell_mean_of_means() {
        let recs: Vec<_> = (0..3).map(|s| fake_record(s, -0.9, &[0.0, 1.0, 2.0])).collect();
        let out = aggregate(&recs, 30, CurveMeaning::MeanGroundTruthScore).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].eval_score_mean + 0.9).abs() < 1e-12);
        assert_eq!(out[0].n_seeds, 3);
        assert_eq!(out[0].dv, Some(0.0));
    }

    #[test]
    fn opposite_curves_average_flat() {
        let recs = vec![fake_record(0, -1.0, &[1.0, 2.0, 3.0]), fake_record(1, -1.0, &[3.0, 2.0, 1.0])];
        let out = aggregate(&recs, 30, CurveMeaning::MeanGroundTruthScore).unwrap();
        let curve: Vec<f64> = out[0].mean_curve.iter().map(|p| p.mean_ground_truth).collect();
        assert_eq!(curve, vec![2.0, 2.0, 2.0]);
        assert_eq!(out[0].dv, Some(0.0));
    }

    #[test]
    fn diverged_runs_are_counted_not_averaged() {
        let mut bad = fake_record(2, -50.0, &[9.0, -9.0, 9.0]);
        bad.status = RunStatus::Diverged;
        bad.evaluation = None;
        let recs = vec![fake_record(0, -1.0, &[1.0, 1.0, 1.0]), fake_record(1, -2.0, &[1.0, 1.0, 1.0]), bad];
        let out = aggregate(&recs, 30, CurveMeaning::MeanGroundTruthScore).unwrap();
        assert_eq!(out[0].n_seeds, 2);
        assert_eq!(out[0].n_diverged, 1);
        assert!((out[0].eval_score_mean + 1.5).abs() < 1e-12);
        assert_eq!(out[0].dv, Some(0.0));
    }

    #[test]
    fn mixed_semantics_rejected() {
        let mut other = fake_record(1, -1.0, &[1.0, 1.0, 1.0]);
        other.env.red_attack_prob = 0.5;
        let recs = vec![fake_record(0, -1.0, &[1.0, 1.0, 1.0]), other];
        assert!(matches!(
            aggregate(&recs, 30, CurveMeaning::MeanGroundTruthScore),
            Err(AggregateError::MixedConfig { .. })
        ));
        let dup = vec![fake_record(0, -1.0, &[1.0]), fake_record(0, -1.0, &[1.0])];
        assert!(matches!(
            aggregate(&dup, 30, CurveMeaning::MeanGroundTruthScore),
            Err(AggregateError::DuplicateSeed { .. })
        ));
    }

    #[test]
    fn order_of_records_does_not_matter() {
        let mut recs: Vec<_> = (0..7)
            .map(|s| {
                let curve: Vec<f64> = (0..40).map(|t| ((s * 31 + t * 17) % 11) as f64 * 0.1 - s as f64).collect();
                fake_record(s, -0.1 * s as f64 - 0.37, &curve)
            })
            .collect();
        let mut dense = fake_record(3, -4.0, &[1.0, 0.5, 0.25, 0.0]);
        dense.env.reward_function = cybergym::RewardFunctionKind::Dense;
        recs.push(dense);
        let forward = aggregate(&recs, 5, CurveMeaning::MeanGroundTruthScore).unwrap();
        recs.reverse();
        recs.swap(1, 4);
        assert_eq!(aggregate(&recs, 5, CurveMeaning::MeanGroundTruthScore).unwrap(), forward);
        assert_eq!(forward.len(), 2);
    }
}
