//! Ground-truth scoring and training-reliability metrics.
//!
//! The ground-truth penalty of a step counts every node that was compromised
//! in *any* post-action snapshot of that step, so a compromise that blue
//! cleans up before the step ends still costs the defender. The episode score
//! is the mean of that penalty over steps.
//!
//! Dispersion variability (DV) measures high-frequency instability of a
//! training curve: the curve is de-trended by first differences, the
//! inter-quartile range is taken in sliding windows, and the window IQRs are
//! averaged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::StepTrace;

/// Default DV window, in curve points.
pub const DEFAULT_DV_WINDOW: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("episode has no steps")]
    EmptyEpisode,
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("DV window must be >= 2, got {0}")]
    BadWindow(usize),
}

pub fn step_ground_truth_penalty(trace: &StepTrace) -> f64 {
    0.0 - trace.compromised_union.iter().filter(|&&c| c).count() as f64
}

pub fn episode_ground_truth_score(traces: &[StepTrace]) -> Result<f64, MetricsError> {
    if traces.is_empty() {
        return Err(MetricsError::EmptyEpisode);
    }
    Ok(traces.iter().map(step_ground_truth_penalty).sum::<f64>() / traces.len() as f64)
}

/// Per-episode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvaluation {
    /// Mean per-step ground-truth penalty, in `[-n, 0]`.
    pub ground_truth_score: f64,
    /// Sum of the training rewards over the episode.
    pub episodic_reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMeaning {
    MeanEpisodicReward,
    MeanGroundTruthScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub meaning: CurveMeaning,
    pub values: Vec<f64>,
}

impl CurveSeries {
    pub fn new(meaning: CurveMeaning, values: Vec<f64>) -> Self {
        Self { meaning, values }
    }

    pub fn dispersion_variability(&self, window: usize) -> Result<f64, MetricsError> {
        dispersion_variability(&self.values, window)
    }
}

/// First differences `y[t+1] - y[t]`.
pub fn detrend_differences(curve: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if curve.len() < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: curve.len() });
    }
    Ok(curve.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Quantile of already-sorted data by linear interpolation between order
/// statistics at position `(n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn iqr(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooShort { needed: 2, got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25))
}

/// Mean sliding-window IQR (stride 1) of the first-differenced curve.
///
/// A window wider than the differenced series collapses to one global IQR.
pub fn dispersion_variability(curve: &[f64], window: usize) -> Result<f64, MetricsError> {
    if window < 2 {
        return Err(MetricsError::BadWindow(window));
    }
    if curve.len() < 3 {
        return Err(MetricsError::TooShort { needed: 3, got: curve.len() });
    }
    let diffs = detrend_differences(curve)?;
    let window = window.min(diffs.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in diffs.windows(window) {
        total += iqr(chunk)?;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BlueAction, RedAction, Snapshot, TurnAction};
    use proptest::prelude::*;

    fn trace_with_union(union: Vec<bool>) -> StepTrace {
        StepTrace::new(
            1,
            vec![
                Snapshot { action: TurnAction::Red(RedAction::DoNothing), compromised: union.clone() },
                Snapshot { action: TurnAction::Blue(BlueAction::Scan), compromised: union },
            ],
        )
    }

    #[test]
    fn step_penalty_counts_union() {
        assert_eq!(step_ground_truth_penalty(&trace_with_union(vec![false; 4])), 0.0);
        let restored = StepTrace::new(
            1,
            vec![
                Snapshot { action: TurnAction::Red(RedAction::BasicAttack(0)), compromised: vec![true, false] },
                Snapshot { action: TurnAction::Blue(BlueAction::Restore(0)), compromised: vec![false, false] },
            ],
        );
        assert_eq!(step_ground_truth_penalty(&restored), -1.0);
        let many: Vec<bool> = (0..50).map(|i| i < 26).collect();
        assert_eq!(step_ground_truth_penalty(&trace_with_union(many)), -26.0);
    }

    #[test]
    fn episode_scores() {
        let clean: Vec<_> = (0..100).map(|_| trace_with_union(vec![false; 3])).collect();
        assert_eq!(episode_ground_truth_score(&clean), Ok(0.0));
        let contained: Vec<_> = (0..100)
            .map(|i| trace_with_union(vec![i < 90, false, false]))
            .collect();
        assert!((episode_ground_truth_score(&contained).unwrap() + 0.9).abs() < 1e-12);
        let two: Vec<_> = (0..100).map(|_| trace_with_union(vec![true, true, false])).collect();
        assert_eq!(episode_ground_truth_score(&two), Ok(-2.0));
        assert_eq!(episode_ground_truth_score(&[]), Err(MetricsError::EmptyEpisode));
    }

    #[test]
    fn differences() {
        assert_eq!(detrend_differences(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0; 3]);
        assert_eq!(detrend_differences(&[5.0; 6]).unwrap(), vec![0.0; 5]);
        assert_eq!(detrend_differences(&[0.0, 1.0, 0.0, 1.0]).unwrap(), vec![1.0, -1.0, 1.0]);
        assert!(matches!(detrend_differences(&[1.0]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn interpolated_iqr() {
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0]), Ok(1.5));
        assert_eq!(iqr(&[4.0, 3.0, 2.0, 1.0]), Ok(1.5));
        assert_eq!(iqr(&[7.0; 9]), Ok(0.0));
        assert_eq!(iqr(&[0.0, 0.0, 0.0, 10.0]), Ok(2.5));
        assert!(iqr(&[1.0]).is_err());
    }

    #[test]
    fn dv_examples() {
        let linear: Vec<f64> = (0..50).map(|t| 3.0 * t as f64 - 7.0).collect();
        assert_eq!(dispersion_variability(&linear, 10), Ok(0.0));
        let zigzag = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(dispersion_variability(&zigzag, 4), Ok(2.0));
        assert_eq!(dispersion_variability(&zigzag, 1), Err(MetricsError::BadWindow(1)));
        assert!(dispersion_variability(&[1.0, 2.0], 2).is_err());
        // Window wider than the series: single global IQR of the differences.
        assert_eq!(dispersion_variability(&zigzag, 100), iqr(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0]));
    }

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_se(&[4.0]), (4.0, 0.0));
    }

    proptest! {
        #[test]
        fn dv_invariances(
            curve in prop::collection::vec(-10.0..10.0f64, 3..80),
            shift in -100.0..100.0f64,
            slope in -5.0..5.0f64,
            scale in -4.0..4.0f64,
            window in 2usize..40,
        ) {
            let dv = dispersion_variability(&curve, window).unwrap();
            prop_assert!(dv >= 0.0);
            let shifted: Vec<f64> = curve.iter().map(|v| v + shift).collect();
            prop_assert!((dispersion_variability(&shifted, window).unwrap() - dv).abs() < 1e-9);
            let trended: Vec<f64> = curve.iter().enumerate().map(|(t, v)| v + slope * t as f64).collect();
            prop_assert!((dispersion_variability(&trended, window).unwrap() - dv).abs() < 1e-9);
            let scaled: Vec<f64> = curve.iter().map(|v| v * scale).collect();
            prop_assert!((dispersion_variability(&scaled, window).unwrap() - scale.abs() * dv).abs() < 1e-9);
        }

        #[test]
        fn union_dominates_end_of_step(
            red_first in prop::collection::vec(any::<bool>(), 2..12),
            blue_second in prop::collection::vec(any::<bool>(), 2..12),
        ) {
            let n = red_first.len().min(blue_second.len());
            let trace = StepTrace::new(1, vec![
                Snapshot { action: TurnAction::Red(RedAction::DoNothing), compromised: red_first[..n].to_vec() },
                Snapshot { action: TurnAction::Blue(BlueAction::Scan), compromised: blue_second[..n].to_vec() },
            ]);
            let dense = crate::rewards::RewardFunctionKind::Dense.reward(trace.end_of_step());
            prop_assert!(step_ground_truth_penalty(&trace) <= dense);
        }
    }
}
