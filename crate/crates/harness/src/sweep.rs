use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use cybergym::ppo::{evaluate_policy, train, PolicyParams, PpoError, TrainingCurve};
use cybergym::seed::{derive_seed, stream};
use rayon::prelude::*;
use thiserror::Error;

use crate::record::{config_hash, record_path, RunRecord, RunStatus};
use crate::spec::{RunJob, SweepSpec};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("run {seed} in {cell}: {source}")]
    Run { cell: String, seed: u64, source: PpoError },
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Overrides `parallel_workers` from the spec when set.
    pub workers: Option<usize>,
    /// Skip runs whose record already exists with a matching config hash.
    pub resume: bool,
    pub verbose: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { workers: None, resume: true, verbose: false }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// One record per job, in grid order.
    pub records: Vec<RunRecord>,
    /// How many runs were trained (rather than loaded) by this call.
    pub executed: usize,
}

/// The seed of the environment a run's final policy is evaluated in. It
/// depends only on the run seed, so all reward functions and policies of one
/// seed face the same attack rolls.
pub fn evaluation_seed(seed: u64) -> u64 {
    derive_seed(seed, stream::EVAL)
}

/// Trains and evaluates one run. Divergence is captured in the record;
/// configuration problems are errors.
pub fn run_job(job: &RunJob) -> Result<RunRecord, PpoError> {
    run_job_with_policy(job).map(|(record, _)| record)
}

/// [`run_job`], also returning the trained parameters of a completed run.
pub fn run_job_with_policy(job: &RunJob) -> Result<(RunRecord, Option<PolicyParams>), PpoError> {
    let start = Instant::now();
    let (status, curve, evaluation, error, params) = match train(&job.env, &job.ppo) {
        Ok(outcome) => {
            let eval_env = cybergym::EnvConfig { rng_seed: evaluation_seed(job.seed), ..job.env.clone() };
            let summary = evaluate_policy(&outcome.params, &eval_env, job.eval_episodes, true)?;
            (RunStatus::Completed, outcome.curve, Some(summary), None, Some(outcome.params))
        }
        Err(e @ PpoError::NonFiniteLoss { .. }) => {
            (RunStatus::Diverged, TrainingCurve::default(), None, Some(e.to_string()), None)
        }
        Err(e) => return Err(e),
    };
    let record = RunRecord {
        config_hash: config_hash(job),
        env: job.env.clone(),
        ppo: job.ppo.clone(),
        seed: job.seed,
        eval_episodes: job.eval_episodes,
        status,
        curve,
        evaluation,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        error,
    };
    Ok((record, params))
}

fn existing_record(root: &Path, job: &RunJob) -> Option<RunRecord> {
    let record = RunRecord::load(&record_path(root, job)).ok()?;
    (record.config_hash == config_hash(job)).then_some(record)
}

/// Runs every job of `spec` on a worker pool, persisting each record under
/// `records_dir` as soon as it finishes. Results do not depend on the number
/// of workers or on completion order.
pub fn run_sweep(spec: &SweepSpec, records_dir: &Path, options: &SweepOptions) -> Result<SweepOutcome, SweepError> {
    let jobs = spec.jobs();
    let workers = options.workers.unwrap_or_else(|| spec.workers()).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let executed = AtomicUsize::new(0);
    let finished = AtomicUsize::new(0);
    let total = jobs.len();

    let records = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                if options.resume {
                    if let Some(record) = existing_record(records_dir, job) {
                        finished.fetch_add(1, Ordering::Relaxed);
                        return Ok(record);
                    }
                }
                let record = run_job(job).map_err(|source| SweepError::Run {
                    cell: crate::record::CellKey::of(&job.env).to_string(),
                    seed: job.seed,
                    source,
                })?;
                record
                    .save(records_dir)
                    .map_err(|source| SweepError::Io { path: record.path_in(records_dir), source })?;
                executed.fetch_add(1, Ordering::Relaxed);
                let done = finished.fetch_add(1, Ordering::Relaxed) + 1;
                if options.verbose {
                    let score = record.evaluation.as_ref().map_or(f64::NAN, |e| e.ground_truth_mean);
                    eprintln!(
                        "[{done}/{total}] {} seed {} {:?} ground truth {score:.3} ({:.1}s)",
                        record.cell(),
                        record.seed,
                        record.status,
                        record.wall_clock_secs
                    );
                }
                Ok(record)
            })
            .collect::<Result<Vec<_>, SweepError>>()
    })?;

    Ok(SweepOutcome { records, executed: executed.into_inner() })
}
