//! Experiment orchestration for cybergym: expand a grid of
//! (network size, reward function, agent order, action space, seed) runs,
//! train and evaluate each one on a worker pool, persist one record per run,
//! aggregate records into per-cell summaries and render reports.

pub mod aggregate;
pub mod oracle;
pub mod record;
pub mod report;
pub mod spec;
pub mod sweep;

pub use aggregate::{aggregate, AggregateError, CellSummary};
pub use record::{CellKey, RunRecord, RunStatus};
pub use report::{export_report, ReportFormat};
pub use spec::{RunJob, SweepSpec};
pub use sweep::{run_job, run_sweep, SweepOptions, SweepOutcome};
