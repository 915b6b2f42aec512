//! Persisted run records: one JSON file per (config, seed), grouped into one
//! directory per grid cell.
//!
//! ```text
//! <records>/n5_sparse-positive_red-then-blue_basic/seed_3.json
//! ```

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cybergym::ppo::{PpoConfig, TrainingCurve};
use cybergym::{ActionSpace, AgentOrder, EnvConfig, EvaluationSummary, RewardFunctionKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::RunJob;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub nodes: usize,
    pub reward: RewardFunctionKind,
    pub order: AgentOrder,
    pub space: ActionSpace,
}

impl CellKey {
    pub fn of(env: &EnvConfig) -> Self {
        Self {
            nodes: env.num_nodes,
            reward: env.reward_function,
            order: env.agent_order,
            space: env.action_space,
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}_{}_{}_{}", self.nodes, self.reward, self.order, self.space)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub seed: u64,
    pub eval_episodes: usize,
    pub status: RunStatus,
    pub curve: TrainingCurve,
    pub evaluation: Option<EvaluationSummary>,
    pub wall_clock_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn cell(&self) -> CellKey {
        CellKey::of(&self.env)
    }

    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn file_name(seed: u64) -> String {
        format!("seed_{seed}.json")
    }

    pub fn path_in(&self, root: &Path) -> PathBuf {
        root.join(self.cell().to_string()).join(Self::file_name(self.seed))
    }

    /// Writes via a temporary file and rename so readers never see a
    /// half-written record.
    pub fn save(&self, root: &Path) -> io::Result<PathBuf> {
        let path = self.path_in(root);
        let dir = path.parent().expect("record path has a cell directory");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.tmp", Self::file_name(self.seed)));
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
    }
}

/// SHA-256 (first 16 hex digits) of everything that determines a run's
/// outcome.
pub fn config_hash(job: &RunJob) -> String {
    let canonical = serde_json::to_vec(job).expect("run jobs serialise");
    let digest = Sha256::digest(&canonical);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn record_path(root: &Path, job: &RunJob) -> PathBuf {
    root.join(CellKey::of(&job.env).to_string()).join(RunRecord::file_name(job.seed))
}

/// Every `*.json` record under `root`, sorted by path.
pub fn load_records(root: &Path) -> io::Result<Vec<RunRecord>> {
    let mut paths = Vec::new();
    for cell in fs::read_dir(root)? {
        let cell = cell?.path();
        if !cell.is_dir() {
            continue;
        }
        for entry in fs::read_dir(&cell)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
    }
    paths.sort();
    paths.iter().map(|p| RunRecord::load(p)).collect()
}
