//! Report rendering.
//!
//! * `csv`: one row per cell with columns
//!   `nodes,reward,order,action_space,eval_score_mean,eval_score_se,dv,window,n_seeds,n_diverged`.
//!   Missing DV values are empty.
//! * `markdown-table`: one table per action space; agent orders are row
//!   groups, reward functions are column groups of (eval score, DV × 10³).
//! * `plot-data`: one `curve_<cell>.csv` per cell with
//!   `iteration,mean_episodic_reward,mean_eval_score`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cybergym::{ActionSpace, AgentOrder, RewardFunctionKind};
use thiserror::Error;

use crate::aggregate::CellSummary;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report: no cell summaries")]
    EmptySummaries,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    MarkdownTable,
    PlotData,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown-table" | "markdown" | "md" => Ok(Self::MarkdownTable),
            "plot-data" => Ok(Self::PlotData),
            other => Err(format!("unknown report format '{other}' (csv, markdown-table, plot-data)")),
        }
    }
}

pub const CSV_HEADER: &str = "nodes,reward,order,action_space,eval_score_mean,eval_score_se,dv,window,n_seeds,n_diverged";

pub fn render_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in summaries {
        let dv = s.dv.map(|v| format!("{v:.9}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},{},{},{}",
            s.key.nodes,
            s.key.reward,
            s.key.order,
            s.key.space,
            s.eval_score_mean,
            s.eval_score_se,
            dv,
            s.window,
            s.n_seeds,
            s.n_diverged
        )
        .unwrap();
    }
    out
}

fn title(kind: RewardFunctionKind) -> &'static str {
    match kind {
        RewardFunctionKind::SparsePositive => "Sparse Positive",
        RewardFunctionKind::SparseNegative => "Sparse Negative",
        RewardFunctionKind::Dense => "Dense",
    }
}

fn order_title(order: AgentOrder) -> &'static str {
    match order {
        AgentOrder::RedThenBlue => "Red then Blue",
        AgentOrder::BlueThenRed => "Blue then Red",
    }
}

fn present<T: Ord + Copy>(summaries: &[CellSummary], f: impl Fn(&CellSummary) -> T) -> Vec<T> {
    let mut v: Vec<T> = summaries.iter().map(f).collect();
    v.sort();
    v.dedup();
    v
}

pub fn render_markdown(summaries: &[CellSummary]) -> String {
    let rewards = present(summaries, |s| s.key.reward);
    let mut out = String::new();
    for space in present(summaries, |s| s.key.space) {
        let space_name = match space {
            ActionSpace::Basic => "Basic",
            ActionSpace::Extended => "Extended",
        };
        writeln!(out, "### Action space: {space_name}\n").unwrap();
        let mut header = String::from("| Agent Order | Network Size |");
        let mut rule = String::from("|---|---:|");
        for &r in &rewards {
            write!(header, " {} Eval Score | {} DV (e-3) |", title(r), title(r)).unwrap();
            rule.push_str("---:|---:|");
        }
        writeln!(out, "{header}\n{rule}").unwrap();
        let in_space: Vec<&CellSummary> = summaries.iter().filter(|s| s.key.space == space).collect();
        for order in present(summaries, |s| s.key.order) {
            let sizes = {
                let mut v: Vec<usize> = in_space.iter().filter(|s| s.key.order == order).map(|s| s.key.nodes).collect();
                v.sort();
                v.dedup();
                v
            };
            for (i, nodes) in sizes.into_iter().enumerate() {
                let label = if i == 0 { order_title(order) } else { "" };
                let mut row = format!("| {label} | {nodes} |");
                for &r in &rewards {
                    match in_space.iter().find(|s| s.key.order == order && s.key.nodes == nodes && s.key.reward == r) {
                        Some(s) => {
                            let dv = s.dv.map_or("n/a".to_string(), |v| format!("{:.2}", v * 1e3));
                            write!(row, " {:.2} | {dv} |", s.eval_score_mean).unwrap();
                        }
                        None => row.push_str(" – | – |"),
                    }
                }
                writeln!(out, "{row}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_curve(summary: &CellSummary) -> String {
    let mut out = String::from("iteration,mean_episodic_reward,mean_eval_score\n");
    for p in &summary.mean_curve {
        writeln!(out, "{},{},{}", p.iteration, p.mean_episodic_reward, p.mean_ground_truth).unwrap();
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes a report. For `csv` and `markdown-table`, `out` is the file path;
/// for `plot-data` it is a directory. Returns the files written.
pub fn export_report(summaries: &[CellSummary], format: ReportFormat, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::EmptySummaries);
    }
    match format {
        ReportFormat::Csv => {
            write(out, &render_csv(summaries))?;
            Ok(vec![out.to_path_buf()])
        }
        ReportFormat::MarkdownTable => {
            write(out, &render_markdown(summaries))?;
            Ok(vec![out.to_path_buf()])
        }
        ReportFormat::PlotData => summaries
            .iter()
            .map(|s| {
                let path = out.join(format!("curve_{}.csv", s.key));
                write(&path, &render_curve(s))?;
                Ok(path)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::MeanCurvePoint;
    use crate::record::CellKey;
    use cybergym::metrics::CurveMeaning;

    fn summary(nodes: usize, reward: RewardFunctionKind) -> CellSummary {
        CellSummary {
            key: CellKey { nodes, reward, order: AgentOrder::RedThenBlue, space: ActionSpace::Basic },
            eval_score_mean: -0.9,
            eval_score_se: 0.001,
            episodic_reward_mean: 99.0,
            dv: Some(0.0),
            window: 30,
            dv_curve: CurveMeaning::MeanGroundTruthScore,
            n_seeds: 25,
            n_diverged: 0,
            mean_curve: (0..4)
                .map(|i| MeanCurvePoint { iteration: i, mean_episodic_reward: i as f64, mean_ground_truth: -1.0 })
                .collect(),
        }
    }

    fn grid() -> Vec<CellSummary> {
        let mut v = Vec::new();
        for n in [2, 5, 10, 20, 50] {
            for r in RewardFunctionKind::ALL {
                v.push(summary(n, r));
            }
        }
        v
    }

    #[test]
    fn markdown_layout() {
        let md = render_markdown(&grid());
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
        // header + rule + 5 data rows
        assert_eq!(rows.len(), 7);
        let data = rows[2];
        let cells: Vec<&str> = data.trim_matches('|').split('|').map(str::trim).collect();
        assert_eq!(cells.len(), 2 + 6);
        assert_eq!(cells[0], "Red then Blue");
        assert_eq!(cells[2], "-0.90");
        assert_eq!(rows[3].split('|').nth(1).unwrap().trim(), "");
    }

    #[test]
    fn csv_rows() {
        let csv = render_csv(&grid()[..2]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "2,sparse-positive,red-then-blue,basic,-0.900000,0.001000,0.000000000,30,25,0");
    }

    #[test]
    fn empty_summaries_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(matches!(export_report(&[], ReportFormat::Csv, &path), Err(ReportError::EmptySummaries)));
        assert!(!path.exists());
    }

    #[test]
    fn plot_data_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_report(&grid()[..1], ReportFormat::PlotData, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(files[0].ends_with("curve_n2_sparse-positive_red-then-blue_basic.csv"));
    }
}
