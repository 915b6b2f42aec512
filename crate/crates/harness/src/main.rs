use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cybergym::metrics::CurveMeaning;
use cybergym::ppo::{checkpoint, evaluate_policy, PpoConfig};
use cybergym::{ActionSpace, AgentOrder, EnvConfig, OraclePolicyKind, RewardFunctionKind};
use cybergym_harness::oracle::{first_episode_traces, run_oracle};
use cybergym_harness::record::load_records;
use cybergym_harness::report::{render_csv, render_markdown};
use cybergym_harness::sweep::{evaluation_seed, run_job_with_policy};
use cybergym_harness::{aggregate, export_report, run_sweep, ReportFormat, RunJob, SweepOptions, SweepSpec};

#[derive(Parser)]
#[command(name = "cybergym", version, about = "Sparse vs dense reward experiments on a linear-network cyber defence gym")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate a single PPO run.
    Train(TrainArgs),
    /// Evaluate a saved policy checkpoint.
    Evaluate(EvaluateArgs),
    /// Run a grid of training runs from a spec file.
    Sweep(SweepArgs),
    /// Aggregate run records into a report.
    Report(ReportArgs),
    /// Score a scripted blue baseline by ground truth.
    Oracle(OracleArgs),
}

/// Environment selection shared by several subcommands. Flags override the
/// values read from `--config`.
#[derive(Args)]
struct EnvArgs {
    /// Environment config file (TOML, EnvConfig field names).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    reward: Option<RewardFunctionKind>,
    #[arg(long)]
    order: Option<AgentOrder>,
    #[arg(long = "action-space")]
    action_space: Option<ActionSpace>,
    #[arg(long = "attack-prob")]
    attack_prob: Option<f64>,
}

impl EnvArgs {
    fn resolve(&self) -> Result<EnvConfig> {
        let mut env = match &self.config {
            Some(path) => read_env_config(path)?,
            None => EnvConfig::default(),
        };
        if let Some(n) = self.nodes {
            env.num_nodes = n;
        }
        if let Some(r) = self.reward {
            env.reward_function = r;
        }
        if let Some(o) = self.order {
            env.agent_order = o;
        }
        if let Some(s) = self.action_space {
            env.action_space = s;
        }
        if let Some(p) = self.attack_prob {
            env.red_attack_prob = p;
        }
        env.validate()?;
        Ok(env)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training budget; defaults to the per-size budget.
    #[arg(long)]
    timesteps: Option<u64>,
    /// PPO config file (TOML, PpoConfig field names).
    #[arg(long = "ppo-config")]
    ppo_config: Option<PathBuf>,
    #[arg(long = "eval-episodes", default_value_t = 1000)]
    eval_episodes: usize,
    /// Output directory for policy.txt, env.toml, curve.csv and record.json.
    #[arg(long, default_value = "train_out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Environment config; defaults to env.toml next to the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Greedy actions (true) or sampled actions (false).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    deterministic: bool,
    /// Evaluation environment seed; defaults to the one `train` used.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Worker threads; overrides parallel_workers in the spec.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep existing records whose config hash matches instead of retraining.
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value = "records")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "markdown-table")]
    format: ReportFormat,
    /// Output file (csv, markdown-table) or directory (plot-data). csv and
    /// markdown go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = cybergym::metrics::DEFAULT_DV_WINDOW)]
    window: usize,
    /// Compute DV on the episodic-reward curve instead of the ground-truth curve.
    #[arg(long = "dv-on-reward")]
    dv_on_reward: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    policy: OraclePolicyKind,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the first episode's trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn read_env_config(path: &Path) -> Result<EnvConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    EnvConfig::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let env = EnvConfig { rng_seed: args.seed, ..args.env.resolve()? };
    let mut ppo = match &args.ppo_config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<PpoConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PpoConfig { total_timesteps: cybergym::ppo::default_total_timesteps(env.num_nodes), ..PpoConfig::default() },
    };
    ppo.seed = args.seed;
    if let Some(t) = args.timesteps {
        ppo.total_timesteps = t;
    }
    let job = RunJob { env, ppo, seed: args.seed, eval_episodes: args.eval_episodes };
    let (record, params) = run_job_with_policy(&job)?;

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("env.toml"), job.env.to_toml_string())?;
    fs::write(args.out.join("record.json"), serde_json::to_vec_pretty(&record)?)?;
    let mut curve = String::from("timestep,episodes,mean_episodic_reward,mean_ground_truth\n");
    for p in &record.curve.points {
        curve.push_str(&format!("{},{},{},{}\n", p.timestep, p.episodes, p.mean_episodic_reward, p.mean_ground_truth));
    }
    fs::write(args.out.join("curve.csv"), curve)?;
    if let Some(params) = &params {
        checkpoint::save(params, &args.out.join("policy.txt"))?;
    }

    println!("{} seed {}: {:?} in {:.1}s", record.cell(), record.seed, record.status, record.wall_clock_secs);
    if let Some(e) = &record.evaluation {
        println!(
            "ground truth {:.4} ± {:.4}, episodic reward {:.3} ({} greedy episodes)",
            e.ground_truth_mean, e.ground_truth_se, e.episodic_reward_mean, e.episodes
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let params = checkpoint::load(&args.checkpoint)?;
    let config_path = match args.config {
        Some(p) => p,
        None => args.checkpoint.parent().unwrap_or(Path::new(".")).join("env.toml"),
    };
    let env = read_env_config(&config_path)?;
    let eval_env = EnvConfig { rng_seed: args.seed.unwrap_or_else(|| evaluation_seed(env.rng_seed)), ..env };
    let summary = evaluate_policy(&params, &eval_env, args.episodes, args.deterministic)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "ground truth {:.4} ± {:.4}; episodic reward {:.3} ± {:.3} over {} episodes",
            summary.ground_truth_mean, summary.ground_truth_se, summary.episodic_reward_mean, summary.episodic_reward_se, summary.episodes
        );
    }
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec = SweepSpec::from_toml_str(&text)?;
    let options = SweepOptions { workers: args.workers, resume: args.resume, verbose: !args.quiet };
    let outcome = run_sweep(&spec, &args.out, &options)?;
    println!(
        "{} runs ({} trained, {} reused) in {}",
        outcome.records.len(),
        outcome.executed,
        outcome.records.len() - outcome.executed,
        args.out.display()
    );
    Ok(())
}

fn report_cmd(args: ReportArgs) -> Result<()> {
    let records = load_records(&args.records).with_context(|| format!("loading {}", args.records.display()))?;
    let meaning = if args.dv_on_reward { CurveMeaning::MeanEpisodicReward } else { CurveMeaning::MeanGroundTruthScore };
    let summaries = aggregate(&records, args.window, meaning)?;
    if summaries.is_empty() {
        bail!("no records under {}", args.records.display());
    }
    match (&args.out, args.format) {
        (Some(out), format) => {
            for path in export_report(&summaries, format, out)? {
                println!("wrote {}", path.display());
            }
        }
        (None, ReportFormat::Csv) => print!("{}", render_csv(&summaries)),
        (None, ReportFormat::MarkdownTable) => print!("{}", render_markdown(&summaries)),
        (None, ReportFormat::PlotData) => bail!("plot-data needs --out <directory>"),
    }
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> Result<()> {
    let env = EnvConfig { rng_seed: args.seed, ..args.env.resolve()? };
    let report = run_oracle(args.policy, &env, args.episodes)?;
    if let Some(path) = &args.trace {
        let traces = first_episode_traces(args.policy, &env)?;
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        cybergym::env::write_trace_jsonl(&traces, std::io::BufWriter::new(file))?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let s = &report.summary;
    println!(
        "{} | {} nodes, {}, {} actions, attack prob {} | {} episodes",
        report.policy, env.num_nodes, env.agent_order, env.action_space, env.red_attack_prob, s.episodes
    );
    println!("ground truth score      {:.4} ± {:.4}", s.ground_truth_mean, s.ground_truth_se);
    println!("episodic reward ({})  {:.3} ± {:.3}", env.reward_function, s.episodic_reward_mean, s.episodic_reward_se);
    println!(
        "mean step reward        sparse-positive {:.4}, sparse-negative {:.4}, dense {:.4}",
        s.step_rewards.sparse_positive, s.step_rewards.sparse_negative, s.step_rewards.dense
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
    }
}
