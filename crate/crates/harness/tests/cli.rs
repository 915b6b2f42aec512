use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cybergym(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cybergym")).args(args).current_dir(cwd).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn train_then_evaluate_reproduces_the_recorded_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["train", "--nodes", "2", "--reward", "dense", "--seed", "3", "--timesteps", "2048", "--eval-episodes", "50"];
    cybergym(&[&args[..], &["--out", "run"]].concat(), dir.path());
    let run = dir.path().join("run");
    for file in ["policy.txt", "env.toml", "curve.csv", "record.json"] {
        assert!(run.join(file).exists(), "missing {file}");
    }
    let record: serde_json::Value = serde_json::from_slice(&fs::read(run.join("record.json")).unwrap()).unwrap();
    let evaluated = json(&cybergym(&["evaluate", "--checkpoint", "run/policy.txt", "--episodes", "50", "--json"], dir.path()));
    assert_eq!(record["evaluation"], evaluated);

    cybergym(&[&args[..], &["--out", "again"]].concat(), dir.path());
    for file in ["policy.txt", "curve.csv"] {
        assert_eq!(fs::read(run.join(file)).unwrap(), fs::read(dir.path().join("again").join(file)).unwrap());
    }
}

#[test]
fn oracle_reports_scores_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = cybergym(
        &["oracle", "--policy", "restore-entry", "--nodes", "3", "--episodes", "200", "--trace", "t.jsonl", "--json"],
        dir.path(),
    );
    let report = json(&out);
    let gt = report["summary"]["ground_truth_mean"].as_f64().unwrap();
    assert!((gt + 0.9).abs() < 0.05, "{gt}");
    let trace = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 200);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["step_index"], 1);
    assert!(["red", "blue"].contains(&first["actor"].as_str().unwrap()));

    let text = String::from_utf8(cybergym(&["oracle", "--policy", "noop", "--episodes", "10"], dir.path()).stdout).unwrap();
    assert!(text.contains("ground truth score"));
}

#[test]
fn sweep_and_report_formats() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.toml"),
        r#"
network_sizes = [2]
reward_functions = ["sparse-positive", "sparse-negative"]
agent_orders = ["red-then-blue"]
action_spaces = ["basic"]
seeds = [0, 1]
eval_episodes = 10

[ppo]
total_timesteps = 1024
rollout_horizon = 256
eval_interval = 200
hidden_layers = [8]
"#,
    )
    .unwrap();
    cybergym(&["sweep", "--spec", "spec.toml", "--workers", "2", "--quiet"], dir.path());
    let resumed = String::from_utf8(cybergym(&["sweep", "--spec", "spec.toml", "--resume", "--quiet"], dir.path()).stdout).unwrap();
    assert!(resumed.contains("0 trained"), "{resumed}");

    let csv = String::from_utf8(cybergym(&["report", "--records", "records", "--format", "csv", "--window", "3"], dir.path()).stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "nodes,reward,order,action_space,eval_score_mean,eval_score_se,dv,window,n_seeds,n_diverged");
    assert_eq!(lines.count(), 2);

    let md = String::from_utf8(cybergym(&["report", "--records", "records", "--format", "markdown-table"], dir.path()).stdout).unwrap();
    assert!(md.contains('|'));

    cybergym(&["report", "--records", "records", "--format", "plot-data", "--out", "plots"], dir.path());
    assert_eq!(fs::read_dir(dir.path().join("plots")).unwrap().count(), 2);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["oracle", "--policy", "teleport"],
        vec!["oracle", "--policy", "noop", "--nodes", "1"],
        vec!["evaluate", "--checkpoint", "missing.txt"],
        vec!["report", "--records", "nowhere"],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_cybergym")).args(&args).current_dir(dir.path()).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
    }
}

#[test]
fn shipped_config_files_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let read = |name: &str| fs::read_to_string(root.join(name)).unwrap();
    cybergym::EnvConfig::from_toml_str(&read("env-n5.toml")).unwrap();
    let ppo: cybergym::ppo::PpoConfig = toml::from_str(&read("ppo.toml")).unwrap();
    assert_eq!(ppo, cybergym::ppo::PpoConfig::default());
    let full = cybergym_harness::SweepSpec::from_toml_str(&read("sweep-full.toml")).unwrap();
    assert_eq!(full.jobs().len(), 1500);
    for name in ["sweep-n5-basic.toml", "sweep-smoke.toml"] {
        cybergym_harness::SweepSpec::from_toml_str(&read(name)).unwrap();
    }
}
