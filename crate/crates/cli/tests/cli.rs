use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphboost::metrics::EvalReport;
use graphboost_cli::commands::{self, RunArgs, SynthArgs};
use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphboost"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const QUICK: &str = r#"
data = "train.csv"
model = "model.gbm"
report = "report.json"
split = [0.6, 0.2, 0.2]
seed = 3
estimators = 2
hidden = 8
steps = 3
dropout = 0.0
learning_rate = 0.03
max_epochs = 25
patience = 5
"#;

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    commands::synth(&SynthArgs {
        n: 300,
        m: 4,
        k: 3,
        rho: 0.9,
        seed: 1,
        test_fraction: 0.25,
        out: dir.path().to_path_buf(),
    })
    .unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

#[test]
fn train_predict_evaluate_round_trip() {
    let (dir, cfg) = workspace(QUICK);
    let out = bin(&["train", "--config", p(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("weighted_auroc = "));

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in ["weighted_auroc", "accuracy", "per_class_auroc", "confusion", "rounds"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["rounds"].as_array().unwrap().len(), 2);

    let model = dir.path().join("model.gbm");
    let pred = dir.path().join("pred.csv");
    let out = bin(&["predict", "--model", p(&model), "--data", p(&dir.path().join("test.csv")), "--out", p(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&pred).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row_id,label,score_c0,score_c1,score_c2");
    assert_eq!(lines.count(), 75);

    let json = dir.path().join("eval.json");
    let out = bin(&["evaluate", "--model", p(&model), "--data", p(&dir.path().join("test.csv")), "--out", p(&json)]);
    assert!(out.status.success());
    let reloaded = EvalReport::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    let direct = commands::evaluate(&model, &dir.path().join("test.csv"), "label", None).unwrap();
    assert_eq!(reloaded, direct);
    assert_eq!(reloaded.n, 75);
}

#[test]
fn training_file_fed_back_matches_fit_time_predictions() {
    let (dir, cfg) = workspace(QUICK);
    let trained = commands::train(&RunArgs {
        config: cfg,
        ..RunArgs::default()
    })
    .unwrap();
    let pred = commands::predict(&trained.model_path, &dir.path().join("train.csv"), &dir.path().join("p.csv")).unwrap();
    assert_eq!(pred.labels, trained.fitted.report.cohort.labels);
}

#[test]
fn header_only_input_gives_header_only_output() {
    let (dir, cfg) = workspace(QUICK);
    assert!(bin(&["train", "--config", p(&cfg)]).status.success());
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "f0,f1,f2,f3\n").unwrap();
    let pred = dir.path().join("pred.csv");
    let out = bin(&["predict", "--model", p(&dir.path().join("model.gbm")), "--data", p(&empty), "--out", p(&pred)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&pred).unwrap(), "row_id,label,score_c0,score_c1,score_c2\n");
}

#[test]
fn data_problems_exit_with_two() {
    let (dir, cfg) = workspace(QUICK);
    let out = bin(&["train", "--config", p(&cfg), "--data", "/no/such/file.csv"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&cfg, QUICK.replace("seed = 3", "seed = 3\nlabel = \"outcome\"")).unwrap();
    let out = bin(&["train", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label column absent"));

    fs::write(&cfg, QUICK).unwrap();
    assert!(bin(&["train", "--config", p(&cfg)]).status.success());
    let model = dir.path().join("model.gbm");

    let mut bytes = fs::read(&model).unwrap();
    bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
    let old = dir.path().join("old.gbm");
    fs::write(&old, bytes).unwrap();
    let out = bin(&["predict", "--model", p(&old), "--data", p(&dir.path().join("test.csv")), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "f0,f2\n0.1,0.2\n").unwrap();
    let out = bin(&["predict", "--model", p(&model), "--data", p(&narrow), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("f1") && err.contains("f3"), "{err}");

    let constant = dir.path().join("constant.csv");
    fs::write(&constant, "f0,f1,f2,f3,label\n0.1,0.2,0.3,0.4,c1\n0.5,0.1,0.2,0.3,c1\n").unwrap();
    let out = bin(&["evaluate", "--model", p(&model), "--data", p(&constant)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single class"));
}

#[test]
fn usage_problems_exit_with_one() {
    let (_dir, cfg) = workspace(QUICK);
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["train"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));

    fs::write(&cfg, "seed = 1\nhidden = [").unwrap();
    let out = bin(&["train", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    fs::write(&cfg, QUICK.replace("hidden = 8", "hidden = [8, 16]")).unwrap();
    let out = bin(&["train", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));
}

#[test]
fn sweep_enumerates_dedups_and_repeats() {
    let grid = QUICK.replace("estimators = 2", "estimators = 1\nteleport = [0.1, 0.5, 0.1]");
    let (dir, cfg) = workspace(&grid);
    let args = RunArgs {
        config: cfg,
        ..RunArgs::default()
    };
    let a = commands::sweep(&args).unwrap();
    assert_eq!(a.points.len(), 2);
    assert!(a.test.is_some());
    assert_eq!(a.final_rounds.len(), 1);
    let b = commands::sweep(&args).unwrap();
    assert_eq!(a.best_config, b.best_config);
    assert_eq!(a.best, b.best);

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["points"].as_array().unwrap().len(), 2);
    assert!(report["test"]["weighted_auroc"].is_f64());

    fs::write(&args.config, grid.replace("seed = 3", "seed = 3\ngrid_cap = 1")).unwrap();
    assert_eq!(bin(&["sweep", "--config", p(&args.config)]).status.code(), Some(1));
}

#[test]
fn synth_writes_reproducible_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = bin(&["synth", "--n", "200", "--m", "3", "--k", "2", "--rho", "0.5", "--seed", "9", "--out", p(&out)]);
        assert!(o.status.success());
        let meta: Value = serde_json::from_slice(&o.stdout).unwrap();
        (
            fs::read(out.join("train.csv")).unwrap(),
            fs::read(out.join("test.csv")).unwrap(),
            meta["edge_column"].as_str().unwrap().to_owned(),
        )
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let train = String::from_utf8(a.0).unwrap();
    assert!(train.starts_with("f0,f1,f2,label\n"));
    assert_eq!(train.lines().count(), 161);
    assert_eq!(bin(&["synth", "--n", "5", "--out", p(dir.path())]).status.code(), Some(1));
}
