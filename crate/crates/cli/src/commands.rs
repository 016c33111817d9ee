//! The `train`, `predict`, `evaluate`, `sweep` and `synth` commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use graphboost::boost::{fit, BoostConfig, Ensemble, EnsemblePrediction, Fitted};
use graphboost::data::{
    apply_encoder, code_labels, fit_encoder, gen_synthetic, load_csv, prepare_dataset, save_csv,
    split_rows, CsvOptions, Dataset, RawTable, Split, SyntheticParams,
};
use graphboost::linalg::Matrix;
use graphboost::metrics::EvalReport;
use graphboost::model_file;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Failure;

/// Overrides shared by `train` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(Failure::Usage)?;
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(m) = &args.model {
        cfg.model = Some(m.clone());
    }
    if let Some(o) = &args.out {
        cfg.report = Some(o.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn labeled_table(cfg: &RunConfig) -> Result<(RawTable, Vec<String>), Failure> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::Usage(anyhow!("no data file: set `data` in the config or pass --data")))?;
    let opts = CsvOptions {
        label: Some(cfg.label.clone()),
        hints: cfg.kind_hints(),
        allow_empty: false,
    };
    let csv = load_csv(path, &opts)?;
    let labels = csv.labels.expect("label requested");
    Ok((csv.table, labels))
}

fn rows_of(split: &[Split], which: Split) -> Vec<usize> {
    (0..split.len()).filter(|&i| split[i] == which).collect()
}

/// Metrics for the `rows` of a cohort-wide prediction.
fn evaluate_rows(pred: &EnsemblePrediction<f64>, y: &[usize], rows: &[usize]) -> graphboost::Result<EvalReport> {
    let labels: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
    let predicted: Vec<usize> = rows.iter().map(|&i| pred.labels[i]).collect();
    EvalReport::compute(&pred.scores.select_rows(rows), &predicted, &labels)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Data)
}

fn split_counts(split: &[Split]) -> Value {
    json!({
        "train": rows_of(split, Split::Train).len(),
        "val": rows_of(split, Split::Val).len(),
        "test": rows_of(split, Split::Test).len(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub fitted: Fitted<f64>,
    pub dataset: Dataset,
    pub test: Option<EvalReport>,
    pub report: Value,
    pub model_path: PathBuf,
}

/// Loads, encodes, splits and fits; evaluates the test split transductively,
/// then writes the model and, when configured, the JSON report.
pub fn train(args: &RunArgs) -> Result<TrainOutcome, Failure> {
    let cfg = load_run_config(args)?;
    let point = cfg.single().map_err(Failure::Usage)?;
    let model_path = cfg
        .model
        .clone()
        .ok_or_else(|| Failure::Usage(anyhow!("no model path: set `model` in the config or pass --model")))?;
    let (table, labels) = labeled_table(&cfg)?;
    let dataset = prepare_dataset(&table, &labels, cfg.split, cfg.seed)?;
    let fitted = fit::<f64>(&point, &dataset)?;

    let test_rows = rows_of(&dataset.split, Split::Test);
    let test = if test_rows.is_empty() {
        log::warn!("no test rows; skipping evaluation");
        None
    } else {
        Some(evaluate_rows(&fitted.report.cohort, &dataset.y, &test_rows)?)
    };
    let mut report = match &test {
        Some(t) => serde_json::to_value(t).expect("report serializes"),
        None => json!({}),
    };
    let obj = report.as_object_mut().expect("object");
    obj.insert("classes".into(), json!(dataset.meta.classes));
    obj.insert("split".into(), split_counts(&dataset.split));
    obj.insert("candidates".into(), json!(fitted.report.candidates));
    obj.insert("termination".into(), json!(fitted.report.termination));
    obj.insert("rounds".into(), json!(fitted.report.rounds));

    model_file::save(&fitted.ensemble, &model_path)?;
    log::info!("wrote model {}", model_path.display());
    if let Some(path) = &cfg.report {
        write_json(path, &report)?;
        log::info!("wrote report {}", path.display());
    }
    if let Some(t) = &test {
        print!("{t}");
    }
    Ok(TrainOutcome {
        fitted,
        dataset,
        test,
        report,
        model_path,
    })
}

fn load_model(path: &Path) -> Result<Ensemble<f64>, Failure> {
    Ok(model_file::load::<f64>(path)?)
}

/// Reads `data` with the model's column kinds and predicts every row.
fn predict_file(
    ensemble: &Ensemble<f64>,
    data: &Path,
    label: Option<&str>,
) -> Result<(EnsemblePrediction<f64>, Option<Vec<String>>), Failure> {
    let mut hints = ensemble.meta.kind_hints();
    if let Some(l) = label {
        hints.remove(l);
    }
    let opts = CsvOptions {
        label: label.map(str::to_owned),
        hints,
        allow_empty: true,
    };
    let csv = load_csv(data, &opts)?;
    let x: Matrix<f64> = apply_encoder(&csv.table, &ensemble.meta)?;
    Ok((ensemble.predict(&x)?, csv.labels))
}

/// Writes `row_id,label,score_<class>...` for every row of `data`.
pub fn predict(model: &Path, data: &Path, out: &Path) -> Result<EnsemblePrediction<f64>, Failure> {
    let ensemble = load_model(model)?;
    let (pred, _) = predict_file(&ensemble, data, None)?;
    let file = File::create(out)
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(Failure::Data)?;
    let mut w = BufWriter::new(file);
    let classes = &ensemble.meta.classes;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        let mut header = vec!["row_id".to_string(), "label".to_string()];
        header.extend(classes.iter().map(|c| format!("score_{c}")));
        writeln!(w, "{}", csv_line(&header))?;
        for (i, &l) in pred.labels.iter().enumerate() {
            let mut rec = vec![i.to_string(), classes[l].clone()];
            rec.extend(pred.scores.row(i).iter().map(f64::to_string));
            writeln!(w, "{}", csv_line(&rec))?;
        }
        w.flush()
    };
    write(&mut w)
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(Failure::Data)?;
    Ok(pred)
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Scores a labeled file against the model.
pub fn evaluate(model: &Path, data: &Path, label: &str, out: Option<&Path>) -> Result<EvalReport, Failure> {
    let ensemble = load_model(model)?;
    let (pred, labels) = predict_file(&ensemble, data, Some(label))?;
    let y = ensemble.meta.encode_labels(&labels.expect("label requested"))?;
    let report = EvalReport::compute(&pred.scores, &pred.labels, &y)?;
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    print!("{report}");
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub config: BoostConfig,
    pub val_weighted_auroc: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub best: usize,
    pub best_config: BoostConfig,
    /// Test metrics of the best configuration refitted on train and validation rows.
    pub test: Option<EvalReport>,
    pub final_rounds: Vec<graphboost::boost::RoundLog>,
}

/// Fits every grid point, picks the best validation weighted AUROC (earliest
/// on ties), refits it on train and validation rows and scores the test rows once.
pub fn sweep(args: &RunArgs) -> Result<SweepOutcome, Failure> {
    let cfg = load_run_config(args)?;
    let grid = cfg.points().map_err(Failure::Usage)?;
    let (table, labels) = labeled_table(&cfg)?;
    let dataset = prepare_dataset(&table, &labels, cfg.split, cfg.seed)?;
    let val_rows = rows_of(&dataset.split, Split::Val);
    if val_rows.is_empty() {
        return Err(Failure::Usage(anyhow!("sweep needs a validation split; raise split[1]")));
    }

    let mut points = Vec::with_capacity(grid.len());
    for (index, point) in grid.iter().enumerate() {
        let fitted = fit::<f64>(point, &dataset)?;
        let val = evaluate_rows(&fitted.report.cohort, &dataset.y, &val_rows)?;
        log::info!(
            "sweep point {}/{}: val weighted AUROC {:.4}",
            index + 1,
            grid.len(),
            val.weighted_auroc
        );
        points.push(SweepPoint {
            index,
            config: point.clone(),
            val_weighted_auroc: val.weighted_auroc,
            rounds: fitted.ensemble.rounds.len(),
        });
    }
    let best = points
        .iter()
        .max_by(|a, b| {
            a.val_weighted_auroc
                .total_cmp(&b.val_weighted_auroc)
                .then(b.index.cmp(&a.index))
        })
        .map(|p| p.index)
        .expect("grid is non-empty");

    let merged: Vec<Split> = dataset
        .split
        .iter()
        .map(|s| if *s == Split::Val { Split::Train } else { *s })
        .collect();
    let refit_data = fit_encoder(&table, &labels, &merged)?;
    let refit = fit::<f64>(&grid[best], &refit_data)?;
    let test_rows = rows_of(&merged, Split::Test);
    let test = if test_rows.is_empty() {
        None
    } else {
        Some(evaluate_rows(&refit.report.cohort, &refit_data.y, &test_rows)?)
    };
    if let Some(path) = &cfg.model {
        model_file::save(&refit.ensemble, path)?;
    }
    let outcome = SweepOutcome {
        points,
        best,
        best_config: grid[best].clone(),
        test,
        final_rounds: refit.report.rounds,
    };
    if let Some(path) = &cfg.report {
        write_json(path, &outcome)?;
    }
    if let Some(t) = &outcome.test {
        print!("{t}");
    }
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub seed: u64,
    pub test_fraction: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthOutcome {
    pub edge_column: String,
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Writes `train.csv` and `test.csv` (label column `label`) into `out`.
pub fn synth(args: &SynthArgs) -> Result<SynthOutcome, Failure> {
    if !(0.0..1.0).contains(&args.test_fraction) {
        return Err(Failure::Usage(anyhow!(
            "test fraction must lie in [0, 1), got {}",
            args.test_fraction
        )));
    }
    let cohort = gen_synthetic(SyntheticParams {
        n: args.n,
        m: args.m,
        k: args.k,
        rho: args.rho,
        seed: args.seed,
    })
    .map_err(|e| Failure::Usage(e.into()))?;
    let (_, codes) = code_labels(&cohort.labels);
    let split = split_rows(&codes, [1.0 - args.test_fraction, 0.0, args.test_fraction], args.seed)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(Failure::Data)?;
    let mut paths = Vec::new();
    for (which, name) in [(Split::Train, "train.csv"), (Split::Test, "test.csv")] {
        let rows = rows_of(&split, which);
        let labels: Vec<String> = rows.iter().map(|&i| cohort.labels[i].clone()).collect();
        let path = args.out.join(name);
        save_csv(&path, &cohort.table.select_rows(&rows), Some(("label", &labels)))?;
        paths.push(path);
    }
    let test = paths.pop().expect("two files");
    let train = paths.pop().expect("two files");
    let outcome = SynthOutcome {
        edge_column: cohort.edge_name().to_owned(),
        train,
        test,
    };
    println!("{}", serde_json::to_string(&outcome).expect("serializes"));
    Ok(outcome)
}
