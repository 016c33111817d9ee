//! SAMME boosting over candidate graphs.
//!
//! Each round trains one APPNP per candidate graph under the current sample
//! weights, keeps the candidate with the lowest weighted training error,
//! weights it by `η (½ log((1-err)/err) + log(K-1))` and up-weights the rows it
//! got wrong. Graphs span every row of the cohort (train, validation and
//! test); only training labels enter the loss.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appnp::{argmax_rows, train_weak, uniform_weights, AppnpConfig, AppnpModel, WeakProblem};
use crate::data::{Dataset, EncodingMeta, Split};
use crate::error::{Error, Result};
use crate::graph::{
    build_adjacency, enumerate_candidates, CandidateGraph, CandidateOptions, ExpertEdge,
    SparseAdjacency, DEFAULT_EDGE_CAP, DEFAULT_PAIR_CAP,
};
use crate::linalg::Matrix;
use crate::rng::derive_seed;
use crate::scalar::Real;

/// How a round's error maps to its vote weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaRule {
    /// `½ log((1-err)/err) + log(K-1)`.
    #[default]
    Halved,
    /// `log((1-err)/err) + log(K-1)`.
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub estimators: usize,
    /// Shrinkage applied to every round's alpha, in `(0, 1]`.
    pub learning_rate: f64,
    pub weak: AppnpConfig,
    pub expert_edges: Vec<ExpertEdge>,
    /// Threads used to train candidates; `0` uses the ambient rayon pool.
    pub workers: usize,
    pub seed: u64,
    pub pair_cap: usize,
    pub edge_cap: usize,
    pub alpha_rule: AlphaRule,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            estimators: 10,
            learning_rate: 1.0,
            weak: AppnpConfig::default(),
            expert_edges: Vec::new(),
            workers: 0,
            seed: 0,
            pair_cap: DEFAULT_PAIR_CAP,
            edge_cap: DEFAULT_EDGE_CAP,
            alpha_rule: AlphaRule::Halved,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators == 0 {
            return Err(Error::InvalidArgument("need at least one estimator".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "boost learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        self.weak.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakRound<T> {
    pub feature: usize,
    pub gamma: T,
    pub expert: bool,
    pub model: AppnpModel<T>,
    pub alpha: T,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// All requested rounds were fitted.
    Completed,
    /// The newest weak learner reached `(K-1)/K` and was discarded.
    WeakError { round: usize, error: f64 },
    /// The running ensemble reached `(K-1)/K`; its last round was kept.
    EnsembleError { round: usize, error: f64 },
}

#[derive(Debug, Clone)]
pub struct BoostState<T> {
    /// Sample weights; zero outside the train rows, summing to one over them.
    pub weights: Vec<T>,
    pub iteration: usize,
    pub terminated: Option<Termination>,
}

impl<T: Real> BoostState<T> {
    pub fn new(train_mask: &[bool]) -> Result<Self> {
        if !train_mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("no train rows".into()));
        }
        Ok(Self {
            weights: uniform_weights(train_mask),
            iteration: 0,
            terminated: None,
        })
    }
}

/// A fitted ensemble with everything inference needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub rounds: Vec<WeakRound<T>>,
    pub n_classes: usize,
    pub meta: EncodingMeta,
    /// Standardized features of every cohort row seen at fit time; new rows
    /// join these nodes when graphs are rebuilt for inference.
    pub cohort: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction<T> {
    pub labels: Vec<usize>,
    /// Alpha-weighted votes per class, normalized to sum to one per row.
    pub scores: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub feature: usize,
    pub feature_name: String,
    pub gamma: f64,
    pub expert: bool,
    pub error: f64,
    pub alpha: f64,
    pub ensemble_train_error: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport<T> {
    pub rounds: Vec<RoundLog>,
    pub termination: Termination,
    pub candidates: usize,
    /// Transductive ensemble prediction for every cohort row.
    pub cohort: EnsemblePrediction<T>,
}

#[derive(Debug, Clone)]
pub struct Fitted<T> {
    pub ensemble: Ensemble<T>,
    pub report: FitReport<T>,
}

/// `Σ_mask w_i · 1(prediction_i != label_i)`; weights are expected to sum to
/// one over the mask.
pub fn weighted_error<T: Real>(predictions: &[usize], labels: &[usize], weights: &[T], mask: &[bool]) -> T {
    debug_assert!({
        let s: f64 = weights
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w.to_f64_lossy())
            .sum();
        (s - 1.0).abs() <= 1e-6
    });
    let mut err = T::zero();
    for i in 0..labels.len() {
        if mask[i] && predictions[i] != labels[i] {
            err += weights[i];
        }
    }
    err
}

/// Clamp applied to the error before taking logs.
pub const ERROR_CLAMP: f64 = 1e-10;

pub fn alpha<T: Real>(err: f64, n_classes: usize, learning_rate: f64, rule: AlphaRule) -> T {
    assert!(n_classes >= 2, "alpha needs at least two classes");
    let e = err.clamp(ERROR_CLAMP, 1.0 - ERROR_CLAMP);
    let log_odds = ((1.0 - e) / e).ln();
    let odds_term = match rule {
        AlphaRule::Halved => 0.5 * log_odds,
        AlphaRule::Canonical => log_odds,
    };
    T::of(learning_rate * (odds_term + ((n_classes - 1) as f64).ln()))
}

/// Neumaier-compensated sum.
fn stable_sum<T: Real>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Multiplies misclassified rows under `mask` by `exp(alpha)` and renormalizes
/// the masked weights to sum to one.
pub fn update_weights<T: Real>(
    weights: &[T],
    predictions: &[usize],
    labels: &[usize],
    alpha: T,
    mask: &[bool],
) -> Result<Vec<T>> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
    }
    let boost = alpha.exp();
    let mut out: Vec<T> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if mask[i] && predictions[i] != labels[i] {
                w * boost
            } else {
                w
            }
        })
        .collect();
    let total = stable_sum(out.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| *w));
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::ZeroWeights);
    }
    for (w, &m) in out.iter_mut().zip(mask) {
        if m {
            *w /= total;
        }
    }
    Ok(out)
}

/// Shared inputs for the rounds of one fit.
#[derive(Debug, Clone, Copy)]
pub struct RoundInputs<'a, T> {
    pub x: &'a Matrix<T>,
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub train_mask: &'a [bool],
    pub val_mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome<T> {
    pub candidate: usize,
    pub model: AppnpModel<T>,
    pub error: f64,
    /// Predictions of the selected model for every cohort row.
    pub predictions: Vec<usize>,
    /// Weighted training error per candidate; `None` where training diverged.
    pub candidate_errors: Vec<Option<f64>>,
}

/// A trained candidate with its cohort predictions and weighted training error.
type Trained<T> = (AppnpModel<T>, Vec<usize>, f64);

/// Trains one weak learner per candidate and keeps the lowest weighted
/// training error. Ties go to the earlier candidate, i.e. lower feature index,
/// then smaller gamma, then quantile before expert.
pub fn run_round<T: Real>(
    state: &BoostState<T>,
    candidates: &[CandidateGraph<T>],
    inputs: &RoundInputs<'_, T>,
    weak: &AppnpConfig,
) -> Result<RoundOutcome<T>> {
    if state.terminated.is_some() {
        return Err(Error::InvalidArgument("boosting already terminated".into()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate graphs".into()));
    }
    // Boosting weights on train rows; early stopping sees uniform validation weights.
    let mut weights = state.weights.clone();
    if let Some(val) = inputs.val_mask {
        for (w, v) in weights.iter_mut().zip(uniform_weights::<T>(val)) {
            if v > T::zero() {
                *w = v;
            }
        }
    }

    let trained: Vec<Option<Trained<T>>> = candidates
        .par_iter()
        .map(|cand| {
            let problem = WeakProblem {
                x: inputs.x,
                adjacency: &cand.adjacency,
                labels: inputs.labels,
                n_classes: inputs.n_classes,
                weights: &weights,
                train_mask: inputs.train_mask,
                val_mask: inputs.val_mask,
            };
            let fitted = train_weak(weak, &problem).and_then(|(model, _)| {
                let logits = model.logits(inputs.x, &cand.adjacency)?;
                Ok((model, argmax_rows(&logits)))
            });
            match fitted {
                Ok((model, preds)) => {
                    let err = weighted_error(&preds, inputs.labels, &state.weights, inputs.train_mask);
                    Some((model, preds, err.to_f64_lossy()))
                }
                Err(e) => {
                    log::warn!(
                        "candidate feature={} gamma={} failed: {e}",
                        cand.feature,
                        cand.gamma
                    );
                    None
                }
            }
        })
        .collect();

    let candidate_errors: Vec<Option<f64>> =
        trained.iter().map(|t| t.as_ref().map(|(_, _, e)| *e)).collect();
    let best = candidate_errors
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (i, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::AllCandidatesFailed)?;
    let (model, predictions, error) = trained.into_iter().nth(best).flatten().expect("selected candidate trained");
    Ok(RoundOutcome {
        candidate: best,
        model,
        error,
        predictions,
        candidate_errors,
    })
}

fn accumulate_votes<T: Real>(votes: &mut Matrix<T>, predictions: &[usize], alpha: T) {
    for (i, &p) in predictions.iter().enumerate() {
        let v = votes.get(i, p);
        votes.set(i, p, v + alpha);
    }
}

fn normalize_votes<T: Real>(votes: Matrix<T>) -> EnsemblePrediction<T> {
    let labels = argmax_rows(&votes);
    let mut scores = votes;
    for i in 0..scores.rows() {
        let row = scores.row_mut(i);
        let total: T = row.iter().copied().sum();
        if total > T::zero() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
    }
    EnsemblePrediction { labels, scores }
}

fn masked_rate(predictions: &[usize], labels: &[usize], mask: &[bool]) -> f64 {
    let n = mask.iter().filter(|&&m| m).count();
    let wrong = (0..labels.len())
        .filter(|&i| mask[i] && predictions[i] != labels[i])
        .count();
    wrong as f64 / n.max(1) as f64
}

fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Fits the boosted ensemble on `dataset`: train rows drive the loss and the
/// sample weights, validation rows drive early stopping, and all rows are
/// nodes of every graph.
pub fn fit<T: Real>(config: &BoostConfig, dataset: &Dataset) -> Result<Fitted<T>> {
    config.validate()?;
    with_workers(config.workers, || fit_inner(config, dataset))?
}

fn fit_inner<T: Real>(config: &BoostConfig, dataset: &Dataset) -> Result<Fitted<T>> {
    let k = dataset.n_classes;
    let x: Matrix<T> = dataset.x.cast();
    let train_mask = dataset.mask(Split::Train);
    let val_mask = dataset.mask(Split::Val);
    let val_mask = val_mask.iter().any(|&v| v).then_some(val_mask);

    let expert = config
        .expert_edges
        .iter()
        .map(|e| e.resolve(&dataset.meta).map(|(j, g)| (j, T::of(g))))
        .collect::<Result<Vec<_>>>()?;
    let candidates = enumerate_candidates(
        &x,
        &expert,
        &CandidateOptions {
            pair_cap: config.pair_cap,
            edge_cap: config.edge_cap,
            seed: derive_seed(config.seed, "pairs", 0),
        },
    )?;
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("every candidate graph exceeded the edge cap".into()));
    }
    log::info!(
        "boosting over {} candidate graphs ({} rows, {} features, {} classes)",
        candidates.len(),
        x.rows(),
        x.cols(),
        k
    );

    let inputs = RoundInputs {
        x: &x,
        labels: &dataset.y,
        n_classes: k,
        train_mask: &train_mask,
        val_mask: val_mask.as_deref(),
    };
    let bound = (k - 1) as f64 / k as f64;
    let names = dataset.meta.feature_names();
    let mut state = BoostState::new(&train_mask)?;
    let mut rounds: Vec<WeakRound<T>> = Vec::new();
    let mut logs = Vec::new();
    let mut votes = Matrix::zeros(x.rows(), k);

    while state.terminated.is_none() {
        if state.iteration == config.estimators {
            state.terminated = Some(Termination::Completed);
            break;
        }
        let t = state.iteration + 1;
        let weak = AppnpConfig {
            seed: derive_seed(config.seed, "round", t as u64),
            ..config.weak.clone()
        };
        let outcome = run_round(&state, &candidates, &inputs, &weak)?;
        let cand = &candidates[outcome.candidate];
        if outcome.error >= bound {
            if rounds.is_empty() {
                return Err(Error::NoWeakLearnability {
                    err: outcome.error,
                    bound,
                });
            }
            log::info!(
                "round {t}: weak error {:.4} >= {bound:.4}, discarded; stopping",
                outcome.error
            );
            state.terminated = Some(Termination::WeakError {
                round: t,
                error: outcome.error,
            });
            break;
        }
        let a: T = alpha(outcome.error, k, config.learning_rate, config.alpha_rule);
        state.weights = update_weights(&state.weights, &outcome.predictions, &dataset.y, a, &train_mask)?;
        state.iteration = t;
        accumulate_votes(&mut votes, &outcome.predictions, a);
        let ens_err = masked_rate(&argmax_rows(&votes), &dataset.y, &train_mask);

        let entry = RoundLog {
            round: t,
            feature: cand.feature,
            feature_name: names[cand.feature].clone(),
            gamma: cand.gamma.to_f64_lossy(),
            expert: cand.origin.is_expert(),
            error: outcome.error,
            alpha: a.to_f64_lossy(),
            ensemble_train_error: ens_err,
        };
        log::info!(
            "round {t}: feature {} ({}) gamma={:.6} err={:.4} alpha={:.4} ensemble_train_err={:.4}",
            entry.feature,
            entry.feature_name,
            entry.gamma,
            entry.error,
            entry.alpha,
            entry.ensemble_train_error
        );
        logs.push(entry);
        rounds.push(WeakRound {
            feature: cand.feature,
            gamma: cand.gamma,
            expert: cand.origin.is_expert(),
            model: outcome.model,
            alpha: a,
            error: outcome.error,
        });
        if ens_err >= bound {
            state.terminated = Some(Termination::EnsembleError {
                round: t,
                error: ens_err,
            });
        }
    }

    let ensemble = Ensemble {
        rounds,
        n_classes: k,
        meta: dataset.meta.clone(),
        cohort: x,
    };
    Ok(Fitted {
        ensemble,
        report: FitReport {
            rounds: logs,
            termination: state.terminated.expect("loop exits terminated"),
            candidates: candidates.len(),
            cohort: normalize_votes(votes),
        },
    })
}

impl<T: Real> Ensemble<T> {
    pub fn n_features(&self) -> usize {
        self.cohort.cols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.feature_names()
    }

    /// The first `rounds` rounds as an ensemble of their own.
    pub fn truncated(&self, rounds: usize) -> Self {
        Self {
            rounds: self.rounds[..rounds.min(self.rounds.len())].to_vec(),
            ..self.clone()
        }
    }

    fn graphs_over(&self, x: &Matrix<T>) -> Result<HashMap<(usize, u64), SparseAdjacency<T>>> {
        let mut graphs = HashMap::new();
        for r in &self.rounds {
            let key = (r.feature, r.gamma.to_f64_lossy().to_bits());
            if let Entry::Vacant(slot) = graphs.entry(key) {
                slot.insert(build_adjacency(&x.column(r.feature), r.gamma)?);
            }
        }
        Ok(graphs)
    }

    fn vote(&self, x: &Matrix<T>, keep_from: usize) -> Result<EnsemblePrediction<T>> {
        if self.rounds.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no rounds".into()));
        }
        let graphs = self.graphs_over(x)?;
        let per_round = self
            .rounds
            .par_iter()
            .map(|r| {
                let adj = &graphs[&(r.feature, r.gamma.to_f64_lossy().to_bits())];
                Ok(argmax_rows(&r.model.logits(x, adj)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut votes = Matrix::zeros(x.rows() - keep_from, self.n_classes);
        for (r, preds) in self.rounds.iter().zip(per_round) {
            accumulate_votes(&mut votes, &preds[keep_from..], r.alpha);
        }
        Ok(normalize_votes(votes))
    }

    /// Transductive predictions for the stored cohort rows, identical to
    /// the ones made at fit time.
    pub fn predict_cohort(&self) -> Result<EnsemblePrediction<T>> {
        self.vote(&self.cohort, 0)
    }

    /// Predicts encoded `rows` by inserting them as extra nodes next to the
    /// stored cohort and rebuilding each round's graph.
    pub fn predict(&self, rows: &Matrix<T>) -> Result<EnsemblePrediction<T>> {
        if rows.cols() != self.n_features() {
            return Err(Error::Shape(format!(
                "ensemble expects {} features, got {}",
                self.n_features(),
                rows.cols()
            )));
        }
        if rows.rows() == 0 {
            return Ok(EnsemblePrediction {
                labels: Vec::new(),
                scores: Matrix::zeros(0, self.n_classes),
            });
        }
        let combined = self.cohort.vstack(rows)?;
        self.vote(&combined, self.cohort.rows())
    }

    /// Softmax output of a single round's weak learner on the cohort graph.
    pub fn round_probabilities(&self, round: usize) -> Result<Matrix<T>> {
        let r = self
            .rounds
            .get(round)
            .ok_or_else(|| Error::InvalidArgument(format!("no round {round}")))?;
        let adj = build_adjacency(&self.cohort.column(r.feature), r.gamma)?;
        Ok(r.model.predict(&self.cohort, &adj)?.1)
    }
}

/// Vote-based predictor shared by the fit report and inference, exposed for testing.
pub fn combine_votes<T: Real>(per_round: &[(Vec<usize>, T)], n_classes: usize) -> EnsemblePrediction<T> {
    let n = per_round.first().map_or(0, |(p, _)| p.len());
    let mut votes = Matrix::zeros(n, n_classes);
    for (preds, a) in per_round {
        accumulate_votes(&mut votes, preds, *a);
    }
    normalize_votes(votes)
}
