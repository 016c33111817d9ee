//! APPNP weak classifier: a one-hidden-layer MLP whose logits are smoothed
//! by `k` steps of personalized-PageRank propagation,
//! `Z(l+1) = (1 - a) Â Z(l) + a H0`, with `Z(0) = H0 = MLP(X)`.
//!
//! Gradients are derived by hand. Â is symmetric and constant, so the
//! adjoint of every propagation step is another propagation step.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
use crate::linalg::{affine_nt, column_sums, matmul_nn, matmul_tn, Matrix};
use crate::rng::substream;
use crate::scalar::{count, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppnpConfig {
    pub hidden: usize,
    /// Propagation steps `k`.
    pub steps: usize,
    /// Teleport probability in `(0, 1]`; `1` disables propagation.
    pub teleport: f64,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `0` disables early stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for AppnpConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            steps: 10,
            teleport: 0.1,
            dropout: 0.1,
            learning_rate: 5e-3,
            weight_decay: 1e-4,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl AppnpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.hidden == 0 {
            return bad("hidden dimension must be positive".into());
        }
        if !(self.teleport > 0.0 && self.teleport <= 1.0) {
            return bad(format!("teleport must lie in (0, 1], got {}", self.teleport));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        Ok(())
    }
}

/// Parameter-shaped bundle; also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// H×M
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    /// K×H
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros(m: usize, h: usize, k: usize) -> Self {
        Self {
            w1: Matrix::zeros(h, m),
            b1: vec![T::zero(); h],
            w2: Matrix::zeros(k, h),
            b2: vec![T::zero(); k],
        }
    }

    pub fn slices(&self) -> [&[T]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [T]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat dot product with another bundle of the same shape.
    pub fn dot(&self, other: &Self) -> T {
        self.slices()
            .iter()
            .zip(other.slices())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| *x * *y))
            .sum()
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: T, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * *y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppnpModel<T> {
    pub params: Params<T>,
    pub config: AppnpConfig,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pre: Matrix<T>,
    hidden: Matrix<T>,
    /// Inverted-dropout multipliers, when dropout was active.
    keep: Option<Vec<T>>,
    pub h0: Matrix<T>,
    pub logits: Matrix<T>,
}

fn uniform_fill<T: Real, R: Rng>(rng: &mut R, out: &mut [T], bound: f64) {
    for v in out {
        *v = T::of(rng.random_range(-bound..=bound));
    }
}

impl<T: Real> AppnpModel<T> {
    /// He-uniform first layer, Glorot-uniform output layer, zero biases.
    pub fn init(config: AppnpConfig, n_features: usize, n_classes: usize) -> Result<Self> {
        config.validate()?;
        if n_features == 0 || n_classes < 2 {
            return Err(Error::Shape(format!(
                "need >=1 feature and >=2 classes, got {n_features} and {n_classes}"
            )));
        }
        let h = config.hidden;
        let mut params = Params::zeros(n_features, h, n_classes);
        let mut rng = substream(config.seed, "init", 0);
        uniform_fill(&mut rng, params.w1.as_mut_slice(), (6.0 / n_features as f64).sqrt());
        uniform_fill(
            &mut rng,
            params.w2.as_mut_slice(),
            (6.0 / (h + n_classes) as f64).sqrt(),
        );
        Ok(Self { params, config })
    }

    pub fn n_features(&self) -> usize {
        self.params.w1.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.params.w2.rows()
    }

    pub fn hidden(&self) -> usize {
        self.params.w1.rows()
    }

    fn check_shapes(&self, x: &Matrix<T>, adj: &SparseAdjacency<T>) -> Result<()> {
        if x.cols() != self.n_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        if adj.n_nodes() != x.rows() {
            return Err(Error::Shape(format!(
                "graph has {} nodes for {} rows",
                adj.n_nodes(),
                x.rows()
            )));
        }
        Ok(())
    }

    /// Logits for every node. `dropout_seed` activates dropout with that seed.
    pub fn forward(
        &self,
        x: &Matrix<T>,
        adj: &SparseAdjacency<T>,
        dropout_seed: Option<u64>,
    ) -> Result<ForwardCache<T>> {
        self.check_shapes(x, adj)?;
        let p = &self.params;
        let pre = affine_nt(x, &p.w1, &p.b1);
        let mut hidden = pre.clone();
        for v in hidden.as_mut_slice() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let rate = self.config.dropout;
        let keep = match dropout_seed {
            Some(seed) if rate > 0.0 => {
                let mut rng = substream(seed, "dropout", 0);
                let scale = T::of(1.0 / (1.0 - rate));
                let keep: Vec<T> = (0..hidden.as_slice().len())
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            T::zero()
                        } else {
                            scale
                        }
                    })
                    .collect();
                for (v, m) in hidden.as_mut_slice().iter_mut().zip(&keep) {
                    *v *= *m;
                }
                Some(keep)
            }
            _ => None,
        };
        let h0 = affine_nt(&hidden, &p.w2, &p.b2);
        if !h0.is_finite() {
            return Err(Error::NonFinite {
                epoch: 0,
                stage: "mlp",
            });
        }
        let logits = self.propagate(adj, &h0);
        if !logits.is_finite() {
            return Err(Error::NonFinite {
                epoch: 0,
                stage: "propagation",
            });
        }
        Ok(ForwardCache {
            pre,
            hidden,
            keep,
            h0,
            logits,
        })
    }

    /// `steps` rounds of `Z <- (1-a) Â Z + a H0` starting from `Z = H0`.
    pub fn propagate(&self, adj: &SparseAdjacency<T>, h0: &Matrix<T>) -> Matrix<T> {
        let a = T::of(self.config.teleport);
        if self.config.teleport >= 1.0 || self.config.steps == 0 {
            return h0.clone();
        }
        let decay = T::one() - a;
        let mut z = h0.clone();
        let mut next = Matrix::zeros(h0.rows(), h0.cols());
        for _ in 0..self.config.steps {
            adj.propagate_into(&z, &mut next);
            for (o, &h) in next.as_mut_slice().iter_mut().zip(h0.as_slice()) {
                *o = decay * *o + a * h;
            }
            std::mem::swap(&mut z, &mut next);
        }
        z
    }

    /// Gradient of a scalar objective with respect to the parameters, given
    /// its gradient `d_logits` with respect to the logits of `cache`.
    pub fn backward(
        &self,
        x: &Matrix<T>,
        adj: &SparseAdjacency<T>,
        cache: &ForwardCache<T>,
        d_logits: &Matrix<T>,
    ) -> Params<T> {
        let d_h0 = if self.config.teleport >= 1.0 || self.config.steps == 0 {
            d_logits.clone()
        } else {
            let a = T::of(self.config.teleport);
            let decay = T::one() - a;
            let mut g = d_logits.clone();
            let mut d_h0 = Matrix::zeros(g.rows(), g.cols());
            let mut next = Matrix::zeros(g.rows(), g.cols());
            for _ in 0..self.config.steps {
                for (d, &v) in d_h0.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *d += a * v;
                }
                adj.propagate_into(&g, &mut next);
                for v in next.as_mut_slice() {
                    *v *= decay;
                }
                std::mem::swap(&mut g, &mut next);
            }
            for (d, &v) in d_h0.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *d += v;
            }
            d_h0
        };

        let p = &self.params;
        let w2 = matmul_tn(&d_h0, &cache.hidden);
        let b2 = column_sums(&d_h0);
        let mut d_pre = matmul_nn(&d_h0, &p.w2);
        for (i, d) in d_pre.as_mut_slice().iter_mut().enumerate() {
            if cache.pre.as_slice()[i] <= T::zero() {
                *d = T::zero();
            } else if let Some(keep) = &cache.keep {
                *d *= keep[i];
            }
        }
        let w1 = matmul_tn(&d_pre, x);
        let b1 = column_sums(&d_pre);
        Params { w1, b1, w2, b2 }
    }

    /// Weighted cross-entropy plus L2 decay, and the full parameter gradient.
    pub fn loss_and_gradient(
        &self,
        x: &Matrix<T>,
        adj: &SparseAdjacency<T>,
        cache: &ForwardCache<T>,
        target: &Target<'_, T>,
    ) -> Result<(T, Params<T>)> {
        let (data_loss, d_logits) = weighted_cross_entropy(&cache.logits, target)?;
        let mut grad = self.backward(x, adj, cache, &d_logits);
        let lambda = T::of(self.config.weight_decay);
        let two_lambda = lambda + lambda;
        for (g, w) in grad.w1.as_mut_slice().iter_mut().zip(self.params.w1.as_slice()) {
            *g += two_lambda * *w;
        }
        for (g, w) in grad.w2.as_mut_slice().iter_mut().zip(self.params.w2.as_slice()) {
            *g += two_lambda * *w;
        }
        Ok((data_loss + lambda * self.decay_norm(), grad))
    }

    /// `‖W1‖² + ‖W2‖²`.
    pub fn decay_norm(&self) -> T {
        self.params.w1.squared_norm() + self.params.w2.squared_norm()
    }

    /// Full objective without gradients (dropout off).
    pub fn loss(&self, x: &Matrix<T>, adj: &SparseAdjacency<T>, target: &Target<'_, T>) -> Result<T> {
        let cache = self.forward(x, adj, None)?;
        let (data, _) = weighted_cross_entropy(&cache.logits, target)?;
        Ok(data + T::of(self.config.weight_decay) * self.decay_norm())
    }

    pub fn logits(&self, x: &Matrix<T>, adj: &SparseAdjacency<T>) -> Result<Matrix<T>> {
        Ok(self.forward(x, adj, None)?.logits)
    }

    /// Labels (argmax, lowest index on ties) and softmax probabilities, dropout off.
    pub fn predict(&self, x: &Matrix<T>, adj: &SparseAdjacency<T>) -> Result<(Vec<usize>, Matrix<T>)> {
        let logits = self.logits(x, adj)?;
        Ok((argmax_rows(&logits), softmax_rows(&logits)))
    }
}

/// Labels, per-sample weights and the rows that contribute to the loss.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a, T> {
    pub labels: &'a [usize],
    pub weights: &'a [T],
    pub mask: &'a [bool],
}

/// `Σ_mask w_i CE_i / Σ_mask w_i` and its gradient with respect to the logits.
pub fn weighted_cross_entropy<T: Real>(
    logits: &Matrix<T>,
    target: &Target<'_, T>,
) -> Result<(T, Matrix<T>)> {
    let n = logits.rows();
    if target.labels.len() != n || target.weights.len() != n || target.mask.len() != n {
        return Err(Error::Shape(format!(
            "{n} logit rows vs {} labels, {} weights, {} mask entries",
            target.labels.len(),
            target.weights.len(),
            target.mask.len()
        )));
    }
    let total: T = (0..n)
        .filter(|&i| target.mask[i])
        .map(|i| target.weights[i])
        .sum();
    if !(total > T::zero()) {
        return Err(Error::ZeroWeights);
    }
    let mut grad = Matrix::zeros(n, logits.cols());
    let mut loss = T::zero();
    for i in (0..n).filter(|&i| target.mask[i]) {
        let row = logits.row(i);
        let y = target.labels[i];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp: T = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        let w = target.weights[i] / total;
        loss += w * (lse - row[y]);
        let g = grad.row_mut(i);
        for (c, (gv, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v - lse).exp();
            *gv = w * if c == y { p - T::one() } else { p };
        }
    }
    Ok((loss, grad))
}

pub fn softmax_rows<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Index of the largest entry per row; the lowest index wins ties.
pub fn argmax_rows<T: Real>(m: &Matrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Inputs of one weak-learner fit.
#[derive(Debug, Clone, Copy)]
pub struct WeakProblem<'a, T> {
    pub x: &'a Matrix<T>,
    pub adjacency: &'a SparseAdjacency<T>,
    pub labels: &'a [usize],
    pub n_classes: usize,
    /// Sample weights; only entries under `train_mask` and `val_mask` are read.
    pub weights: &'a [T],
    pub train_mask: &'a [bool],
    /// Early-stopping rows. `None` trains for the full epoch budget and keeps
    /// the last parameters.
    pub val_mask: Option<&'a [bool]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    /// Best weighted validation error seen, when a validation mask was given.
    pub best_val_error: Option<f64>,
    pub final_train_loss: f64,
    pub early_stopped: bool,
}

/// Weighted error of `predictions` over `mask`, weights renormalized to the
/// mask (uniform if they sum to zero there).
pub fn masked_error<T: Real>(predictions: &[usize], labels: &[usize], weights: &[T], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut wrong = 0.0;
    let mut n = 0usize;
    let mut n_wrong = 0usize;
    for i in 0..labels.len() {
        if mask[i] {
            let w = weights[i].to_f64_lossy();
            total += w;
            n += 1;
            if predictions[i] != labels[i] {
                wrong += w;
                n_wrong += 1;
            }
        }
    }
    if total > 0.0 {
        wrong / total
    } else if n > 0 {
        n_wrong as f64 / n as f64
    } else {
        0.0
    }
}

struct Adam<T> {
    m: Params<T>,
    v: Params<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(like: &Params<T>) -> Self {
        let zero = Params::zeros(like.w1.cols(), like.w1.rows(), like.w2.rows());
        Self {
            m: zero.clone(),
            v: zero,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params<T>, grad: &Params<T>, lr: f64) {
        self.t += 1;
        let b1 = T::of(Self::BETA1);
        let b2 = T::of(Self::BETA2);
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = T::of(lr);
        let eps = T::of(Self::EPS);
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((p, g), m), v) in params.slices_mut().into_iter().zip(grad.slices()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Cosine-annealed learning rate for `epoch` of `total` (minimum zero).
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    0.5 * base * (1.0 + (PI * epoch as f64 / total as f64).cos())
}

/// Full-batch Adam with cosine annealing; keeps the parameters with the best
/// weighted validation error and stops after `patience` epochs without improvement.
pub fn train_weak<T: Real>(
    config: &AppnpConfig,
    problem: &WeakProblem<'_, T>,
) -> Result<(AppnpModel<T>, TrainReport)> {
    let n = problem.x.rows();
    if problem.labels.len() != n || problem.weights.len() != n || problem.train_mask.len() != n {
        return Err(Error::Shape("labels, weights and masks must cover every row".into()));
    }
    if let Some(val) = problem.val_mask {
        if val.len() != n {
            return Err(Error::Shape("validation mask length".into()));
        }
        if !val.iter().any(|&v| v) {
            return Err(Error::InvalidArgument("validation mask is empty".into()));
        }
        if val.iter().zip(problem.train_mask).any(|(&v, &t)| v && t) {
            return Err(Error::InvalidArgument("train and validation masks overlap".into()));
        }
    }
    let mut model = AppnpModel::init(config.clone(), problem.x.cols(), problem.n_classes)?;
    let target = Target {
        labels: problem.labels,
        weights: problem.weights,
        mask: problem.train_mask,
    };
    let val_error = |logits: &Matrix<T>, mask: &[bool]| {
        masked_error(&argmax_rows(logits), problem.labels, problem.weights, mask)
    };

    let mut adam = Adam::new(&model.params);
    let mut best: Option<(f64, Params<T>)> = None;
    let mut since_best = 0usize;
    let mut epochs = 0;
    let mut early_stopped = false;
    let mut final_loss = f64::NAN;
    let dropout_on = config.dropout > 0.0;
    let early_stop = config.patience > 0;

    for epoch in 0..config.max_epochs {
        let dropout_seed = dropout_on.then(|| crate::rng::derive_seed(config.seed, "dropout", epoch as u64));
        let cache = model
            .forward(problem.x, problem.adjacency, dropout_seed)
            .map_err(|e| at_epoch(e, epoch))?;

        if let Some(val) = problem.val_mask {
            let err = if dropout_on {
                val_error(&model.logits(problem.x, problem.adjacency).map_err(|e| at_epoch(e, epoch))?, val)
            } else {
                val_error(&cache.logits, val)
            };
            if best.as_ref().is_none_or(|(b, _)| err < *b) {
                best = Some((err, model.params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if early_stop && since_best >= config.patience {
                    early_stopped = true;
                    break;
                }
            }
        }

        let (loss, grad) = model.loss_and_gradient(problem.x, problem.adjacency, &cache, &target)?;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Error::NonFinite { epoch, stage: "loss" });
        }
        final_loss = loss.to_f64_lossy();
        adam.step(&mut model.params, &grad, cosine_lr(config.learning_rate, epoch, config.max_epochs));
        epochs = epoch + 1;
    }

    if let Some(val) = problem.val_mask {
        if !early_stopped {
            let err = val_error(&model.logits(problem.x, problem.adjacency)?, val);
            if best.as_ref().is_none_or(|(b, _)| err < *b) {
                best = Some((err, model.params.clone()));
            }
        }
    }
    let best_val_error = best.map(|(err, params)| {
        model.params = params;
        err
    });
    Ok((
        model,
        TrainReport {
            epochs,
            best_val_error,
            final_train_loss: final_loss,
            early_stopped,
        },
    ))
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { stage, .. } => Error::NonFinite { epoch, stage },
        other => other,
    }
}

/// Uniform weights over `mask`, zero elsewhere.
pub fn uniform_weights<T: Real>(mask: &[bool]) -> Vec<T> {
    let n = mask.iter().filter(|&&m| m).count();
    let w = if n == 0 { T::zero() } else { T::one() / count::<T>(n) };
    mask.iter().map(|&m| if m { w } else { T::zero() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_adjacency, normalize};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(teleport: f64, steps: usize) -> AppnpConfig {
        AppnpConfig {
            hidden: 4,
            steps,
            teleport,
            dropout: 0.0,
            learning_rate: 0.05,
            weight_decay: 0.0,
            max_epochs: 50,
            patience: 0,
            seed: 11,
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn two_node_propagation_step() {
        let adj = normalize::<f64>(&[(0, 1), (1, 0)], 2).unwrap();
        let model = AppnpModel::<f64>::init(config(0.5, 1), 1, 2).unwrap();
        let h0 = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let z = model.propagate(&adj, &h0);
        let want = [0.75, 0.25, 0.25, 0.75];
        for (g, w) in z.as_slice().iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-15);
        }
    }

    #[test]
    fn teleport_one_or_zero_steps_is_mlp_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 5, 3);
        let adj = build_adjacency(&[0.0, 0.1, 0.2, 0.3, 0.4], 0.25).unwrap();
        for cfg in [config(1.0, 5), config(0.3, 0)] {
            let model = AppnpModel::<f64>::init(cfg, 3, 2).unwrap();
            let cache = model.forward(&x, &adj, None).unwrap();
            assert_eq!(cache.logits, cache.h0);
        }
    }

    #[test]
    fn loss_examples() {
        let uniform = Matrix::from_rows(&[vec![0.3, 0.3, 0.3], vec![-1.0, -1.0, -1.0]]).unwrap();
        let t = Target {
            labels: &[0, 2],
            weights: &[0.5, 0.5],
            mask: &[true, true],
        };
        let (l, _) = weighted_cross_entropy(&uniform, &t).unwrap();
        assert_abs_diff_eq!(l, 3f64.ln(), epsilon = 1e-15);

        let z = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let t = Target {
            labels: &[0],
            weights: &[1.0],
            mask: &[true],
        };
        let (l, _) = weighted_cross_entropy(&z, &t).unwrap();
        assert_abs_diff_eq!(l, (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.3133, epsilon = 1e-4);

        let confident = Matrix::from_rows(&[vec![800.0, 0.0]]).unwrap();
        let (l, g) = weighted_cross_entropy(&confident, &t).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-300));

        let t0 = Target {
            labels: &[0],
            weights: &[0.0],
            mask: &[true],
        };
        assert!(matches!(weighted_cross_entropy(&z, &t0), Err(Error::ZeroWeights)));
    }

    #[test]
    fn finite_differences_match_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..5 {
            let n = 6;
            let x = random_matrix(&mut rng, n, 3);
            let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let adj = build_adjacency(&vals, 0.4).unwrap();
            let cfg = AppnpConfig {
                weight_decay: 0.01,
                seed: case,
                ..config(0.2, 3)
            };
            let model = AppnpModel::<f64>::init(cfg, 3, 2).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let mask: Vec<bool> = (0..n).map(|i| i != 2).collect();
            let t = Target {
                labels: &labels,
                weights: &weights,
                mask: &mask,
            };
            let cache = model.forward(&x, &adj, None).unwrap();
            let (_, grad) = model.loss_and_gradient(&x, &adj, &cache, &t).unwrap();
            let mut dir = Params::zeros(3, 4, 2);
            for s in dir.slices_mut() {
                for v in s {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let eps = 1e-5;
            let shifted = |sign: f64| {
                let mut m = model.clone();
                m.params.axpy(sign * eps, &dir);
                m.loss(&x, &adj, &t).unwrap()
            };
            let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
            let an = grad.dot(&dir);
            assert!((fd - an).abs() / an.abs().max(1.0) <= 1e-4, "case {case}: {fd} vs {an}");
        }
    }

    #[test]
    fn decay_gradient_in_zero_loss_limit() {
        let x = Matrix::from_rows(&[vec![0.5, -0.5], vec![1.0, 0.2]]).unwrap();
        let adj = SparseAdjacency::identity(2);
        let mut model = AppnpModel::<f64>::init(
            AppnpConfig {
                weight_decay: 0.1,
                ..config(0.5, 2)
            },
            2,
            2,
        )
        .unwrap();
        model.params.b2 = vec![1000.0, 0.0];
        let t = Target {
            labels: &[0, 0],
            weights: &[0.5, 0.5],
            mask: &[true, true],
        };
        let cache = model.forward(&x, &adj, None).unwrap();
        let (_, g) = model.loss_and_gradient(&x, &adj, &cache, &t).unwrap();
        for (gv, w) in g.w1.as_slice().iter().zip(model.params.w1.as_slice()) {
            assert_abs_diff_eq!(*gv, 0.2 * w, epsilon = 1e-12);
        }
        for (gv, w) in g.w2.as_slice().iter().zip(model.params.w2.as_slice()) {
            assert_abs_diff_eq!(*gv, 0.2 * w, epsilon = 1e-12);
        }
    }

    #[test]
    fn teleport_one_ignores_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 6, 3);
        let dense = build_adjacency(&[0.0; 6], 0.0).unwrap();
        let eye = SparseAdjacency::identity(6);
        let model = AppnpModel::<f64>::init(config(1.0, 4), 3, 3).unwrap();
        let t = Target {
            labels: &[0, 1, 2, 0, 1, 2],
            weights: &[1.0; 6],
            mask: &[true; 6],
        };
        let a = model.forward(&x, &dense, None).unwrap();
        let b = model.forward(&x, &eye, None).unwrap();
        assert_eq!(a.logits, b.logits);
        let ga = model.loss_and_gradient(&x, &dense, &a, &t).unwrap().1;
        let gb = model.loss_and_gradient(&x, &eye, &b, &t).unwrap().1;
        assert_eq!(ga, gb);
        assert_eq!(model.predict(&x, &dense).unwrap(), model.predict(&x, &eye).unwrap());
    }

    #[test]
    fn softmax_and_argmax() {
        let z = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let p = softmax_rows(&z);
        assert_abs_diff_eq!(p.get(0, 0), 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(p.get(0, 1), 0.2689, epsilon = 1e-4);
        assert_eq!(argmax_rows(&z), vec![0, 0]);
        let shifted = Matrix::from_rows(&[vec![12.0, 11.0], vec![-3.5, -3.5]]).unwrap();
        assert_eq!(argmax_rows(&shifted), argmax_rows(&z));
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_matrix(&mut rng, 7, 3);
        let vals: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..1.0)).collect();
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let xp = x.select_rows(&perm);
        let vp: Vec<f64> = perm.iter().map(|&i| vals[i]).collect();
        let model = AppnpModel::<f64>::init(config(0.2, 4), 3, 3).unwrap();
        let (la, pa) = model.predict(&x, &build_adjacency(&vals, 0.3).unwrap()).unwrap();
        let (lb, pb) = model.predict(&xp, &build_adjacency(&vp, 0.3).unwrap()).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(lb[new], la[old]);
            for c in 0..3 {
                assert_abs_diff_eq!(pb.get(new, c), pa.get(old, c), epsilon = 1e-12);
            }
        }
        for i in 0..7 {
            assert_abs_diff_eq!(pa.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn training_separates_a_linear_toy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let x = random_matrix(&mut rng, n, 2);
        let labels: Vec<usize> = (0..n)
            .map(|i| usize::from(x.get(i, 0) + 0.5 * x.get(i, 1) > 0.0))
            .collect();
        let weights = vec![1.0 / n as f64; n];
        let train = vec![true; n];
        let adj = SparseAdjacency::identity(n);
        let cfg = AppnpConfig {
            hidden: 8,
            max_epochs: 400,
            learning_rate: 0.05,
            ..config(1.0, 0)
        };
        let problem = WeakProblem {
            x: &x,
            adjacency: &adj,
            labels: &labels,
            n_classes: 2,
            weights: &weights,
            train_mask: &train,
            val_mask: None,
        };
        let (model, report) = train_weak(&cfg, &problem).unwrap();
        assert_eq!(report.epochs, 400);
        let (pred, _) = model.predict(&x, &adj).unwrap();
        assert_eq!(masked_error(&pred, &labels, &weights, &train), 0.0);

        let (again, _) = train_weak(&cfg, &problem).unwrap();
        assert_eq!(again, model);

        let (init, report) = train_weak(&AppnpConfig { max_epochs: 0, ..cfg.clone() }, &problem).unwrap();
        assert_eq!(report.epochs, 0);
        assert_eq!(init.params, AppnpModel::init(cfg, 2, 2).unwrap().params);
    }

    #[test]
    fn early_stopping_keeps_best_validation_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 60;
        let x = random_matrix(&mut rng, n, 3);
        // Pure noise labels: validation error cannot improve for long.
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let train: Vec<bool> = (0..n).map(|i| i < 40).collect();
        let val: Vec<bool> = train.iter().map(|t| !t).collect();
        let mut weights = uniform_weights::<f64>(&train);
        for (w, v) in weights.iter_mut().zip(uniform_weights::<f64>(&val)) {
            *w += v;
        }
        let adj = SparseAdjacency::identity(n);
        let cfg = AppnpConfig {
            hidden: 16,
            max_epochs: 500,
            patience: 5,
            dropout: 0.3,
            ..config(1.0, 0)
        };
        let problem = WeakProblem {
            x: &x,
            adjacency: &adj,
            labels: &labels,
            n_classes: 2,
            weights: &weights,
            train_mask: &train,
            val_mask: Some(&val),
        };
        let (model, report) = train_weak(&cfg, &problem).unwrap();
        assert!(report.early_stopped);
        assert!(report.epochs < 500);
        let best = report.best_val_error.unwrap();
        let (pred, _) = model.predict(&x, &adj).unwrap();
        assert_eq!(masked_error(&pred, &labels, &weights, &val), best);

        let overlapping = WeakProblem {
            val_mask: Some(&train),
            ..problem
        };
        assert!(train_weak(&cfg, &overlapping).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AppnpConfig { teleport: 0.0, ..config(0.1, 1) }.validate().is_err());
        assert!(AppnpConfig { teleport: 1.5, ..config(0.1, 1) }.validate().is_err());
        assert!(AppnpConfig { dropout: 1.0, ..config(0.1, 1) }.validate().is_err());
        assert!(config(1.0, 0).validate().is_ok());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.1, 0, 10), 0.1);
        assert_abs_diff_eq!(cosine_lr(0.1, 5, 10), 0.05, epsilon = 1e-15);
        assert!(cosine_lr(0.1, 9, 10) < 0.01);
    }
}
