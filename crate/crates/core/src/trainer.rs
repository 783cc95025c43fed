//! Full-batch gradient descent on `(w, b)` with per-sample inner perturbations.
//!
//! Every epoch re-solves the inner problem for each sample at the current
//! weights, then takes one step on the mean parameter gradient evaluated at
//! the perturbed inputs. The perturbation is held constant while
//! differentiating with respect to the parameters.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TabularDataset;
use crate::inner::{
    kkt_residual, pgd_solve, random_perturb, trs_solve, PerturbedSample, PgdOptions, SolverError,
    SolverKind, TrsOptions,
};
use crate::linalg::dot;
use crate::model::{bce_from_logit, local_model_unchecked, sigmoid, AffineModel};

/// Samples per work unit when inner solves run on several threads. Chunk
/// sums are combined in order, so results do not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("epoch {epoch}, sample {sample}: {source}")]
    Solver {
        epoch: usize,
        sample: usize,
        #[source]
        source: SolverError,
    },
    #[error("training diverged at epoch {epoch} (non-finite loss or weights)")]
    Diverged { epoch: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl TrainError {
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            TrainError::Solver { .. } | TrainError::Diverged { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Perturbation radius; zero trains the nonrobust model.
    pub radius: f64,
    pub solver: SolverKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per parameter update; `None` is full-batch gradient descent.
    /// Minibatches are drawn from a seeded shuffle of the training set.
    pub batch_size: Option<usize>,
    /// Coefficient of `½‖w‖²`; the bias is not regularized.
    pub l2_coeff: f64,
    /// Seeds the random solver and the minibatch order.
    pub seed: u64,
    pub pgd: PgdOptions,
    pub trs: TrsOptions,
    /// Worker threads for the inner solves.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            radius: 0.0,
            solver: SolverKind::None,
            learning_rate: 0.01,
            epochs: 10,
            batch_size: Some(1),
            l2_coeff: 0.0,
            seed: 0,
            pgd: PgdOptions::default(),
            trs: TrsOptions::default(),
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return bad(format!(
                "radius must be finite and nonnegative, got {}",
                self.radius
            ));
        }
        if self.solver == SolverKind::None && self.radius > 0.0 {
            return bad(format!(
                "solver NONE cannot be combined with radius {}",
                self.radius
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.l2_coeff.is_finite() && self.l2_coeff >= 0.0) {
            return bad(format!(
                "l2_coeff must be nonnegative, got {}",
                self.l2_coeff
            ));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        self.pgd
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        self.trs
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    /// Mean loss at the unperturbed inputs, before this epoch's update.
    pub mean_loss: f64,
    /// Mean loss at the perturbed inputs, before this epoch's update.
    pub mean_perturbed_loss: f64,
    pub seconds: f64,
    /// Mean KKT stationarity against the true perturbed gradient (TRS only).
    pub mean_kkt_stationarity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Partial {
    grad_w: Vec<f64>,
    grad_b: f64,
    loss: f64,
    perturbed_loss: f64,
    kkt: f64,
}

impl Partial {
    fn zeros(n: usize) -> Self {
        Self {
            grad_w: vec![0.0; n],
            grad_b: 0.0,
            loss: 0.0,
            perturbed_loss: 0.0,
            kkt: 0.0,
        }
    }

    fn merge(&mut self, other: &Partial) {
        for (a, b) in self.grad_w.iter_mut().zip(&other.grad_w) {
            *a += b;
        }
        self.grad_b += other.grad_b;
        self.loss += other.loss;
        self.perturbed_loss += other.perturbed_loss;
        self.kkt += other.kkt;
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one (epoch, sample) pair, independent of worker layout.
fn sample_rng(seed: u64, epoch: usize, sample: usize) -> Pcg64Mcg {
    let key = splitmix64(splitmix64(seed ^ splitmix64(epoch as u64)) ^ sample as u64);
    Pcg64Mcg::seed_from_u64(key)
}

struct EpochContext<'a> {
    model: &'a AffineModel,
    data: &'a TabularDataset,
    cfg: &'a TrainConfig,
    epoch: usize,
}

impl EpochContext<'_> {
    fn perturbation(&self, i: usize) -> Result<(Vec<f64>, f64), SolverError> {
        let x = self.data.row(i);
        let y = self.data.labels()[i];
        let r = self.cfg.radius;
        let n = x.len();
        if r == 0.0 {
            return Ok((vec![0.0; n], 0.0));
        }
        match self.cfg.solver {
            SolverKind::None => Ok((vec![0.0; n], 0.0)),
            SolverKind::Trs => {
                let local = local_model_unchecked(self.model, x, y);
                let res = trs_solve(&local, r, &self.cfg.trs)?;
                let z = self.model.logit_unchecked(x) + dot(&self.model.weights, &res.delta);
                let residual = sigmoid(z) - f64::from(y);
                let grad: Vec<f64> = self.model.weights.iter().map(|w| residual * w).collect();
                let kkt = kkt_residual(&grad, &res.delta, res.lambda, r).stationarity;
                Ok((res.delta, kkt))
            }
            SolverKind::Pgd => {
                let sample = PerturbedSample {
                    model: self.model,
                    x,
                    y,
                };
                Ok((pgd_solve(&sample, r, &self.cfg.pgd)?.delta, 0.0))
            }
            SolverKind::Random => {
                let mut rng = sample_rng(self.cfg.seed, self.epoch, i);
                Ok((random_perturb(&mut rng, n, r).delta, 0.0))
            }
        }
    }

    fn accumulate(&self, samples: &[usize]) -> Result<Partial, TrainError> {
        let mut acc = Partial::zeros(self.data.n_features());
        for &i in samples {
            let (delta, kkt) = self.perturbation(i).map_err(|source| TrainError::Solver {
                epoch: self.epoch,
                sample: i,
                source,
            })?;
            let x = self.data.row(i);
            let y = self.data.labels()[i];
            let z = self.model.logit_unchecked(x);
            let zp = z + dot(&self.model.weights, &delta);
            let residual = sigmoid(zp) - f64::from(y);
            for ((g, xi), di) in acc.grad_w.iter_mut().zip(x).zip(&delta) {
                *g += residual * (xi + di);
            }
            acc.grad_b += residual;
            acc.loss += bce_from_logit(z, y);
            acc.perturbed_loss += bce_from_logit(zp, y);
            acc.kkt += kkt;
        }
        Ok(acc)
    }
}

/// Trains from zero weights and returns the final model with per-epoch stats.
pub fn train(
    data: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<(AffineModel, TrainHistory), TrainError> {
    cfg.validate()?;
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| TrainError::ThreadPool(e.to_string()))?,
        )
    } else {
        None
    };

    let m = data.len();
    let n = data.n_features();
    let batch = cfg.batch_size.unwrap_or(m).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    let mut model = AffineModel::zeros(n);
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        if batch < m {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(
                cfg.seed ^ epoch as u64,
            )));
        }
        let mut epoch_total = Partial::zeros(n);
        for idx in order.chunks(batch) {
            let ctx = EpochContext {
                model: &model,
                data,
                cfg,
                epoch,
            };
            let total = match &pool {
                None => ctx.accumulate(idx)?,
                Some(pool) => {
                    let chunks: Vec<Partial> = pool.install(|| {
                        idx.par_chunks(CHUNK)
                            .map(|c| ctx.accumulate(c))
                            .collect::<Result<_, _>>()
                    })?;
                    let mut total = Partial::zeros(n);
                    chunks.iter().for_each(|p| total.merge(p));
                    total
                }
            };
            let inv = 1.0 / idx.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&total.grad_w) {
                *w -= cfg.learning_rate * (g * inv + cfg.l2_coeff * *w);
            }
            model.bias -= cfg.learning_rate * total.grad_b * inv;
            epoch_total.merge(&total);
        }
        let seconds = start.elapsed().as_secs_f64();

        let inv_m = 1.0 / m as f64;
        let mean_loss = epoch_total.loss * inv_m;
        let mean_perturbed_loss = epoch_total.perturbed_loss * inv_m;
        if !(mean_loss.is_finite() && mean_perturbed_loss.is_finite() && model.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        history.epochs.push(EpochRecord {
            mean_loss,
            mean_perturbed_loss,
            seconds,
            mean_kkt_stationarity: (cfg.solver == SolverKind::Trs && cfg.radius > 0.0)
                .then_some(epoch_total.kkt * inv_m),
        });
    }
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub preds: Vec<u8>,
}

/// Predicts `ŷ = 1` iff `σ(wᵀx + b) ≥ threshold`.
pub fn evaluate(
    model: &AffineModel,
    data: &TabularDataset,
    threshold: f64,
) -> Result<Evaluation, TrainError> {
    if model.n_features() != data.n_features() {
        return Err(TrainError::DimensionMismatch {
            expected: model.n_features(),
            got: data.n_features(),
        });
    }
    let preds: Vec<u8> = data
        .features()
        .iter()
        .map(|x| u8::from(sigmoid(model.logit_unchecked(x)) >= threshold))
        .collect();
    let correct = preds
        .iter()
        .zip(data.labels())
        .filter(|(p, y)| p == y)
        .count();
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        correct,
        preds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub solver: SolverKind,
    pub radius: f64,
    pub mean_epoch_seconds: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn mean_seconds(&self, solver: SolverKind, radius: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.solver == solver && r.radius == radius)
            .map(|r| r.mean_epoch_seconds)
    }

    /// PGD over TRS mean epoch time at `radius`, from unrounded values.
    pub fn pgd_trs_ratio(&self, radius: f64) -> Option<f64> {
        let pgd = self.mean_seconds(SolverKind::Pgd, radius)?;
        let trs = self.mean_seconds(SolverKind::Trs, radius)?;
        (trs > 0.0).then(|| pgd / trs)
    }
}

/// Single-threaded epoch timings for each solver at each radius.
///
/// `NONE` is timed once at radius 0.
pub fn benchmark_epochs(
    data: &TabularDataset,
    radii: &[f64],
    solvers: &[SolverKind],
    base: &TrainConfig,
) -> Result<TimingTable, TrainError> {
    if solvers.is_empty() || (radii.is_empty() && solvers.iter().any(|&s| s != SolverKind::None)) {
        return Err(TrainError::Config(
            "benchmark needs at least one solver and one radius".into(),
        ));
    }
    let mut rows = Vec::new();
    for &solver in solvers {
        let cell_radii: Vec<f64> = if solver == SolverKind::None {
            vec![0.0]
        } else {
            radii.to_vec()
        };
        for radius in cell_radii {
            let cfg = TrainConfig {
                radius,
                solver,
                threads: 1,
                ..base.clone()
            };
            let (_, history) = train(data, &cfg)?;
            rows.push(TimingRow {
                solver,
                radius,
                mean_epoch_seconds: history.mean_epoch_seconds(),
                epochs: cfg.epochs,
            });
        }
    }
    Ok(TimingTable { rows })
}
