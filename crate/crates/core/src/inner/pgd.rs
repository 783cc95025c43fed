//! Projected gradient ascent on the true loss.

use serde::{Deserialize, Serialize};

use super::{PerturbationResult, SolverError, SolverKind};
use crate::linalg::{dot, norm2};
use crate::model::{bce_from_logit, sigmoid, AffineModel};

/// Loss of one sample as a function of its perturbation.
pub trait InnerObjective {
    fn dim(&self) -> usize;
    fn loss(&self, delta: &[f64]) -> f64;
    /// Writes `∇_δ L(x + δ)` into `out`.
    fn gradient(&self, delta: &[f64], out: &mut [f64]);
}

/// Cross-entropy of an affine model at `x + δ`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedSample<'a> {
    pub model: &'a AffineModel,
    pub x: &'a [f64],
    pub y: u8,
}

impl PerturbedSample<'_> {
    #[inline]
    fn logit(&self, delta: &[f64]) -> f64 {
        self.model.logit_unchecked(self.x) + dot(&self.model.weights, delta)
    }
}

impl InnerObjective for PerturbedSample<'_> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn loss(&self, delta: &[f64]) -> f64 {
        bce_from_logit(self.logit(delta), self.y)
    }

    fn gradient(&self, delta: &[f64], out: &mut [f64]) {
        let residual = sigmoid(self.logit(delta)) - f64::from(self.y);
        for (o, w) in out.iter_mut().zip(&self.model.weights) {
            *o = residual * w;
        }
    }
}

/// Step rule for the ascent iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgdStep {
    /// `α` is a fixed multiplier of the raw gradient.
    Fixed(f64),
    /// Each step has Euclidean length `fraction · r`, i.e.
    /// `α⁽ᵏ⁾ = fraction · r / ‖∇L(x + δ⁽ᵏ⁾)‖`.
    Normalized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdOptions {
    pub step: PgdStep,
    pub max_iter: usize,
    /// Stop once successive iterates move less than `stop_tol · max(1, r)`.
    pub stop_tol: f64,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            step: PgdStep::Normalized(0.25),
            max_iter: 50,
            stop_tol: 1e-10,
        }
    }
}

impl PgdOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let a = match self.step {
            PgdStep::Fixed(a) | PgdStep::Normalized(a) => a,
        };
        if !(a.is_finite() && a > 0.0) {
            return Err(SolverError::InvalidOption(format!(
                "pgd step must be positive, got {a}"
            )));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidOption(
                "pgd.max_iter must be at least 1".into(),
            ));
        }
        if !(self.stop_tol.is_finite() && self.stop_tol >= 0.0) {
            return Err(SolverError::InvalidOption(format!(
                "pgd.stop_tol must be nonnegative, got {}",
                self.stop_tol
            )));
        }
        Ok(())
    }
}

/// `min(1, r/‖v‖) · v`.
pub fn project_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out, radius);
    out
}

fn project_in_place(v: &mut [f64], radius: f64) {
    let norm = norm2(v);
    if norm > radius {
        let scale = radius / norm;
        v.iter_mut().for_each(|e| *e *= scale);
    }
}

/// Projected gradient ascent from `δ⁰ = 0`.
///
/// The result is never worse than the unperturbed point: if the final
/// iterate has lower loss than `δ = 0`, zero is returned instead. The
/// reported multiplier is the least-squares estimate `max(0, ∇Lᵀδ / ‖δ‖²)`
/// on the boundary and zero inside.
pub fn pgd_solve<O: InnerObjective>(
    objective: &O,
    radius: f64,
    opts: &PgdOptions,
) -> Result<PerturbationResult, SolverError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(SolverError::InvalidRadius(radius));
    }
    let n = objective.dim();
    let stop = opts.stop_tol * radius.max(1.0);
    let mut delta = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        objective.gradient(&delta, &mut grad);
        let gnorm = norm2(&grad);
        if !gnorm.is_finite() {
            return Err(SolverError::NonFinite("gradient"));
        }
        let alpha = match opts.step {
            PgdStep::Fixed(a) => a,
            PgdStep::Normalized(_) if gnorm == 0.0 => 0.0,
            PgdStep::Normalized(f) => f * radius / gnorm,
        };
        for ((nx, d), g) in next.iter_mut().zip(&delta).zip(&grad) {
            *nx = d + alpha * g;
        }
        project_in_place(&mut next, radius);
        let moved = next
            .iter()
            .zip(&delta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut delta, &mut next);
        if moved <= stop {
            break;
        }
    }

    let base = objective.loss(&vec![0.0; n]);
    if objective.loss(&delta) < base {
        let mut res = PerturbationResult::zero(n, SolverKind::Pgd);
        res.iterations = iterations;
        return Ok(res);
    }

    let delta_norm = norm2(&delta);
    let boundary_active = (delta_norm - radius).abs() <= 1e-6 * radius.max(1.0);
    let lambda = if boundary_active {
        objective.gradient(&delta, &mut grad);
        (dot(&grad, &delta) / (delta_norm * delta_norm)).max(0.0)
    } else {
        0.0
    };
    Ok(PerturbationResult {
        delta,
        lambda,
        delta_norm,
        boundary_active,
        iterations,
        solver: SolverKind::Pgd,
    })
}
