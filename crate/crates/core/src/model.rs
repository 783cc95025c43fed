//! Affine classifier with a sigmoid link and binary cross-entropy loss.
//!
//! All derivatives are closed form. With `z = wᵀx + b`:
//!
//! ```text
//! L(x)    = max(z, 0) − z·y + ln(1 + e^{−|z|})
//! ∇ₓL     = (σ(z) − y) w
//! ∇²ₓL    = σ′(z) w wᵀ
//! ∇_w L   = (σ(z) − y) x,   ∂L/∂b = σ(z) − y
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, SymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model parameters must be finite")]
    NonFinite,
}

/// `f(x) = wᵀx + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl AffineModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self, ModelError> {
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    fn check(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.weights.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Logit without the dimension check, for hot loops that validated once.
    #[inline]
    pub(crate) fn logit_unchecked(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ′(z) = σ(z)(1 − σ(z))`.
#[inline]
pub fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// `σ″(z) = σ(z)(1 − σ(z))(1 − 2σ(z))`.
#[inline]
pub fn sigmoid_second(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

pub fn predict_logit(model: &AffineModel, x: &[f64]) -> Result<f64, ModelError> {
    model.check(x)?;
    Ok(model.logit_unchecked(x))
}

/// Cross-entropy of label `y` against `σ(z)`, in log-sum-exp form.
#[inline]
pub fn bce_from_logit(z: f64, y: u8) -> f64 {
    let y = f64::from(y);
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn bce_loss(model: &AffineModel, x: &[f64], y: u8) -> Result<f64, ModelError> {
    Ok(bce_from_logit(predict_logit(model, x)?, y))
}

/// Value, input gradient and input Hessian of the loss at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLocalModel {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SymmetricMatrix,
}

pub fn loss_local_model(
    model: &AffineModel,
    x: &[f64],
    y: u8,
) -> Result<LossLocalModel, ModelError> {
    model.check(x)?;
    Ok(local_model_unchecked(model, x, y))
}

#[inline]
pub(crate) fn local_model_unchecked(model: &AffineModel, x: &[f64], y: u8) -> LossLocalModel {
    let z = model.logit_unchecked(x);
    let s = sigmoid(z);
    let residual = s - f64::from(y);
    LossLocalModel {
        value: bce_from_logit(z, y),
        grad: model.weights.iter().map(|w| residual * w).collect(),
        hess: SymmetricMatrix::rank_one(s * (1.0 - s), &model.weights),
    }
}

/// Parameter gradient `(∇_w L, ∂L/∂b)` at input `x`.
pub fn grad_params(model: &AffineModel, x: &[f64], y: u8) -> Result<(Vec<f64>, f64), ModelError> {
    model.check(x)?;
    let residual = sigmoid(model.logit_unchecked(x)) - f64::from(y);
    Ok((x.iter().map(|xi| residual * xi).collect(), residual))
}
