//! Per-sample inner maximization of the loss over a Euclidean ball.
//!
//! Given a fixed model, each solver looks for `δ` with `‖δ‖₂ ≤ r` that makes
//! `L(x + δ)` as large as it can:
//!
//! * [`trs`] maximizes the second-order Taylor model exactly, through an
//!   eigendecomposition of the input Hessian and bisection on the boundary
//!   multiplier.
//! * [`pgd`] runs projected gradient ascent on the true loss.
//! * [`random`] draws a Gaussian direction and rescales it onto the sphere.
//!
//! [`kkt`] measures how far a candidate is from satisfying the optimality
//! conditions of the constrained problem.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;

pub mod kkt;
pub mod pgd;
pub mod random;
pub mod trs;

pub use kkt::{kkt_residual, KktResiduals};
pub use pgd::{pgd_solve, project_ball, InnerObjective, PerturbedSample, PgdOptions, PgdStep};
pub use random::random_perturb;
pub use trs::{
    bisect_lambda, lambda_upper_bound, secular_value, trs_solve, SecularFunction, TrsOptions,
};

/// Which inner solver produced a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "NONE")]
    None,
    #[serde(rename = "TRS")]
    Trs,
    #[serde(rename = "PGD")]
    Pgd,
    #[serde(rename = "RANDOM")]
    Random,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::None,
        SolverKind::Trs,
        SolverKind::Pgd,
        SolverKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::None => "NONE",
            SolverKind::Trs => "TRS",
            SolverKind::Pgd => "PGD",
            SolverKind::Random => "RANDOM",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown solver `{s}` (expected TRS, PGD, RANDOM or NONE)"))
    }
}

/// Outcome of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub delta: Vec<f64>,
    /// Multiplier of the ball constraint; zero when the constraint is slack.
    pub lambda: f64,
    pub delta_norm: f64,
    pub boundary_active: bool,
    pub iterations: usize,
    pub solver: SolverKind,
}

impl PerturbationResult {
    pub fn zero(n: usize, solver: SolverKind) -> Self {
        Self {
            delta: vec![0.0; n],
            lambda: 0.0,
            delta_norm: 0.0,
            boundary_active: false,
            iterations: 0,
            solver,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("radius must be finite and positive, got {0}")]
    InvalidRadius(f64),
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
    #[error("non-finite {0} in inner problem")]
    NonFinite(&'static str),
    #[error("bisection bracket [{low}, {high}] does not straddle a root (g(low) = {g_low}, g(high) = {g_high})")]
    BracketSign {
        low: f64,
        high: f64,
        g_low: f64,
        g_high: f64,
    },
    #[error("bisection did not reach tolerance after {0} iterations")]
    MaxIterations(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
