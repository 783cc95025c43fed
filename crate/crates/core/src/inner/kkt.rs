use crate::linalg::norm2;

/// Violation magnitudes of the optimality conditions for
/// `max L(x + δ)` subject to `‖δ‖² ≤ r²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖−∇L(x + δ) + λδ‖₂`
    pub stationarity: f64,
    /// `max(0, ‖δ‖₂ − r)`
    pub primal: f64,
    /// `max(0, −λ)`
    pub dual: f64,
    /// `|λ (‖δ‖₂ − r)|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_residual(
    grad_at_perturbed: &[f64],
    delta: &[f64],
    lambda: f64,
    radius: f64,
) -> KktResiduals {
    assert_eq!(grad_at_perturbed.len(), delta.len(), "dimension mismatch");
    let stationarity = grad_at_perturbed
        .iter()
        .zip(delta)
        .map(|(g, d)| (-g + lambda * d).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = norm2(delta);
    KktResiduals {
        stationarity,
        primal: (norm - radius).max(0.0),
        dual: (-lambda).max(0.0),
        complementarity: (lambda * (norm - radius)).abs(),
    }
}
