use rand::Rng;
use rand_distr::StandardNormal;

use super::{PerturbationResult, SolverKind};
use crate::linalg::norm2;

/// Gaussian direction rescaled to length `radius`.
///
/// A zero radius returns the zero vector without consuming randomness.
pub fn random_perturb<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> PerturbationResult {
    assert!(n >= 1, "perturbation dimension must be at least 1");
    assert!(radius >= 0.0, "radius must be nonnegative");
    if radius == 0.0 {
        return PerturbationResult::zero(n, SolverKind::Random);
    }
    let mut delta = vec![0.0; n];
    let mut draws = 0;
    let norm = loop {
        draws += 1;
        for d in delta.iter_mut() {
            *d = rng.sample(StandardNormal);
        }
        let norm = norm2(&delta);
        if norm > 0.0 {
            break norm;
        }
    };
    let scale = radius / norm;
    delta.iter_mut().for_each(|d| *d *= scale);
    PerturbationResult {
        delta_norm: norm2(&delta),
        delta,
        lambda: 0.0,
        boundary_active: true,
        iterations: draws,
        solver: SolverKind::Random,
    }
}
