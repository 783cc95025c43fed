//! Trust-region subproblem for the inner maximization.
//!
//! Maximizes the quadratic model `q(δ) = gᵀδ + ½ δᵀHδ` over `‖δ‖₂ ≤ r`.
//! Stationarity of the Lagrangian gives `δ(λ) = −(H − λI)⁻¹ g`, and on the
//! boundary `λ` is the root of the secular function
//! `φ(λ) = ‖(D − λI)⁻¹ Qᵀg‖₂ − r` on `(max(0, d_max), ∞)`, where
//! `H = Q D Qᵀ`. The root is bracketed below just right of the pole at
//! `max(0, d_max)` and above by `|d_max| + √n ‖g‖ / r`.

use serde::{Deserialize, Serialize};

use super::{PerturbationResult, SolverError, SolverKind};
use crate::linalg::{norm2, solve_shifted, sym_eig, EigenDecomposition, LinalgError, POLE_TOL};
use crate::model::LossLocalModel;

/// Gradients at or below this norm yield the zero perturbation.
pub const ZERO_GRAD_TOL: f64 = 1e-12;
/// The interior branch requires every Hessian eigenvalue `≤ −PD_TOL`.
pub const PD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrsOptions {
    /// Boundary tolerance on `|‖δ‖ − r|`, scaled by `max(1, r)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl TrsOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SolverError::InvalidOption(format!(
                "trs.tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidOption(
                "trs.max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The secular function with `Qᵀg` cached, so each evaluation is `O(n)`.
#[derive(Debug, Clone)]
pub struct SecularFunction<'a> {
    eigenvalues: &'a [f64],
    coords: Vec<f64>,
    radius: f64,
}

impl<'a> SecularFunction<'a> {
    pub fn new(
        eig: &'a EigenDecomposition,
        grad: &[f64],
        radius: f64,
    ) -> Result<Self, LinalgError> {
        if grad.len() != eig.order() {
            return Err(LinalgError::DimensionMismatch {
                expected: eig.order(),
                got: grad.len(),
            });
        }
        Ok(Self {
            eigenvalues: eig.values(),
            coords: eig.to_eigenbasis(grad),
            radius,
        })
    }

    /// `φ(λ)`, or a pole error when `λ` sits on an eigenvalue.
    pub fn eval(&self, lambda: f64) -> Result<f64, LinalgError> {
        let mut s = 0.0;
        for (&d, &c) in self.eigenvalues.iter().zip(&self.coords) {
            let gap = d - lambda;
            if gap.abs() <= POLE_TOL {
                return Err(LinalgError::Pole {
                    lambda,
                    eigenvalue: d,
                });
            }
            let t = c / gap;
            s += t * t;
        }
        Ok(s.sqrt() - self.radius)
    }

    // Poles with a nonzero numerator read as +∞, which is the one-sided
    // limit from the right that the bracket cares about.
    fn eval_or_pole(&self, lambda: f64) -> f64 {
        let mut s = 0.0;
        for (&d, &c) in self.eigenvalues.iter().zip(&self.coords) {
            let gap = d - lambda;
            if gap.abs() <= POLE_TOL {
                if c != 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            let t = c / gap;
            s += t * t;
        }
        s.sqrt() - self.radius
    }
}

/// `‖(D − λI)⁻¹ Qᵀ g‖₂ − r`.
pub fn secular_value(
    eig: &EigenDecomposition,
    grad: &[f64],
    lambda: f64,
    radius: f64,
) -> Result<f64, LinalgError> {
    SecularFunction::new(eig, grad, radius)?.eval(lambda)
}

/// Upper end of the multiplier bracket: `|d_max| + √n ‖g‖ / r`, widened by
/// a relative `1e-9`.
///
/// With `n = 1` and `d_max ≥ 0` the unwidened bound is exactly the root, and
/// rounding can leave `φ` slightly positive there.
pub fn lambda_upper_bound(d_max: f64, grad_norm: f64, n: usize, radius: f64) -> f64 {
    (d_max.abs() + (n as f64).sqrt() * grad_norm / radius) * (1.0 + BRACKET_MARGIN)
}

const BRACKET_MARGIN: f64 = 1e-9;

/// Bisection for the root of the secular function on `(low, high]`.
///
/// Requires `φ(low⁺) > 0 ≥ φ(high)`. Stops when `|φ(λ)| ≤ tol` or when no
/// float lies strictly inside the bracket.
pub fn bisect_lambda(
    eig: &EigenDecomposition,
    grad: &[f64],
    radius: f64,
    lambda_low: f64,
    lambda_high: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, SolverError> {
    let phi = SecularFunction::new(eig, grad, radius)?;
    bisect(&phi, lambda_low, lambda_high, tol, max_iter).map(|(l, _)| l)
}

fn bisect(
    phi: &SecularFunction<'_>,
    mut low: f64,
    mut high: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize), SolverError> {
    if high - low < tol {
        return Ok((0.5 * (low + high), 0));
    }
    let g_low = phi.eval_or_pole(low);
    let g_high = phi.eval_or_pole(high);
    if !(g_low > 0.0 && g_high <= 0.0) {
        return Err(SolverError::BracketSign {
            low,
            high,
            g_low,
            g_high,
        });
    }
    for it in 1..=max_iter {
        let mid = 0.5 * (low + high);
        let g = phi.eval_or_pole(mid);
        if g.abs() <= tol || mid <= low || mid >= high {
            return Ok((mid, it));
        }
        if g > 0.0 {
            low = mid;
        } else {
            high = mid;
        }
    }
    Err(SolverError::MaxIterations(max_iter))
}

/// Maximizes the local quadratic model of the loss over the ball of radius
/// `radius`.
///
/// The interior stationary point is used only when the model is strictly
/// concave and that point is feasible; otherwise the solution lies on the
/// sphere and `λ ≥ max(0, d_max)` is found by bisection.
pub fn trs_solve(
    local: &LossLocalModel,
    radius: f64,
    opts: &TrsOptions,
) -> Result<PerturbationResult, SolverError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(SolverError::InvalidRadius(radius));
    }
    if local.grad.iter().any(|g| !g.is_finite()) {
        return Err(SolverError::NonFinite("gradient"));
    }
    if !local.hess.is_finite() {
        return Err(SolverError::NonFinite("Hessian"));
    }
    let n = local.grad.len();
    if local.hess.order() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: local.hess.order(),
            got: n,
        }
        .into());
    }

    let grad_norm = norm2(&local.grad);
    if grad_norm <= ZERO_GRAD_TOL {
        return Ok(PerturbationResult::zero(n, SolverKind::Trs));
    }

    let eig = sym_eig(&local.hess)?;
    let d_max = eig.max_value();

    if d_max <= -PD_TOL {
        let delta = solve_shifted(&eig, 0.0, &local.grad)?;
        let delta_norm = norm2(&delta);
        if delta_norm <= radius {
            return Ok(PerturbationResult {
                delta,
                lambda: 0.0,
                delta_norm,
                boundary_active: false,
                iterations: 0,
                solver: SolverKind::Trs,
            });
        }
    }

    let tol = opts.tol * radius.max(1.0);
    let phi = SecularFunction::new(&eig, &local.grad, radius)?;
    let base = d_max.max(0.0);
    let high = lambda_upper_bound(d_max, grad_norm, n, radius);
    let eps = (1e-9 * d_max.abs().max(1.0)).min(0.5 * (high - base));
    let low = base + eps;

    if phi.eval_or_pole(low) <= 0.0 {
        return hard_case(&eig, &local.grad, radius, base, low);
    }

    let (lambda, iterations) = bisect(&phi, low, high, tol, opts.max_iter)?;
    let mut delta = solve_shifted(&eig, lambda, &local.grad)?;
    let mut delta_norm = norm2(&delta);
    if delta_norm > 0.0 {
        // bisection stops within tol of the sphere; land on it exactly
        let scale = radius / delta_norm;
        delta.iter_mut().for_each(|d| *d *= scale);
        delta_norm = norm2(&delta);
    }
    Ok(PerturbationResult {
        delta,
        lambda,
        delta_norm,
        boundary_active: true,
        iterations,
        solver: SolverKind::Trs,
    })
}

// The gradient has (numerically) no weight on the top eigenspace, so the
// secular function never climbs above zero right of the pole. Take the
// minimum-norm solution at `λ = base` and fill the remaining radius along
// the top eigenvector.
fn hard_case(
    eig: &EigenDecomposition,
    grad: &[f64],
    radius: f64,
    base: f64,
    low: f64,
) -> Result<PerturbationResult, SolverError> {
    let mut coords = eig.to_eigenbasis(grad);
    let d = eig.values();
    for (c, &di) in coords.iter_mut().zip(d) {
        let gap = di - base;
        *c = if gap.abs() <= (low - base).max(POLE_TOL) {
            0.0
        } else {
            -*c / gap
        };
    }
    let partial = coords.iter().map(|c| c * c).sum::<f64>();
    let fill = (radius * radius - partial).max(0.0).sqrt();
    coords[0] += fill;
    let delta = eig.from_eigenbasis(&coords);
    let delta_norm = norm2(&delta);
    Ok(PerturbationResult {
        delta,
        lambda: base,
        delta_norm,
        boundary_active: fill > 0.0 || (delta_norm - radius).abs() <= 1e-6 * radius.max(1.0),
        iterations: 0,
        solver: SolverKind::Trs,
    })
}

/// `‖−g − Hδ + λδ‖₂`, the stationarity violation of the quadratic model.
pub fn model_stationarity(local: &LossLocalModel, delta: &[f64], lambda: f64) -> f64 {
    let hd = local.hess.mul_vec(delta);
    local
        .grad
        .iter()
        .zip(&hd)
        .zip(delta)
        .map(|((g, h), d)| (-g - h + lambda * d).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymmetricMatrix;
    use crate::model::{loss_local_model, AffineModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn local(grad: Vec<f64>, hess: SymmetricMatrix) -> LossLocalModel {
        LossLocalModel {
            value: 0.0,
            grad,
            hess,
        }
    }

    // max of gᵀδ + ½δᵀHδ over a polar grid of the disc, 2-D only
    fn grid_max_disc(l: &LossLocalModel, r: f64) -> (f64, [f64; 2]) {
        let q = |d: [f64; 2]| {
            let hd = l.hess.mul_vec(&d);
            l.grad[0] * d[0] + l.grad[1] * d[1] + 0.5 * (d[0] * hd[0] + d[1] * hd[1])
        };
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        for ir in 0..=400 {
            let rho = r * ir as f64 / 400.0;
            for ia in 0..720 {
                let a = ia as f64 * std::f64::consts::TAU / 720.0;
                let d = [rho * a.cos(), rho * a.sin()];
                let v = q(d);
                if v > best.0 {
                    best = (v, d);
                }
            }
        }
        best
    }

    #[test]
    fn zero_gradient_gives_zero() {
        let l = local(vec![0.0, 0.0], SymmetricMatrix::identity(2));
        let res = trs_solve(&l, 0.1, &TrsOptions::default()).unwrap();
        assert_eq!(res.delta, vec![0.0, 0.0]);
        assert_eq!(res.lambda, 0.0);
        assert!(!res.boundary_active);
    }

    #[test]
    fn affine_rank_one_closed_form() {
        let m = AffineModel::new(vec![3.0, 4.0], 0.0).unwrap();
        let l = loss_local_model(&m, &[0.0, 0.0], 0).unwrap();
        let res = trs_solve(&l, 0.1, &TrsOptions::default()).unwrap();
        assert!((res.delta[0] - 0.06).abs() < 1e-9);
        assert!((res.delta[1] - 0.08).abs() < 1e-9);
        assert!((res.lambda - 31.25).abs() < 1e-5);
        assert!(res.boundary_active);
        assert!(model_stationarity(&l, &res.delta, res.lambda) <= 1e-6 * 2.5);

        let (_, grid) = grid_max_disc(&l, 0.1);
        let dist = ((grid[0] - res.delta[0]).powi(2) + (grid[1] - res.delta[1]).powi(2)).sqrt();
        assert!(dist < 0.1 * 0.01);
    }

    #[test]
    fn concave_interior_branch() {
        let l = local(vec![0.1, 0.0], SymmetricMatrix::diagonal(&[-2.0, -1.0]));
        let res = trs_solve(&l, 0.1, &TrsOptions::default()).unwrap();
        assert!((res.delta[0] - 0.05).abs() < 1e-15);
        assert_eq!(res.delta[1], 0.0);
        assert_eq!(res.lambda, 0.0);
        assert!(!res.boundary_active);
        let (_, grid) = grid_max_disc(&l, 0.1);
        assert!((grid[0] - 0.05).abs() < 1e-3 && grid[1].abs() < 1e-3);
    }

    #[test]
    fn concave_but_infeasible_goes_to_boundary() {
        let l = local(vec![1.0, 0.0], SymmetricMatrix::diagonal(&[-2.0, -1.0]));
        let res = trs_solve(&l, 0.1, &TrsOptions::default()).unwrap();
        assert!(res.boundary_active);
        assert!((res.delta_norm - 0.1).abs() <= 1e-8);
        // λ solves 1 / (λ + 2) = 0.1
        assert!((res.lambda - 8.0).abs() < 1e-5);
    }

    #[test]
    fn secular_examples() {
        let zero = sym_eig(&SymmetricMatrix::zeros(2)).unwrap();
        assert_eq!(secular_value(&zero, &[1.0, 0.0], 2.0, 0.5).unwrap(), 0.0);
        let far = secular_value(&zero, &[0.6, 0.8], 1e12, 0.5).unwrap();
        assert!((far + 0.5).abs() <= 1e-9);

        let eig = sym_eig(&SymmetricMatrix::diagonal(&[2.0, 1.0])).unwrap();
        let v = secular_value(&eig, &[1.0, 1.0], 4.0, 0.1).unwrap();
        assert!((v - 0.500_925_212_577_331_5).abs() < 1e-12);
        assert!(secular_value(&eig, &[1.0, 1.0], 2.0, 0.1).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        let close = |a: f64, b: f64| (a - b).abs() <= 2e-9 * b;
        assert!(close(
            lambda_upper_bound(0.0, 1.0, 2, 0.5),
            2.828_427_124_746_19
        ));
        assert!(close(lambda_upper_bound(-3.0, 0.0, 4, 0.2), 3.0));
        let hi = lambda_upper_bound(6.25, 2.5, 2, 0.1);
        assert!(close(hi, 41.605_339_059_327_38));
        assert!(hi > 31.25);
    }

    #[test]
    fn one_dimensional_bound_is_not_the_root() {
        for (d, g, r) in [(0.0, 1.0, 0.3), (0.7, 0.123, 0.17), (1e3, 2.0, 0.05)] {
            let eig = sym_eig(&SymmetricMatrix::diagonal(&[d])).unwrap();
            let hi = lambda_upper_bound(d, g, 1, r);
            assert!(secular_value(&eig, &[g], hi, r).unwrap() <= 0.0);
            let local = LossLocalModel {
                value: 0.0,
                grad: vec![g],
                hess: SymmetricMatrix::diagonal(&[d]),
            };
            let res = trs_solve(&local, r, &TrsOptions::default()).unwrap();
            assert!((res.delta_norm - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn bisection_examples() {
        let zero = sym_eig(&SymmetricMatrix::zeros(2)).unwrap();
        let l = bisect_lambda(&zero, &[1.0, 0.0], 0.5, 0.0, 2.829, 1e-10, 200).unwrap();
        assert!((l - 2.0).abs() <= 1e-8);

        let m = AffineModel::new(vec![3.0, 4.0], 0.0).unwrap();
        let lm = loss_local_model(&m, &[0.0, 0.0], 0).unwrap();
        let eig = sym_eig(&lm.hess).unwrap();
        let low = eig.max_value() + 1e-9 * eig.max_value();
        let high = lambda_upper_bound(eig.max_value(), 2.5, 2, 0.1);
        let l = bisect_lambda(&eig, &lm.grad, 0.1, low, high, 1e-9, 200).unwrap();
        assert!((l - 31.25).abs() <= 1e-6);

        let l = bisect_lambda(&zero, &[1.0, 0.0], 0.5, 1.0, 1.0 + 1e-12, 1e-8, 200).unwrap();
        assert_eq!(l, 0.5 * (1.0 + 1.0 + 1e-12));

        assert!(matches!(
            bisect_lambda(&zero, &[1.0, 0.0], 0.5, 3.0, 4.0, 1e-10, 200),
            Err(SolverError::BracketSign { .. })
        ));
        assert!(matches!(
            bisect_lambda(&zero, &[1.0, 0.0], 0.5, 0.0, 2.829, 1e-14, 3),
            Err(SolverError::MaxIterations(3))
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let l = local(vec![1.0, 0.0], SymmetricMatrix::identity(2));
        assert!(matches!(
            trs_solve(&l, 0.0, &TrsOptions::default()),
            Err(SolverError::InvalidRadius(_))
        ));
        let l = local(vec![f64::NAN, 0.0], SymmetricMatrix::identity(2));
        assert!(matches!(
            trs_solve(&l, 0.1, &TrsOptions::default()),
            Err(SolverError::NonFinite(_))
        ));
    }

    #[test]
    fn hard_case_fills_top_eigenvector() {
        // gradient orthogonal to the top eigenvector of an indefinite H
        let l = local(vec![0.0, 1e-3], SymmetricMatrix::diagonal(&[2.0, -1.0]));
        let res = trs_solve(&l, 0.5, &TrsOptions::default()).unwrap();
        assert!((res.delta_norm - 0.5).abs() < 1e-9);
        assert_eq!(res.lambda, 2.0);
        let (best, _) = grid_max_disc(&l, 0.5);
        let hd = l.hess.mul_vec(&res.delta);
        let q = l.grad[0] * res.delta[0]
            + l.grad[1] * res.delta[1]
            + 0.5 * (res.delta[0] * hd[0] + res.delta[1] * hd[1]);
        assert!(q >= best - 1e-9);
    }

    #[test]
    fn random_instances_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let c: f64 = rng.random_range(-2.0..2.0);
            let h = SymmetricMatrix::from_rows(&[&[a, b], &[b, c]]).unwrap();
            let g = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let r = rng.random_range(0.05..0.5);
            let l = local(g, h);
            let res = trs_solve(&l, r, &TrsOptions::default()).unwrap();
            assert!(res.delta_norm <= r + 1e-9);
            let hd = l.hess.mul_vec(&res.delta);
            let q = l.grad[0] * res.delta[0]
                + l.grad[1] * res.delta[1]
                + 0.5 * (res.delta[0] * hd[0] + res.delta[1] * hd[1]);
            let (best, _) = grid_max_disc(&l, r);
            assert!(q >= best - 1e-9, "trs {q} < grid {best}");
            assert!(res.lambda >= 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn secular_decreases_right_of_top_eigenvalue(
            d in proptest::collection::vec(-3.0f64..3.0, 1..5),
            seed in 0u64..1000,
            r in 0.01f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g: Vec<f64> = d.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let eig = sym_eig(&SymmetricMatrix::diagonal(&d)).unwrap();
            let start = eig.max_value().max(0.0) + 1e-3;
            let mut prev = f64::INFINITY;
            for k in 0..50 {
                let v = secular_value(&eig, &g, start + 0.2 * f64::from(k), r).unwrap();
                proptest::prop_assert!(v <= prev);
                prev = v;
            }
            let hi = lambda_upper_bound(eig.max_value(), norm2(&g), d.len(), r);
            proptest::prop_assert!(secular_value(&eig, &g, hi, r).unwrap() <= 0.0);
        }
    }
}
