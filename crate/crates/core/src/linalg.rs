//! Small dense symmetric linear algebra.
//!
//! Everything here is sized for feature counts in the single digits: a
//! cyclic Jacobi eigensolver and solves against a spectrally shifted matrix
//! `A - λI` expressed through its eigendecomposition.

use thiserror::Error;

/// Symmetry tolerance applied when a matrix is constructed.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Distance below which a shift is treated as hitting an eigenvalue.
pub const POLE_TOL: f64 = 1e-14;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix order must be at least 1")]
    EmptyMatrix,
    #[error("expected {expected} entries for an order-{order} matrix, got {got}")]
    BadShape {
        order: usize,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix contains a non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("vector length {got} does not match matrix order {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shift {lambda} coincides with eigenvalue {eigenvalue}")]
    Pole { lambda: f64, eigenvalue: f64 },
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds a matrix from `order * order` row-major entries.
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if order == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        if entries.len() != order * order {
            return Err(LinalgError::BadShape {
                order,
                expected: order * order,
                got: entries.len(),
            });
        }
        for i in 0..order {
            for j in (i + 1)..order {
                let diff = (entries[i * order + j] - entries[j * order + i]).abs();
                if diff > SYMMETRY_TOL {
                    return Err(LinalgError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self { order, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in rows {
            if row.len() != order {
                return Err(LinalgError::BadShape {
                    order,
                    expected: order * order,
                    got: rows.iter().map(|r| r.len()).sum(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(order, entries)
    }

    pub fn zeros(order: usize) -> Self {
        assert!(order > 0, "matrix order must be at least 1");
        Self {
            order,
            entries: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::diagonal(&vec![1.0; order])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.entries[i * m.order + i] = v;
        }
        m
    }

    /// `scale * v vᵀ`, symmetric by construction.
    pub fn rank_one(scale: f64, v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let e = scale * v[i] * v[j];
                m.entries[i * n + j] = e;
                m.entries[j * n + i] = e;
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.order);
        self.entries
            .chunks_exact(self.order)
            .map(|row| dot(row, v))
            .collect()
    }
}

/// Eigenpairs of a symmetric matrix with eigenvalues sorted descending.
///
/// `vectors` is row-major `n x n`; column `k` is the unit eigenvector for
/// `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    order: usize,
    values: Vec<f64>,
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest eigenvalue.
    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// Entry `(i, k)` of the eigenvector matrix Q.
    #[inline]
    pub fn q(&self, i: usize, k: usize) -> f64 {
        self.vectors[i * self.order + k]
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.order).map(|i| self.q(i, k)).collect()
    }

    /// `Qᵀ v`, the coordinates of `v` in the eigenbasis.
    pub fn to_eigenbasis(&self, v: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.vectors[i * n..(i + 1) * n];
            for (o, &q) in out.iter_mut().zip(row) {
                *o += q * vi;
            }
        }
        out
    }

    /// `Q c`, mapping eigenbasis coordinates back.
    pub fn from_eigenbasis(&self, c: &[f64]) -> Vec<f64> {
        self.vectors
            .chunks_exact(self.order)
            .map(|row| dot(row, c))
            .collect()
    }

    /// `Q diag(d) Qᵀ`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.order;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| self.q(i, k) * self.values[k] * self.q(j, k))
                    .sum();
                entries[i * n + j] = s;
                entries[j * n + i] = s;
            }
        }
        SymmetricMatrix { order: n, entries }
    }

    /// `‖Q Qᵀ − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.order;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.q(i, k) * self.q(j, k)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius mass drops to
/// `1e-12 * ‖A‖_F`. Deterministic: the rotation order is fixed.
pub fn sym_eig(a: &SymmetricMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = a.order;
    for i in 0..n {
        for j in 0..n {
            if !a.get(i, j).is_finite() {
                return Err(LinalgError::NonFinite { i, j });
            }
        }
    }

    // work on the symmetrized copy so tiny asymmetries cannot accumulate
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a.get(i, j) + a.get(j, i));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = JACOBI_REL_TOL * a.frobenius_norm();
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&m, n);
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, n, p, q, c, s);
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&m, n) > threshold {
        return Err(LinalgError::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(EigenDecomposition {
        order: n,
        values,
        vectors,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[i * n + j] * m[i * n + j];
            }
        }
    }
    s.sqrt()
}

// Applies Jᵀ M J for the plane rotation in (p, q) that zeroes m[p][q].
fn rotate(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let mkp = m[k * n + p];
        let mkq = m[k * n + q];
        m[k * n + p] = c * mkp - s * mkq;
        m[k * n + q] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[p * n + k];
        let mqk = m[q * n + k];
        m[p * n + k] = c * mpk - s * mqk;
        m[q * n + k] = s * mpk + c * mqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;
}

/// Solves `(A − λI) δ = −g` through the eigendecomposition of `A`:
/// `δ = −Q (D − λI)⁻¹ Qᵀ g`.
pub fn solve_shifted(
    eig: &EigenDecomposition,
    lambda: f64,
    g: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    if g.len() != eig.order {
        return Err(LinalgError::DimensionMismatch {
            expected: eig.order,
            got: g.len(),
        });
    }
    let mut coords = eig.to_eigenbasis(g);
    for (c, &d) in coords.iter_mut().zip(&eig.values) {
        let gap = d - lambda;
        if gap.abs() <= POLE_TOL {
            return Err(LinalgError::Pole {
                lambda,
                eigenvalue: d,
            });
        }
        *c = -*c / gap;
    }
    Ok(eig.from_eigenbasis(&coords))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
