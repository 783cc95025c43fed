//! Adversarially robust training of affine binary classifiers.
//!
//! The inner maximization over a Euclidean ball of input perturbations is
//! solved per sample by a trust-region subproblem ([`inner::trs`]),
//! projected gradient ascent ([`inner::pgd`]) or a random direction
//! ([`inner::random`]). Trained models are audited with the independence,
//! separation and sufficiency gaps of [`fairness`].

pub mod data;
pub mod experiment;
pub mod fairness;
pub mod inner;
pub mod linalg;
pub mod model;
pub mod trainer;
