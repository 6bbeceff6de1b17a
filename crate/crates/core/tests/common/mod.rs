#![allow(dead_code)]

use covariance_landscape::model::{build_drift, vectorize_drift};
use covariance_landscape::{CovarianceState, SystemSpec, Units};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

/// `Ω` positive semidefinite with a kernel of dimension `d`, `Γ` positive definite.
pub fn random_system<R: Rng>(rng: &mut R, n: usize, d: usize) -> SystemSpec {
    let q = random_orthogonal(rng, n);
    let eig = DVector::from_fn(n, |i, _| if i < d { 0.0 } else { rng.gen_range(0.3..2.5) });
    let omega = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let omega = (&omega + omega.transpose()) * 0.5;
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.6..0.6));
    let gamma = &b * b.transpose() + DMatrix::identity(n, n) * rng.gen_range(0.3..1.2);
    SystemSpec::new(omega, gamma, Units::NATURAL).expect("valid random system")
}

/// Random physical covariance: `A Aᵀ` plus a minimum-uncertainty floor.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> CovarianceState {
    let a = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-1.0..1.0));
    let s = &a * a.transpose() + DMatrix::identity(2 * n, 2 * n) * 0.25;
    CovarianceState::new(s, 0.0).expect("valid random state")
}

/// `60 / min |Re λ|` over the nonzero eigenvalues of `H_σ`.
pub fn long_time(spec: &SystemSpec) -> f64 {
    let h = build_drift(spec);
    let tol = 1e-9 * vectorize_drift(&h).unwrap().norm();
    let rate = covariance_landscape::linalg::kron_sum_eigenvalues(&h)
        .unwrap()
        .into_iter()
        .filter(|(re, im)| re.hypot(*im) > tol)
        .map(|(re, _)| -re)
        .fold(f64::INFINITY, f64::min);
    60.0 / rate
}
