//! Zero modes of `H_σ` built from `ker Ω`, conserved quantities and the
//! long-time covariance `σ∞ = M_r (M_l M_r)⁻¹ M_l σ(0)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_drift, vectorize_drift, zero_eigenvalue_multiplicity, CovarianceState, SystemSpec, Units};

pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of the eigenvectors of `Ω` with eigenvalue
/// `≤ tol·‖Ω‖₂`. Every vector is in the kernel when `Ω = 0`.
pub fn kernel_basis(omega_mat: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = omega_mat.nrows();
    let eig = SymmetricEigen::new(linalg::symmetrize(omega_mat));
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= tol * norm).collect();
    let mut basis = DMatrix::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Deterministic sign: largest component positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        basis.set_column(k, &v);
    }
    basis
}

#[derive(Debug, Clone)]
pub struct ZeroModeBasis {
    /// `N × d`, orthonormal columns `y_i` spanning `ker Ω`.
    pub kernel_vecs: DMatrix<f64>,
    /// `4N² × d²`, columns `r_k = h_i ⊗ h_j` with `h_i = (y_i; 0)`.
    pub right_modes: DMatrix<f64>,
    /// `d² × 4N²`, rows `l_k = h̃_i ⊗ h̃_j` with `h̃_i ∝ (Γy_i; y_i)`, unit norm.
    pub left_modes: DMatrix<f64>,
    /// `k ↦ (i, j)`.
    pub pairs: Vec<(usize, usize)>,
    /// 2-norm condition number of `M_l M_r`.
    pub pairing_condition: f64,
}

impl ZeroModeBasis {
    pub fn dim(&self) -> usize {
        self.kernel_vecs.ncols()
    }

    /// `P = M_r (M_l M_r)⁻¹ M_l`, the projection onto the fixed points along
    /// the conserved quantities.
    pub fn projector(&self) -> Result<DMatrix<f64>> {
        let pairing = &self.left_modes * &self.right_modes;
        let inv = pairing
            .try_inverse()
            .ok_or(Error::DegeneratePairing { condition: self.pairing_condition })?;
        Ok(&self.right_modes * inv * &self.left_modes)
    }

    /// Symmetrized flat directions `(h_i⊗h_j + h_j⊗h_i)`, `i ≤ j`, unit norm;
    /// `d(d+1)/2` columns.
    pub fn symmetrized_right_modes(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut cols = Vec::new();
        for i in 0..d {
            for j in i..d {
                let a = self.right_modes.column(i * d + j);
                let b = self.right_modes.column(j * d + i);
                let v = a + b;
                cols.push(&v / v.norm());
            }
        }
        if cols.is_empty() {
            return DMatrix::zeros(self.right_modes.nrows(), 0);
        }
        DMatrix::from_columns(&cols)
    }
}

fn h_vectors(spec: &SystemSpec, kernel: &DMatrix<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let n = spec.n();
    let mut h = Vec::new();
    let mut ht = Vec::new();
    for y in kernel.column_iter() {
        let mut a = DVector::zeros(2 * n);
        a.rows_mut(0, n).copy_from(&y);
        let mut b = DVector::zeros(2 * n);
        b.rows_mut(0, n).copy_from(&(spec.gamma_mat() * y));
        b.rows_mut(n, n).copy_from(&y);
        let bn = b.norm();
        h.push(a);
        ht.push(b / bn);
    }
    (h, ht)
}

/// Assembles `M_r` and `M_l` and verifies the zero-mode identities.
pub fn build_zero_modes(spec: &SystemSpec, kernel_vecs: &DMatrix<f64>) -> Result<ZeroModeBasis> {
    let n = spec.n();
    let d = kernel_vecs.ncols();
    if d == 0 {
        return Err(Error::validation("zero-mode basis needs a nonempty kernel of the trap matrix"));
    }
    if kernel_vecs.nrows() != n {
        return Err(Error::Dimension { expected: format!("{n} x d"), got: format!("{} x {d}", kernel_vecs.nrows()) });
    }
    let om = spec.omega_mat();
    let om_norm = linalg::sym_spectral_norm(om);
    let residual = (om * kernel_vecs).amax();
    if residual > 1e-10 * om_norm.max(f64::MIN_POSITIVE) && residual > 0.0 {
        return Err(Error::validation(format!("kernel vectors violate Ωy = 0 (residual {residual:e})")));
    }

    let h_sigma = vectorize_drift(&build_drift(spec))?;
    let zeros = zero_eigenvalue_multiplicity(&h_sigma)?;
    if zeros != d * d {
        return Err(Error::LinearAlgebra(format!(
            "H_σ has {zeros} zero eigenvalues but the trap kernel predicts {}",
            d * d
        )));
    }

    let (h, ht) = h_vectors(spec, kernel_vecs);
    let m = 4 * n * n;
    let mut right = DMatrix::zeros(m, d * d);
    let mut left = DMatrix::zeros(d * d, m);
    let mut pairs = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let k = i * d + j;
            right.set_column(k, &h[i].kronecker(&h[j]));
            left.set_row(k, &ht[i].kronecker(&ht[j]).transpose());
            pairs.push((i, j));
        }
    }

    let hs_norm = h_sigma.norm();
    let r_res = (&h_sigma * &right).amax();
    let l_res = (&left * &h_sigma).amax();
    if r_res > 1e-10 * hs_norm || l_res > 1e-10 * hs_norm {
        return Err(Error::LinearAlgebra(format!(
            "zero-mode residuals too large (right {r_res:e}, left {l_res:e})"
        )));
    }

    let pairing = &left * &right;
    let condition = linalg::condition_number(&pairing);
    if !(condition < 1e12) {
        return Err(Error::DegeneratePairing { condition });
    }
    Ok(ZeroModeBasis { kernel_vecs: kernel_vecs.clone(), right_modes: right, left_modes: left, pairs, pairing_condition: condition })
}

/// Zero-mode basis for the system, or `None` when `Ω` is positive definite.
pub fn zero_mode_basis(spec: &SystemSpec, tol: f64) -> Result<Option<ZeroModeBasis>> {
    let kernel = kernel_basis(spec.omega_mat(), tol);
    if kernel.ncols() == 0 {
        return Ok(None);
    }
    build_zero_modes(spec, &kernel).map(Some)
}

/// `σ∞ = M_r (M_l M_r)⁻¹ M_l σ(0)`; the zero vector without zero modes.
pub fn asymptotic_covariance(basis: Option<&ZeroModeBasis>, sigma0: &DVector<f64>) -> Result<DVector<f64>> {
    match basis {
        None => Ok(DVector::zeros(sigma0.len())),
        Some(b) => {
            if sigma0.len() != b.right_modes.nrows() {
                return Err(Error::Dimension {
                    expected: format!("length {}", b.right_modes.nrows()),
                    got: sigma0.len().to_string(),
                });
            }
            let pairing = &b.left_modes * &b.right_modes;
            let coeffs = pairing
                .lu()
                .solve(&(&b.left_modes * sigma0))
                .ok_or(Error::DegeneratePairing { condition: b.pairing_condition })?;
            Ok(&b.right_modes * coeffs)
        }
    }
}

/// Long-time covariance of a fluctuation-free system started from `state`.
pub fn predict_asymptotic(spec: &SystemSpec, state: &CovarianceState) -> Result<CovarianceState> {
    let basis = zero_mode_basis(spec, DEFAULT_KERNEL_TOL)?;
    let v = asymptotic_covariance(basis.as_ref(), &state.vec())?;
    CovarianceState::new(linalg::symmetrize(&linalg::unvec(&v, 2 * spec.n())), state.time())
}

/// Conserved quantities `M_l σ`.
pub fn conserved_values(basis: &ZeroModeBasis, sigma: &DVector<f64>) -> DVector<f64> {
    &basis.left_modes * sigma
}

/// Minimum-uncertainty Gaussian with `Δq_i = a_i²`, `Δp_i = ħ²/(4a_i²)`.
pub fn make_gaussian_state(widths: &[f64], units: Units) -> Result<CovarianceState> {
    if widths.is_empty() {
        return Err(Error::validation("at least one width is required"));
    }
    let n = widths.len();
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    for (i, &a) in widths.iter().enumerate() {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::validation(format!("wave-packet width must be positive, got {a}")));
        }
        sigma[(i, i)] = a * a;
        sigma[(n + i, n + i)] = units.hbar * units.hbar / (4.0 * a * a);
    }
    CovarianceState::new(sigma, 0.0)
}
