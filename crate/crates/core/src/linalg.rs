//! Dense linear-algebra helpers shared by the covariance modules.
//!
//! Vectorization is column-stacking throughout: `vec(A)[i + j*n] = A[(i, j)]`,
//! which is also nalgebra's storage order. With this convention
//! `vec(A X B) = (B^T ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Column-stacking vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for an `n × n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), n * n, "unvec: length {} is not {n}^2", v.len());
    DMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Kronecker sum `I ⊗ A + A ⊗ I`.
pub fn kron_sum(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    eye.kronecker(a) + a.kronecker(&eye)
}

/// Largest absolute deviation from symmetry, relative to the Frobenius norm.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).iter().fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Complex eigenvalues of a general real matrix as `(re, im)` pairs.
///
/// The QR iteration is capped; matrices with heavily repeated spectra can
/// make it stall, in which case a `LinearAlgebra` error is returned.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, schur_iterations(m.nrows()))
        .ok_or_else(|| Error::LinearAlgebra("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Eigenvalues of the Kronecker sum `I ⊗ A + A ⊗ I`, formed as all sums
/// `λ_i + λ_j` of the eigenvalues of `A`.
pub fn kron_sum_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let e = eigenvalues(a)?;
    Ok(e.iter().flat_map(|x| e.iter().map(move |y| (x.0 + y.0, x.1 + y.1))).collect())
}

/// Whether every eigenvalue of `a` has real part below `-tol`.
///
/// Falls back to the matrix sign function when the eigenvalue iteration
/// stalls: `a` is Hurwitz exactly when `sign(a) = -I`.
pub fn is_hurwitz(a: &DMatrix<f64>, tol: f64) -> bool {
    match eigenvalues(a) {
        Ok(e) => e.iter().all(|&(re, _)| re < -tol),
        Err(_) => {
            let shifted = a + DMatrix::<f64>::identity(a.nrows(), a.nrows()) * tol;
            match matrix_sign(&shifted) {
                Some(s) => (s + DMatrix::<f64>::identity(a.nrows(), a.nrows())).amax() < 1e-6,
                None => false,
            }
        }
    }
}

fn schur_iterations(n: usize) -> usize {
    (200 * n).max(1_000)
}

/// Scaled Newton iteration for the matrix sign function.
///
/// Returns `None` if an iterate is singular or the iteration does not settle,
/// which happens when `a` has eigenvalues on or near the imaginary axis.
pub fn matrix_sign(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut q = DMatrix::zeros(a.nrows(), a.ncols());
    sign_iteration(a, &mut q).map(|(s, _)| s)
}

/// Runs the sign iteration on `a` while carrying `q` through
/// `q ← (c q + a⁻¹ q a⁻ᵀ / c) / 2`. On return `q / 2` solves
/// `a X + X aᵀ + q₀ = 0` when `a` is Hurwitz.
fn sign_iteration(a: &DMatrix<f64>, q: &mut DMatrix<f64>) -> Option<(DMatrix<f64>, usize)> {
    let n = a.nrows();
    let mut x = a.clone();
    let mut scaling = true;
    for it in 0..100 {
        let lu = x.clone().lu();
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        let inv = lu.try_inverse()?;
        let c = if scaling {
            let c = (-log_det / n as f64).exp();
            if c.is_finite() && c > 0.0 { c } else { 1.0 }
        } else {
            1.0
        };
        let next = (&x * c + &inv / c) * 0.5;
        *q = (&*q * c + &inv * &*q * inv.transpose() / c) * 0.5;
        let change = (&next - &x).norm() / next.norm().max(f64::MIN_POSITIVE);
        x = next;
        if change < 1e-2 {
            scaling = false;
        }
        if change < 1e-14 * n as f64 {
            return Some((x, it + 1));
        }
    }
    None
}

/// Lyapunov solve `Aᵀ X + X A + Q = 0` through the sign function of `Aᵀ`,
/// followed by residual refinement.
fn solve_lyapunov_sign(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let at = a.transpose();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let mut acc = rhs.clone();
        let (s, _) = sign_iteration(&at, &mut acc)
            .ok_or_else(|| Error::LinearAlgebra("sign iteration did not converge".into()))?;
        let eye = DMatrix::<f64>::identity(at.nrows(), at.nrows());
        if (s + eye).amax() > 1e-6 {
            return Err(Error::LinearAlgebra("Lyapunov operator has eigenvalues off the stable half-plane".into()));
        }
        Ok(acc * 0.5)
    };
    let mut x = solve(q)?;
    for _ in 0..2 {
        let r = a.transpose() * &x + &x * a + q;
        x += solve(&r)?;
    }
    Ok(symmetrize_if(&x, q))
}

fn symmetrize_if(x: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    if asymmetry(q) == 0.0 { symmetrize(x) } else { x.clone() }
}

/// Solves the continuous Lyapunov equation `Aᵀ X + X A + Q = 0` by the
/// Bartels–Stewart method on the real Schur form of `A`.
///
/// Requires `λ_i + λ_j ≠ 0` for all eigenvalue pairs of `A`, which holds
/// when `A` is Hurwitz. `Q` symmetric gives a symmetric `X`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension {
            expected: format!("{n}x{n}"),
            got: format!("A {}x{}, Q {}x{}", a.nrows(), a.ncols(), q.nrows(), q.ncols()),
        });
    }
    let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, schur_iterations(n)) else {
        return check_lyapunov(a, q, solve_lyapunov_sign(a, q)?);
    };
    let (u, t) = schur.unpack();

    // Tᵀ Y + Y T = C with X = U Y Uᵀ.
    let c = -(u.transpose() * q * &u);
    let blocks = schur_blocks(&t);
    let tt = t.transpose();
    let mut y = DMatrix::<f64>::zeros(n, n);

    for &(start, size) in &blocks {
        // rhs = C_J - Σ_{K<J} Y_K T_{K,J}
        let mut rhs = c.columns(start, size).into_owned();
        if start > 0 {
            rhs -= y.columns(0, start) * t.view((0, start), (start, size));
        }
        let tjj = t.view((start, start), (size, size)).into_owned();
        // (I_b ⊗ Tᵀ + T_JJᵀ ⊗ I_n) vec(Y_J) = vec(rhs)
        let eye_b = DMatrix::<f64>::identity(size, size);
        let eye_n = DMatrix::<f64>::identity(n, n);
        let op = eye_b.kronecker(&tt) + tjj.transpose().kronecker(&eye_n);
        let sol = op
            .lu()
            .solve(&vec(&rhs))
            .ok_or_else(|| Error::LinearAlgebra("Lyapunov operator is singular (λ_i + λ_j = 0)".into()))?;
        y.columns_mut(start, size)
            .copy_from(&DMatrix::from_column_slice(n, size, sol.as_slice()));
    }

    check_lyapunov(a, q, &u * y * u.transpose())
}

fn check_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let residual = (a.transpose() * &x + &x * a + q).norm();
    let scale = q.norm() + a.norm() * x.norm();
    if !(residual <= 1e-8 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::LinearAlgebra(format!(
            "Lyapunov residual {residual:e} too large (scale {scale:e})"
        )));
    }
    Ok(x)
}

/// Diagonal block layout `(start, size)` of a quasi-upper-triangular Schur factor.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let tiny = f64::EPSILON * t.norm().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > tiny {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}
