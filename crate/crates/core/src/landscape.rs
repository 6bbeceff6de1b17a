//! Landscape decompositions `H_σ = −M·L`, `ζ = −M·F` of the covariance flow,
//! so that `σ̇ = −M ∇𝓛` with `𝓛(σ) = σᵀLσ/2 + Fᵀσ`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_drift, reduction_maps, vectorize_drift, CovarianceState, SystemSpec};
use crate::zeromodes::{zero_mode_basis, ZeroModeBasis, DEFAULT_KERNEL_TOL};

/// Coordinate system a decomposition acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    /// `(Δq, Δp, Δqp)` of a single oscillator.
    Reduced1d,
    /// Full column-stacked `vec(Σ)` for `N` oscillators.
    Full { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeDecomposition {
    pub m: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub f: DVector<f64>,
    pub offset: f64,
    pub coords: Coordinates,
}

/// Residuals of the defining identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionCheck {
    pub min_sym_m: f64,
    pub l_asymmetry: f64,
    pub drift_residual: f64,
    pub source_residual: f64,
}

impl DecompositionCheck {
    pub fn holds(&self) -> bool {
        self.min_sym_m > 0.0 && self.l_asymmetry <= 1e-10 && self.drift_residual <= 1e-9 && self.source_residual <= 1e-9
    }
}

impl LandscapeDecomposition {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `𝓛(σ) = σᵀLσ/2 + Fᵀσ + offset`.
    pub fn value(&self, sigma: &DVector<f64>) -> f64 {
        0.5 * sigma.dot(&(&self.l * sigma)) + self.f.dot(sigma) + self.offset
    }

    pub fn gradient(&self, sigma: &DVector<f64>) -> DVector<f64> {
        &self.l * sigma + &self.f
    }

    /// `σ̇ = −M(Lσ + F)`.
    pub fn flow(&self, sigma: &DVector<f64>) -> DVector<f64> {
        -(&self.m * self.gradient(sigma))
    }

    /// Coordinates of a covariance state in this decomposition's frame.
    pub fn coordinates_of(&self, state: &CovarianceState) -> Result<DVector<f64>> {
        match self.coords {
            Coordinates::Reduced1d => {
                if state.n() != 1 {
                    return Err(Error::UnsupportedReduction { n: state.n() });
                }
                Ok(DVector::from_vec(vec![state.dq(0), state.dp(0), state.dqp(0)]))
            }
            Coordinates::Full { n } => {
                if state.n() != n {
                    return Err(Error::Dimension { expected: format!("N = {n}"), got: format!("N = {}", state.n()) });
                }
                Ok(state.vec())
            }
        }
    }

    pub fn value_at(&self, state: &CovarianceState) -> Result<f64> {
        Ok(self.value(&self.coordinates_of(state)?))
    }

    /// Checks the identities against the drift `h_sigma` and source `zeta`
    /// given in the same coordinates. Residuals are relative.
    pub fn check(&self, h_sigma: &DMatrix<f64>, zeta: &DVector<f64>) -> DecompositionCheck {
        let ml = &self.m * &self.l;
        let drift_residual = (h_sigma + ml).norm() / h_sigma.norm().max(f64::MIN_POSITIVE);
        let source_residual = (zeta + &self.m * &self.f).norm() / (zeta.norm() + 1.0);
        let l_asymmetry = linalg::asymmetry(&self.l);
        DecompositionCheck {
            min_sym_m: linalg::min_sym_eigenvalue(&linalg::symmetrize(&self.m)),
            l_asymmetry,
            drift_residual,
            source_residual,
        }
    }

    /// Projection onto `(Δq, Δp, Δqp)` for single-oscillator decompositions.
    pub fn reduced_quadratic(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        match self.coords {
            Coordinates::Reduced1d => Ok((self.l.clone(), self.f.clone())),
            Coordinates::Full { n: 1 } => {
                let (embed, _) = reduction_maps();
                Ok((embed.transpose() * &self.l * &embed, embed.transpose() * &self.f))
            }
            Coordinates::Full { n } => Err(Error::UnsupportedReduction { n }),
        }
    }

    /// A fixed point `σ*` with `Lσ* + F = 0`, if `F` lies in the range of `L`.
    pub fn stationary_point(&self) -> Option<DVector<f64>> {
        let svd = self.l.clone().svd(true, true);
        let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let mut x = svd.solve(&(-&self.f), tol).ok()?;
        x += svd.solve(&(-&self.f - &self.l * &x), tol).ok()?;
        let resid = (&self.l * &x + &self.f).norm();
        (resid <= 1e-9 * (self.f.norm() + 1.0)).then_some(x)
    }
}

fn check_hurwitz(h_sigma: &DMatrix<f64>, label: &str) -> Result<()> {
    let tol = 1e-10 * h_sigma.norm().max(f64::MIN_POSITIVE);
    if !linalg::is_hurwitz(h_sigma, tol) {
        return Err(Error::NotApplicable(format!(
            "{label} is not Hurwitz; use the explicit free-particle landscape or the zero-mode projection"
        )));
    }
    Ok(())
}

fn solve_source(m: &DMatrix<f64>, zeta: &DVector<f64>) -> Result<DVector<f64>> {
    m.clone()
        .lu()
        .solve(&(-zeta))
        .ok_or_else(|| Error::LinearAlgebra("landscape matrix M is singular".into()))
}

/// Lyapunov gauge: `H_σᵀL + LH_σ = −I`, `M = −H_σL⁻¹`, `MF = −ζ`.
/// The symmetric part of `M` is `L⁻¹L⁻¹/2`.
pub fn decompose_general(h_sigma: &DMatrix<f64>, zeta: &DVector<f64>, coords: Coordinates) -> Result<LandscapeDecomposition> {
    let dim = h_sigma.nrows();
    if zeta.len() != dim {
        return Err(Error::Dimension { expected: format!("ζ of length {dim}"), got: zeta.len().to_string() });
    }
    check_hurwitz(h_sigma, "H_σ")?;
    let l = linalg::symmetrize(&linalg::solve_lyapunov(h_sigma, &DMatrix::identity(dim, dim))?);
    let l_inv = l
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("Lyapunov solution is not positive definite".into()))?
        .inverse();
    let m = -(h_sigma * l_inv);
    let f = solve_source(&m, zeta)?;
    Ok(LandscapeDecomposition { m, l, f, offset: 0.0, coords })
}

/// Decomposition for a drift whose zero eigenvalue is spanned by the zero
/// modes in `basis`. With `P` the zero-mode projector and `Ĥ = H_σ − P`:
/// `ĤᵀL + LĤ = −(I−P)ᵀ(I−P)`, so that `L r_k = 0` for every right zero mode
/// and `d𝓛/dt = −|(I−P)σ|²/2`. `M = −H_σL⁺ + c·Π_ker L` with `c` doubled
/// until the symmetric part of `M` is positive definite.
pub fn decompose_with_zero_modes(
    h_sigma: &DMatrix<f64>,
    basis: &ZeroModeBasis,
    zeta: &DVector<f64>,
    coords: Coordinates,
) -> Result<LandscapeDecomposition> {
    let dim = h_sigma.nrows();
    if basis.right_modes.nrows() != dim || zeta.len() != dim {
        return Err(Error::Dimension {
            expected: format!("zero modes and ζ of length {dim}"),
            got: format!("{} and {}", basis.right_modes.nrows(), zeta.len()),
        });
    }
    let p = basis.projector()?;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let q = &eye - &p;
    let h_hat = h_sigma - &p;
    check_hurwitz(&h_hat, "H_σ − P")?;
    let l = linalg::symmetrize(&linalg::solve_lyapunov(&h_hat, &(q.transpose() * &q))?);

    // Orthogonal projector onto ker L = span of the right zero modes.
    let svd = basis.right_modes.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::LinearAlgebra("SVD of zero modes failed".into()))?;
    let rank = basis.right_modes.ncols();
    let u = u.columns(0, rank).into_owned();
    let pi_ker = &u * u.transpose();
    let l_pinv = (&l + &pi_ker)
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("landscape Hessian has an unexpected null direction".into()))?
        - &pi_ker;

    let base = -(h_sigma * &l_pinv);
    let mut c = linalg::sym_spectral_norm(&linalg::symmetrize(&base)).max(1.0);
    let mut m = &base + &pi_ker * c;
    for _ in 0..200 {
        if linalg::min_sym_eigenvalue(&linalg::symmetrize(&m)) > 0.0 {
            let f = solve_source(&m, zeta)?;
            return Ok(LandscapeDecomposition { m, l, f, offset: 0.0, coords });
        }
        c *= 2.0;
        m = &base + &pi_ker * c;
    }
    Err(Error::LinearAlgebra("could not make the landscape mobility positive definite".into()))
}

/// Landscape of the full covariance flow of `spec` with source `ζ = vec(Ξ)`:
/// the Lyapunov gauge when the drift is Hurwitz, the zero-mode projection
/// otherwise.
pub fn landscape_for_system(spec: &SystemSpec, xi: Option<&DMatrix<f64>>) -> Result<LandscapeDecomposition> {
    let h_sigma = vectorize_drift(&build_drift(spec))?;
    let dim = h_sigma.nrows();
    let zeta = xi.map(linalg::vec).unwrap_or_else(|| DVector::zeros(dim));
    let coords = Coordinates::Full { n: spec.n() };
    match zero_mode_basis(spec, DEFAULT_KERNEL_TOL)? {
        None => decompose_general(&h_sigma, &zeta, coords),
        Some(basis) => decompose_with_zero_modes(&h_sigma, &basis, &zeta, coords),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::validation(format!("damping γ must be positive, got {gamma}")));
    }
    Ok(())
}

/// Explicit bowl for the damped oscillator (`ω ≠ 0`) in `(Δq, Δp, Δqp)`.
pub fn landscape_cho(gamma: f64, omega: f64) -> Result<LandscapeDecomposition> {
    check_gamma(gamma)?;
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::WrongRegime(format!(
            "the oscillator bowl needs ω ≠ 0 (got {omega}); use the free-particle landscape"
        )));
    }
    let (g, w2) = (gamma, omega * omega);
    let w4 = w2 * w2;
    let k = 5.0 * g * g + 48.0 * w2;
    let pre = 4.0 / (g * k);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(3, 3, &[
        1.0,           0.0,             -2.0 * w2 / g,
        0.0,           5.0 * w4,        2.0 * w4 / g,
        2.0 * w2 / g,  -2.0 * w4 / g,   0.5 * w2,
    ]) * pre;
    let a = DVector::from_vec(vec![1.0, -1.0 / (5.0 * w2), g / (2.0 * w2)]);
    let mut l = &a * a.transpose() * (5.0 * g * g * w2);
    l[(1, 1)] += g * g * k / (10.0 * w4);
    l[(2, 2)] += g * g * k / (4.0 * w2);
    Ok(LandscapeDecomposition { m, l, f: DVector::zeros(3), offset: 0.0, coords: Coordinates::Reduced1d })
}

/// Free-particle valley `𝓛 = Δp²/2 + γ²Δqp²/2`, flat along `Δq`.
pub fn landscape_fp(gamma: f64) -> Result<LandscapeDecomposition> {
    check_gamma(gamma)?;
    let g = gamma;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(3, 3, &[
        2.0 / g.powi(3), 0.0,       -2.0 / (g * g),
        0.0,             2.0 * g,   0.0,
        0.0,             -1.0,      1.0 / g,
    ]);
    let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, g * g]));
    Ok(LandscapeDecomposition { m, l, f: DVector::zeros(3), offset: 0.0, coords: Coordinates::Reduced1d })
}

/// Landscape with the bath: the oscillator bowl shifted to its stationary
/// widths, or for `ω = 0` the free valley tilted by `−γ³D₀Δq`.
pub fn landscape_qbm(gamma: f64, omega: f64, delta_qxi: f64, delta_pxi: f64) -> Result<LandscapeDecomposition> {
    check_gamma(gamma)?;
    let g = gamma;
    if omega == 0.0 {
        let mut dec = landscape_fp(g)?;
        let d0 = (g * delta_qxi + delta_pxi) / (g * g);
        dec.f = DVector::from_vec(vec![-g.powi(3) * d0, -delta_pxi / g, -g * g * d0]);
        return Ok(dec);
    }
    let mut dec = landscape_cho(g, omega)?;
    let w2 = omega * omega;
    let star = DVector::from_vec(vec![(g * delta_qxi + delta_pxi) / (g * w2), delta_pxi / g, 0.0]);
    dec.f = -(&dec.l * &star);
    dec.offset = 0.5 * star.dot(&(&dec.l * &star));
    Ok(dec)
}

/// `ζ` in `(Δq, Δp, Δqp)` coordinates for `Ξ = [[0, Δqξ], [Δqξ, 2Δpξ]]`.
pub fn reduced_source(delta_qxi: f64, delta_pxi: f64) -> DVector<f64> {
    DVector::from_vec(vec![0.0, 2.0 * delta_pxi, delta_qxi])
}

pub fn landscape_value(dec: &LandscapeDecomposition, sigma: &DVector<f64>) -> f64 {
    dec.value(sigma)
}

/// Largest increase of `𝓛` between consecutive states (0 when monotone).
pub fn descent_violation(dec: &LandscapeDecomposition, states: &[CovarianceState]) -> Result<f64> {
    let values = states.iter().map(|s| dec.value_at(s)).collect::<Result<Vec<_>>>()?;
    Ok(values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
}

/// Rectangular mesh on `(Δq, Δp)`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridAxes {
    pub dq_min: f64,
    pub dq_max: f64,
    pub dq_points: usize,
    pub dp_min: f64,
    pub dp_max: f64,
    pub dp_points: usize,
}

impl GridAxes {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.dq_min, self.dq_max, self.dp_min, self.dp_max].iter().all(|v| v.is_finite());
        if !finite || self.dq_max <= self.dq_min || self.dp_max <= self.dp_min {
            return Err(Error::validation("grid bounds must be finite with min < max"));
        }
        if self.dq_points < 2 || self.dp_points < 2 {
            return Err(Error::validation("grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    fn coord(min: f64, max: f64, n: usize, k: usize) -> f64 {
        min + (max - min) * k as f64 / (n - 1) as f64
    }
}

/// How `Δqp` is fixed at each grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedCoordinate {
    /// Conditional minimizer of `𝓛` over `Δqp`.
    Minimize,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub axes: GridAxes,
    pub rule: FixedCoordinate,
    /// `(Δq, Δp, 𝓛)` row-major in `Δq`.
    pub rows: Vec<(f64, f64, f64)>,
    /// `𝓛` has no lower bound on the whole covariance space.
    pub unbounded_below: bool,
    /// The conditional minimization over `Δqp` had no minimizer.
    pub unbounded_fixed: bool,
}

/// Evaluates `𝓛` on the `(Δq, Δp)` mesh with `Δqp` fixed by `rule`.
pub fn landscape_grid(dec: &LandscapeDecomposition, axes: GridAxes, rule: FixedCoordinate) -> Result<LandscapeGrid> {
    axes.validate()?;
    let (l, f) = dec.reduced_quadratic()?;
    let scale = l.amax().max(f64::MIN_POSITIVE);
    let l33 = l[(2, 2)];
    let stiff = l33 > 1e-12 * scale;
    let unbounded_fixed = matches!(rule, FixedCoordinate::Minimize) && !stiff && (l[(2, 0)].abs() + l[(2, 1)].abs() + f[2].abs()) > 0.0;
    let unbounded_below = DecompositionView { l: &l, f: &f }.unbounded_below();

    let rows: Vec<(f64, f64, f64)> = (0..axes.dq_points)
        .into_par_iter()
        .flat_map_iter(|i| {
            let dq = GridAxes::coord(axes.dq_min, axes.dq_max, axes.dq_points, i);
            let (l, f) = (&l, &f);
            (0..axes.dp_points).map(move |j| {
                let dp = GridAxes::coord(axes.dp_min, axes.dp_max, axes.dp_points, j);
                let dqp = match rule {
                    FixedCoordinate::Value(v) => v,
                    FixedCoordinate::Minimize if stiff => -(l[(2, 0)] * dq + l[(2, 1)] * dp + f[2]) / l33,
                    FixedCoordinate::Minimize => 0.0,
                };
                let s = DVector::from_vec(vec![dq, dp, dqp]);
                (dq, dp, 0.5 * s.dot(&(l * &s)) + f.dot(&s) + dec.offset)
            })
        })
        .collect();
    Ok(LandscapeGrid { axes, rule, rows, unbounded_below, unbounded_fixed })
}

struct DecompositionView<'a> {
    l: &'a DMatrix<f64>,
    f: &'a DVector<f64>,
}

impl DecompositionView<'_> {
    /// Unbounded when `L` has a negative direction or `F` leaves the range of `L`.
    fn unbounded_below(&self) -> bool {
        let scale = self.l.amax().max(f64::MIN_POSITIVE);
        if linalg::min_sym_eigenvalue(self.l) < -1e-12 * scale {
            return true;
        }
        let svd = self.l.clone().svd(true, true);
        match svd.solve(&(-self.f), 1e-12 * scale) {
            Ok(x) => (self.l * x + self.f).norm() > 1e-9 * (self.f.norm() + 1.0),
            Err(_) => true,
        }
    }
}

#[derive(Serialize)]
struct GridSidecar<'a> {
    axes: &'a GridAxes,
    fixed_coordinate: &'a FixedCoordinate,
    unbounded_below: bool,
    unbounded_fixed: bool,
    #[serde(flatten)]
    extra: &'a toml::Table,
}

impl LandscapeGrid {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dq,dp,L")?;
        for (dq, dp, v) in &self.rows {
            writeln!(w, "{dq:.16e},{dp:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    /// TOML sidecar with the grid axes, the fixed-coordinate rule, the
    /// boundedness flags and caller-supplied parameters.
    pub fn sidecar_toml(&self, params: &toml::Table) -> Result<String> {
        let side = GridSidecar {
            axes: &self.axes,
            fixed_coordinate: &self.rule,
            unbounded_below: self.unbounded_below,
            unbounded_fixed: self.unbounded_fixed,
            extra: params,
        };
        toml::to_string(&side).map_err(|e| Error::Config { key: "sidecar".into(), message: e.to_string() })
    }

    pub fn value_at(&self, dq: f64, dp: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == dq && r.1 == dp).map(|r| r.2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_exact;
    use crate::model::{reduce_1d, Units};
    use crate::zeromodes::make_gaussian_state;

    fn h1d(gamma: f64, omega: f64) -> DMatrix<f64> {
        let spec = SystemSpec::oscillator(omega, gamma).unwrap();
        reduce_1d(&vectorize_drift(&build_drift(&spec)).unwrap()).unwrap().h1d
    }

    #[test]
    fn general_bowl_on_negative_identity() {
        let h = -DMatrix::<f64>::identity(4, 4);
        let dec = decompose_general(&h, &DVector::zeros(4), Coordinates::Full { n: 1 }).unwrap();
        assert!((&dec.l - DMatrix::identity(4, 4) * 0.5).amax() < 1e-14);
        assert!((&dec.m - DMatrix::identity(4, 4) * 2.0).amax() < 1e-14);
    }

    #[test]
    fn general_rejects_free_particle() {
        let spec = SystemSpec::oscillator(0.0, 1.0).unwrap();
        let h = vectorize_drift(&build_drift(&spec)).unwrap();
        assert!(matches!(decompose_general(&h, &DVector::zeros(4), Coordinates::Full { n: 1 }), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn explicit_oscillator_matrices() {
        let dec = landscape_cho(1.0, 1.0).unwrap();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -2.0, 0.0, 5.0, 2.0, 2.0, -2.0, 0.5]) * (4.0 / 53.0);
        assert!((&dec.m - m).amax() < 1e-15);
        #[rustfmt::skip]
        let l = DMatrix::from_row_slice(3, 3, &[5.0, -1.0, 2.5, -1.0, 5.5, -0.5, 2.5, -0.5, 14.5]);
        assert!((&dec.l - l).amax() < 1e-13);
    }

    #[test]
    fn explicit_forms_reconstruct_drift() {
        for &(g, w) in &[(1.0, 1.0), (0.3, 2.0), (4.0, 0.5), (2.0, 1.0)] {
            let dec = landscape_cho(g, w).unwrap();
            let h = h1d(g, w);
            assert!((&h + &dec.m * &dec.l).amax() < 1e-12 * h.amax(), "γ={g} ω={w}");
            assert!(dec.check(&h, &DVector::zeros(3)).holds());
        }
        for &g in &[0.5, 1.0, 3.0] {
            let dec = landscape_fp(g).unwrap();
            let h = h1d(g, 0.0);
            assert!((&h + &dec.m * &dec.l).amax() < 1e-12 * h.amax());
            assert!(dec.check(&h, &DVector::zeros(3)).holds());
        }
        let fp = landscape_fp(1.0).unwrap();
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, -2.0, 0.0, 2.0, 0.0, 0.0, -1.0, 1.0]);
        assert_eq!(fp.m, m);
    }

    #[test]
    fn oscillator_requires_trap() {
        assert!(matches!(landscape_cho(1.0, 0.0), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn free_valley_is_flat_along_dq() {
        let dec = landscape_fp(1.3).unwrap();
        let s = DVector::from_vec(vec![0.4, 0.7, -0.2]);
        let shift = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        for c in [-3.0, 0.5, 11.0] {
            assert!((dec.value(&(&s + &shift * c)) - dec.value(&s)).abs() < 1e-14);
        }
        assert_eq!(dec.value(&DVector::from_vec(vec![5.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn oscillator_value_at_unit_dq() {
        let dec = landscape_cho(1.0, 1.0).unwrap();
        assert_eq!(dec.value(&DVector::zeros(3)), 0.0);
        assert!((dec.value(&DVector::from_vec(vec![1.0, 0.0, 0.0])) - 2.5).abs() < 1e-13);
        // Conditional minimizer over Δqp against a brute-force scan.
        let axes = GridAxes { dq_min: 0.0, dq_max: 1.0, dq_points: 2, dp_min: 0.0, dp_max: 1.0, dp_points: 2 };
        let grid = landscape_grid(&dec, axes, FixedCoordinate::Minimize).unwrap();
        let best = (-20000..=20000)
            .map(|k| dec.value(&DVector::from_vec(vec![1.0, 0.0, k as f64 * 1e-4])))
            .fold(f64::INFINITY, f64::min);
        let v = grid.value_at(1.0, 0.0).unwrap();
        assert!(v <= best + 1e-12 && best - v < 1e-6, "{v} vs {best}");
    }

    #[test]
    fn bath_landscapes() {
        let (g, w, qx, px) = (1.5, 0.8, 0.2, 0.9);
        let dec = landscape_qbm(g, w, qx, px).unwrap();
        let zeta = reduced_source(qx, px);
        assert!(dec.check(&h1d(g, w), &zeta).holds());
        let star = dec.stationary_point().unwrap();
        assert!((star[0] - (g * qx + px) / (g * w * w)).abs() < 1e-12);
        assert!(dec.value(&star).abs() < 1e-12);

        let free = landscape_qbm(g, 0.0, qx, px).unwrap();
        assert!(free.check(&h1d(g, 0.0), &zeta).holds());
        let d0 = (g * qx + px) / (g * g);
        for s in [DVector::from_vec(vec![0.0, 0.0, 0.0]), DVector::from_vec(vec![3.0, -1.0, 2.0])] {
            assert!((free.gradient(&s)[0] + g.powi(3) * d0).abs() < 1e-12);
        }
        assert!(free.stationary_point().is_none());

        assert_eq!(landscape_qbm(g, w, 0.0, 0.0).unwrap().l, landscape_cho(g, w).unwrap().l);
        assert_eq!(landscape_qbm(g, w, 0.0, 0.0).unwrap().f, DVector::zeros(3));
        assert_eq!(landscape_qbm(g, 0.0, 0.0, 0.0).unwrap(), landscape_fp(g).unwrap());
    }

    #[test]
    fn descent_along_exact_flow() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let h = build_drift(&spec);
        let s0 = make_gaussian_state(&[1.7], Units::NATURAL).unwrap();
        let states: Vec<_> = (0..200).map(|k| propagate_exact(&s0, &h, k as f64 * 0.05).unwrap()).collect();
        for dec in [landscape_cho(1.0, 1.0).unwrap(), landscape_for_system(&spec, None).unwrap()] {
            assert!(descent_violation(&dec, &states).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn zero_mode_landscape_for_coupled_pair() {
        let spec = SystemSpec::new(
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
            Units::NATURAL,
        )
        .unwrap();
        let h_sigma = vectorize_drift(&build_drift(&spec)).unwrap();
        let dec = landscape_for_system(&spec, None).unwrap();
        assert!(dec.check(&h_sigma, &DVector::zeros(16)).holds());
        let basis = zero_mode_basis(&spec, DEFAULT_KERNEL_TOL).unwrap().unwrap();
        assert!((&dec.l * &basis.right_modes).amax() < 1e-10 * dec.l.amax());

        let s0 = make_gaussian_state(&[0.6, 1.4], Units::NATURAL).unwrap();
        let h = build_drift(&spec);
        let states: Vec<_> = (0..300).map(|k| propagate_exact(&s0, &h, k as f64 * 0.1).unwrap()).collect();
        assert!(descent_violation(&dec, &states).unwrap() <= 1e-9);
    }

    #[test]
    fn free_particle_projected_matches_flat_valley() {
        let spec = SystemSpec::oscillator(0.0, 2.0).unwrap();
        let dec = landscape_for_system(&spec, None).unwrap();
        let h_sigma = vectorize_drift(&build_drift(&spec)).unwrap();
        assert!(dec.check(&h_sigma, &DVector::zeros(4)).holds());
        let (l, _) = dec.reduced_quadratic().unwrap();
        assert!(l.column(0).amax() < 1e-12 * l.amax());
    }

    #[test]
    fn grid_flags_and_layout() {
        let axes = GridAxes { dq_min: -1.0, dq_max: 3.0, dq_points: 5, dp_min: 0.0, dp_max: 2.0, dp_points: 3 };
        let fp = landscape_grid(&landscape_fp(1.0).unwrap(), axes, FixedCoordinate::Minimize).unwrap();
        assert_eq!(fp.rows.len(), 15);
        assert!(!fp.unbounded_below && !fp.unbounded_fixed);
        for &(_, dp, v) in &fp.rows {
            if dp == 0.0 {
                assert_eq!(v, 0.0);
            }
        }
        let tilted = landscape_grid(&landscape_qbm(1.0, 0.0, 0.1, 0.5).unwrap(), axes, FixedCoordinate::Minimize).unwrap();
        assert!(tilted.unbounded_below);
        let mut buf = Vec::new();
        fp.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("dq,dp,L\n-1.0000000000000000e0,"));
        let mut params = toml::Table::new();
        params.insert("gamma".into(), toml::Value::Float(1.0));
        let side = fp.sidecar_toml(&params).unwrap();
        assert!(side.contains("gamma = 1.0") && side.contains("fixed_coordinate = \"minimize\""));
    }
}
