//! System and bath specifications and the drift matrices of the covariance
//! dynamics `Σ̇ = HΣ + ΣHᵀ + Ξ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Physical constants. Natural units (`ħ = k_B = 1`) by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub hbar: f64,
    pub k_boltzmann: f64,
}

impl Units {
    pub const NATURAL: Units = Units { hbar: 1.0, k_boltzmann: 1.0 };

    pub fn new(hbar: f64, k_boltzmann: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::validation(format!("hbar must be positive, got {hbar}")));
        }
        if !(k_boltzmann > 0.0 && k_boltzmann.is_finite()) {
            return Err(Error::validation(format!("k_boltzmann must be positive, got {k_boltzmann}")));
        }
        Ok(Units { hbar, k_boltzmann })
    }

    /// `βħ = ħ / (k_B T)`; infinite at `T = 0`.
    pub fn beta_hbar(&self, temperature: f64) -> f64 {
        if temperature <= 0.0 {
            f64::INFINITY
        } else {
            self.hbar / (self.k_boltzmann * temperature)
        }
    }

    /// Thermal frequency `k_B T / ħ`.
    pub fn thermal_frequency(&self, temperature: f64) -> f64 {
        self.k_boltzmann * temperature.max(0.0) / self.hbar
    }
}

impl Default for Units {
    fn default() -> Self {
        Units::NATURAL
    }
}

/// `N` coupled oscillators with trap Hessian `Ω` and dissipation matrix `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    omega_mat: DMatrix<f64>,
    gamma_mat: DMatrix<f64>,
    units: Units,
}

impl SystemSpec {
    /// Validates `Ω` symmetric positive semidefinite and `Γ` symmetric positive definite.
    pub fn new(omega_mat: DMatrix<f64>, gamma_mat: DMatrix<f64>, units: Units) -> Result<Self> {
        let n = omega_mat.nrows();
        if n == 0 {
            return Err(Error::validation("oscillator count N must be positive"));
        }
        for (name, m) in [("Omega", &omega_mat), ("Gamma", &gamma_mat)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension {
                    expected: format!("{name} {n}x{n}"),
                    got: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("{name} has non-finite entries")));
            }
        }

        let omega_norm = omega_mat.norm();
        if (&omega_mat - omega_mat.transpose()).amax() > 1e-12 * omega_norm {
            return Err(Error::validation("Omega must be symmetric"));
        }
        let omega_sym = linalg::symmetrize(&omega_mat);
        let omega_min = linalg::min_sym_eigenvalue(&omega_sym);
        if omega_min < -1e-10 * linalg::sym_spectral_norm(&omega_sym) {
            return Err(Error::validation(format!(
                "Omega must be positive semidefinite (min eigenvalue {omega_min:e})"
            )));
        }

        let gamma_norm = gamma_mat.norm();
        if (&gamma_mat - gamma_mat.transpose()).amax() > 1e-12 * gamma_norm {
            return Err(Error::validation("Gamma must be symmetric"));
        }
        let gamma_sym = linalg::symmetrize(&gamma_mat);
        let gamma_min = linalg::min_sym_eigenvalue(&gamma_sym);
        if !(gamma_min > 0.0) {
            return Err(Error::validation(format!(
                "Gamma must be positive definite (min eigenvalue {gamma_min:e})"
            )));
        }

        Ok(SystemSpec { omega_mat: omega_sym, gamma_mat: gamma_sym, units })
    }

    /// Single damped oscillator `q̈ + γq̇ + ω²q = ξ`. `omega` is the trap frequency.
    pub fn oscillator(omega: f64, gamma: f64) -> Result<Self> {
        Self::oscillator_with_units(omega, gamma, Units::NATURAL)
    }

    pub fn oscillator_with_units(omega: f64, gamma: f64, units: Units) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, omega * omega),
            DMatrix::from_element(1, 1, gamma),
            units,
        )
    }

    pub fn n(&self) -> usize {
        self.omega_mat.nrows()
    }

    pub fn omega_mat(&self) -> &DMatrix<f64> {
        &self.omega_mat
    }

    pub fn gamma_mat(&self) -> &DMatrix<f64> {
        &self.gamma_mat
    }

    pub fn units(&self) -> Units {
        self.units
    }

    /// `ΩΓ = ΓΩ` within round-off.
    pub fn commuting(&self) -> bool {
        let c = &self.omega_mat * &self.gamma_mat - &self.gamma_mat * &self.omega_mat;
        c.amax() <= 1e-12 * (self.omega_mat.norm() * self.gamma_mat.norm()).max(f64::MIN_POSITIVE)
    }
}

/// Symmetric `2N × 2N` second-moment matrix at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    sigma: DMatrix<f64>,
    time: f64,
}

impl CovarianceState {
    pub fn new(sigma: DMatrix<f64>, time: f64) -> Result<Self> {
        let dim = sigma.nrows();
        if dim == 0 || dim % 2 != 0 || sigma.ncols() != dim {
            return Err(Error::Dimension {
                expected: "2N x 2N".into(),
                got: format!("{}x{}", sigma.nrows(), sigma.ncols()),
            });
        }
        if !(time >= 0.0) {
            return Err(Error::validation(format!("time must be nonnegative, got {time}")));
        }
        let norm = sigma.norm();
        if (&sigma - sigma.transpose()).amax() > 1e-12 * norm {
            return Err(Error::validation("covariance matrix must be symmetric"));
        }
        let sigma = linalg::symmetrize(&sigma);
        let min_eig = linalg::min_sym_eigenvalue(&sigma);
        if min_eig < -1e-9 * norm {
            return Err(Error::NonPhysical { time, min_eigenvalue: min_eig, norm });
        }
        Ok(CovarianceState { sigma, time })
    }

    /// Symmetrizes without the positivity check; callers own the invariant.
    pub(crate) fn from_raw(sigma: DMatrix<f64>, time: f64) -> Self {
        CovarianceState { sigma: linalg::symmetrize(&sigma), time }
    }

    pub fn from_vec(sigma_vec: &nalgebra::DVector<f64>, time: f64) -> Result<Self> {
        let dim = (sigma_vec.len() as f64).sqrt().round() as usize;
        if dim * dim != sigma_vec.len() {
            return Err(Error::Dimension { expected: "square length".into(), got: sigma_vec.len().to_string() });
        }
        Self::new(linalg::unvec(sigma_vec, dim), time)
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows() / 2
    }

    pub fn vec(&self) -> nalgebra::DVector<f64> {
        linalg::vec(&self.sigma)
    }

    pub fn dq(&self, i: usize) -> f64 {
        self.sigma[(i, i)]
    }

    pub fn dp(&self, i: usize) -> f64 {
        let n = self.n();
        self.sigma[(n + i, n + i)]
    }

    pub fn dqp(&self, i: usize) -> f64 {
        self.sigma[(i, self.n() + i)]
    }

    /// Independent entries (upper triangle, row-major) with their CSV column names.
    pub fn independent_entries(&self) -> Vec<(String, f64)> {
        let n = self.n();
        let label = |k: usize| if k < n { format!("q{}", k + 1) } else { format!("p{}", k - n + 1) };
        let mut out = Vec::with_capacity(n * (2 * n + 1));
        if n == 1 {
            out.push(("dq".to_string(), self.sigma[(0, 0)]));
            out.push(("dp".to_string(), self.sigma[(1, 1)]));
            out.push(("dqp".to_string(), self.sigma[(0, 1)]));
            return out;
        }
        for i in 0..2 * n {
            for j in i..2 * n {
                out.push((format!("s_{}_{}", label(i), label(j)), self.sigma[(i, j)]));
            }
        }
        out
    }

    /// Smallest eigenvalue divided by the Frobenius norm (0 for the zero matrix).
    pub fn min_eigen_ratio(&self) -> f64 {
        let norm = self.sigma.norm();
        if norm == 0.0 {
            0.0
        } else {
            linalg::min_sym_eigenvalue(&self.sigma) / norm
        }
    }
}

/// Ohmic bath parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub temperature: f64,
    /// UV cutoff `Λ`; `None` selects `10³ · max(ω, γ, k_B T/ħ)`.
    pub cutoff: Option<f64>,
    pub enabled: bool,
    /// Formal fluctuation strength `λ` multiplying `Ξ`.
    pub scale: f64,
}

impl BathSpec {
    pub fn new(temperature: f64) -> Self {
        BathSpec { temperature, cutoff: None, enabled: true, scale: 1.0 }
    }

    pub fn disabled() -> Self {
        BathSpec { temperature: 0.0, cutoff: None, enabled: false, scale: 0.0 }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::validation(format!("temperature must be nonnegative, got {}", self.temperature)));
        }
        if let Some(c) = self.cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::validation(format!("cutoff must be positive, got {c}")));
            }
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::validation(format!("fluctuation scale must be nonnegative, got {}", self.scale)));
        }
        Ok(())
    }

    /// Cutoff actually used for frequencies `omega`, damping `gamma`.
    pub fn effective_cutoff(&self, omega: f64, gamma: f64, units: Units) -> f64 {
        self.cutoff
            .unwrap_or_else(|| 1e3 * omega.max(gamma).max(units.thermal_frequency(self.temperature)))
    }

    /// True when the bath contributes a nonzero `Ξ`.
    pub fn active(&self) -> bool {
        self.enabled && self.scale != 0.0
    }
}

/// `H = [[0, I], [−Ω, −Γ]]`.
pub fn build_drift(spec: &SystemSpec) -> DMatrix<f64> {
    let n = spec.n();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, n), (n, n)).fill_with_identity();
    h.view_mut((n, 0), (n, n)).copy_from(&(-spec.omega_mat()));
    h.view_mut((n, n), (n, n)).copy_from(&(-spec.gamma_mat()));
    h
}

/// `H_σ = I ⊗ H + H ⊗ I`, the generator of `σ̇ = H_σ σ` for `σ = vec(Σ)`.
pub fn vectorize_drift(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension { expected: "square H".into(), got: format!("{}x{}", h.nrows(), h.ncols()) });
    }
    Ok(linalg::kron_sum(h))
}

/// Single-oscillator reduction to `(Δq, Δp, Δqp)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction1d {
    /// 3 × 3 generator on `(Δq, Δp, Δqp)`.
    pub h1d: DMatrix<f64>,
    /// 4 × 3 map from `(Δq, Δp, Δqp)` to `vec(Σ)`.
    pub embed: DMatrix<f64>,
    /// 3 × 4 map from `vec(Σ)` to `(Δq, Δp, Δqp)`; averages the two off-diagonal slots.
    pub reduce: DMatrix<f64>,
}

impl Reduction1d {
    pub fn to_reduced(&self, sigma_vec: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.reduce * sigma_vec
    }

    pub fn to_full(&self, reduced: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.embed * reduced
    }
}

/// Embedding and reduction maps between `vec(Σ)` (N = 1) and `(Δq, Δp, Δqp)`.
pub fn reduction_maps() -> (DMatrix<f64>, DMatrix<f64>) {
    // vec(Σ) = (Σqq, Σpq, Σqp, Σpp)
    let embed = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let reduce = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.5, 0.0]);
    (embed, reduce)
}

pub fn reduce_1d(h_sigma: &DMatrix<f64>) -> Result<Reduction1d> {
    if h_sigma.nrows() != 4 || h_sigma.ncols() != 4 {
        let dim = (h_sigma.nrows() as f64).sqrt() as usize;
        return Err(Error::UnsupportedReduction { n: dim / 2 });
    }
    let (embed, reduce) = reduction_maps();
    let h1d = &reduce * h_sigma * &embed;
    Ok(Reduction1d { h1d, embed, reduce })
}

/// Checks that the zero eigenvalue of `H_σ` is semisimple (`rank H = rank H²`)
/// and returns its multiplicity.
pub fn zero_eigenvalue_multiplicity(h_sigma: &DMatrix<f64>) -> Result<usize> {
    let tol = 1e-10;
    let rank1 = linalg::rank(h_sigma, tol);
    let rank2 = linalg::rank(&(h_sigma * h_sigma), tol * tol.sqrt());
    if rank2 < rank1 {
        return Err(Error::DefectiveZeroMode { rank1, rank2 });
    }
    Ok(h_sigma.nrows() - rank1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_spec() -> SystemSpec {
        SystemSpec::new(
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
            DMatrix::identity(2, 2),
            Units::NATURAL,
        )
        .unwrap()
    }

    #[test]
    fn drift_single_oscillator() {
        let h = build_drift(&SystemSpec::oscillator(1.0, 1.0).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]));
        let h = build_drift(&SystemSpec::oscillator(0.0, 1.0).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]));
    }

    #[test]
    fn drift_coupled_pair() {
        let h = build_drift(&pair_spec());
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 1.0, -1.0, 0.0, //
                1.0, -1.0, 0.0, -1.0,
            ],
        );
        assert_eq!(h, expected);
    }

    #[test]
    fn rejects_unphysical_inputs() {
        let bad_gamma = SystemSpec::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), Units::NATURAL);
        assert!(matches!(bad_gamma, Err(Error::Validation { .. })));
        let bad_omega = SystemSpec::new(-DMatrix::identity(1, 1), DMatrix::identity(1, 1), Units::NATURAL);
        assert!(matches!(bad_omega, Err(Error::Validation { .. })));
        let asym = SystemSpec::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            DMatrix::identity(2, 2),
            Units::NATURAL,
        );
        assert!(asym.is_err());
        assert!(Units::new(0.0, 1.0).is_err());
    }

    #[test]
    fn vectorized_drift_of_zero_is_zero() {
        let hs = vectorize_drift(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(hs, DMatrix::zeros(4, 4));
    }

    #[test]
    fn free_particle_vectorized_spectrum() {
        let hs = vectorize_drift(&build_drift(&SystemSpec::oscillator(0.0, 1.0).unwrap())).unwrap();
        let mut re: Vec<f64> = linalg::eigenvalues(&hs).unwrap().iter().map(|e| e.0).collect();
        re.sort_by(|a, b| a.total_cmp(b));
        let expected = [-2.0, -1.0, -1.0, 0.0];
        for (a, b) in re.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{re:?}");
        }
    }

    #[test]
    fn reduced_generator_matches_closed_form() {
        for &(omega, gamma) in &[(1.0, 1.0), (0.0, 2.0), (0.7, 0.3)] {
            let hs = vectorize_drift(&build_drift(&SystemSpec::oscillator(omega, gamma).unwrap())).unwrap();
            let red = reduce_1d(&hs).unwrap();
            let w2 = omega * omega;
            let expected = DMatrix::from_row_slice(
                3,
                3,
                &[0.0, 0.0, 2.0, 0.0, -2.0 * gamma, -2.0 * w2, -w2, 1.0, -gamma],
            );
            assert!((&red.h1d - expected).amax() < 1e-15);
            let v = nalgebra::DVector::from_vec(vec![0.3, -1.2, 2.5]);
            assert!((red.to_reduced(&red.to_full(&v)) - v).amax() == 0.0);
        }
    }

    #[test]
    fn reduction_rejects_coupled_systems() {
        let hs = vectorize_drift(&build_drift(&pair_spec())).unwrap();
        assert!(matches!(reduce_1d(&hs), Err(Error::UnsupportedReduction { n: 2 })));
    }

    #[test]
    fn zero_mode_count_is_kernel_dim_squared() {
        let free = vectorize_drift(&build_drift(&SystemSpec::oscillator(0.0, 1.0).unwrap())).unwrap();
        assert_eq!(zero_eigenvalue_multiplicity(&free).unwrap(), 1);
        let pair = vectorize_drift(&build_drift(&pair_spec())).unwrap();
        assert_eq!(zero_eigenvalue_multiplicity(&pair).unwrap(), 1);
        let trapped = vectorize_drift(&build_drift(&SystemSpec::oscillator(1.0, 1.0).unwrap())).unwrap();
        assert_eq!(zero_eigenvalue_multiplicity(&trapped).unwrap(), 0);
        let two_free = SystemSpec::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), Units::NATURAL).unwrap();
        let hs = vectorize_drift(&build_drift(&two_free)).unwrap();
        assert_eq!(zero_eigenvalue_multiplicity(&hs).unwrap(), 4);
    }

    #[test]
    fn defective_zero_is_reported() {
        let jordan = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(zero_eigenvalue_multiplicity(&jordan), Err(Error::DefectiveZeroMode { .. })));
    }
}
