//! Ohmic-bath fluctuation quantities and the inhomogeneous term `Ξ(t)`.

mod green;
mod special;
mod spectral;
mod transient;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

pub use green::{green, ExpTerm, GreenFunction1D, Regime};
pub use special::cos_integral;
pub use spectral::{
    diffusion_coefficient, diffusion_low_t_series, diffusion_zero_t_closed, noise_kernel, nu_bose, nu_coth,
    DiffusionEstimate, LowTSeries, MAX_SERIES_ORDER,
};
pub use transient::FluctuationKernel;

use crate::error::{Error, Result};
use crate::model::{BathSpec, SystemSpec, Units};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationTerms {
    pub delta_qxi: f64,
    pub delta_pxi: f64,
    /// `(γΔ_qξ + Δ_pξ)/γ²`.
    pub combo: f64,
    pub cutoff: f64,
    pub error: f64,
    /// `None` for the stationary limit.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiTime {
    Stationary,
    At(f64),
}

/// `Δ_qξ`, `Δ_pξ` and their finite combination for one damped mode.
pub fn fluctuation_terms(
    gamma: f64,
    omega: f64,
    temperature: f64,
    cutoff: f64,
    when: XiTime,
    units: Units,
) -> Result<FluctuationTerms> {
    let kernel = FluctuationKernel::new(gamma, omega, temperature, cutoff, units)?;
    match when {
        XiTime::Stationary => Ok(kernel.stationary()),
        XiTime::At(t) => kernel.at(t),
    }
}

/// Simultaneous eigenbasis of commuting `Ω` and `Γ`.
#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Orthogonal matrix whose columns are the modes.
    pub basis: DMatrix<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn normal_modes(spec: &SystemSpec) -> Result<NormalModes> {
    let n = spec.n();
    let om = spec.omega_mat();
    let gm = spec.gamma_mat();
    if n == 1 {
        return Ok(NormalModes {
            basis: DMatrix::identity(1, 1),
            omega: vec![om[(0, 0)].max(0.0).sqrt()],
            gamma: vec![gm[(0, 0)]],
        });
    }
    if !spec.commuting() {
        return Err(Error::Unsupported(
            "bath fluctuations for N > 1 need commuting trap and dissipation matrices".into(),
        ));
    }
    let om_norm = om.norm();
    let gm_norm = gm.norm();
    let mix = if om_norm > 0.0 { om / om_norm } else { DMatrix::zeros(n, n) } + gm * (0.618_033_988_749_895 / gm_norm);
    let basis = SymmetricEigen::new(mix).eigenvectors;
    let od = basis.transpose() * om * &basis;
    let gd = basis.transpose() * gm * &basis;
    let off = |m: &DMatrix<f64>| {
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    };
    if off(&od) > 1e-9 * om_norm.max(gm_norm) || off(&gd) > 1e-9 * gm_norm {
        return Err(Error::LinearAlgebra("failed to diagonalize commuting trap and dissipation".into()));
    }
    let zero_tol = 1e-10 * om_norm;
    Ok(NormalModes {
        omega: (0..n)
            .map(|i| if od[(i, i)] <= zero_tol { 0.0 } else { od[(i, i)].sqrt() })
            .collect(),
        gamma: (0..n).map(|i| gd[(i, i)]).collect(),
        basis,
    })
}

fn assemble_xi(modes: &NormalModes, terms: &[FluctuationTerms], scale: f64) -> DMatrix<f64> {
    let n = modes.omega.len();
    let u = &modes.basis;
    let qx = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, terms.iter().map(|t| t.delta_qxi)));
    let px = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, terms.iter().map(|t| 2.0 * t.delta_pxi)));
    let qp = u * qx * u.transpose();
    let pp = u * px * u.transpose();
    let mut xi = DMatrix::zeros(2 * n, 2 * n);
    xi.view_mut((0, n), (n, n)).copy_from(&qp);
    xi.view_mut((n, 0), (n, n)).copy_from(&qp.transpose());
    xi.view_mut((n, n), (n, n)).copy_from(&pp);
    crate::linalg::symmetrize(&(xi * scale))
}

/// Per-mode kernels for a system and bath, sharing one cutoff.
pub struct BathKernels {
    modes: NormalModes,
    kernels: Vec<FluctuationKernel>,
    scale: f64,
}

impl BathKernels {
    pub fn new(spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        bath.validate()?;
        let modes = normal_modes(spec)?;
        let w_max = modes.omega.iter().fold(0.0_f64, |a, &b| a.max(b));
        let g_max = modes.gamma.iter().fold(0.0_f64, |a, &b| a.max(b));
        let cutoff = bath.effective_cutoff(w_max, g_max, spec.units());
        let kernels = modes
            .omega
            .iter()
            .zip(&modes.gamma)
            .map(|(&w, &g)| FluctuationKernel::new(g, w, bath.temperature, cutoff, spec.units()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BathKernels { modes, kernels, scale: bath.scale })
    }

    pub fn cutoff(&self) -> f64 {
        self.kernels[0].cutoff
    }

    pub fn terms(&self, when: XiTime) -> Result<Vec<FluctuationTerms>> {
        self.kernels
            .iter()
            .map(|k| match when {
                XiTime::Stationary => Ok(k.stationary()),
                XiTime::At(t) => k.at(t),
            })
            .collect()
    }

    pub fn xi(&self, when: XiTime) -> Result<DMatrix<f64>> {
        Ok(assemble_xi(&self.modes, &self.terms(when)?, self.scale))
    }

    /// Time after which every mode's decaying transient is below `e^{−40}`.
    fn settle_time(&self) -> f64 {
        self.modes
            .omega
            .iter()
            .zip(&self.modes.gamma)
            .map(|(&w, &g)| {
                let rate = match Regime::classify(g, w) {
                    Regime::Free => g,
                    Regime::Underdamped | Regime::Critical => 0.5 * g,
                    Regime::Overdamped => 0.5 * g - (0.25 * g * g - w * w).sqrt(),
                };
                40.0 / rate
            })
            .fold(0.0, f64::max)
    }

    fn fastest_rate(&self) -> f64 {
        self.modes
            .omega
            .iter()
            .zip(&self.modes.gamma)
            .map(|(&w, &g)| w.max(g))
            .fold(0.0, f64::max)
    }
}

/// Ohmic `Ξ` for the system: `[[0, Δ_qξ],[Δ_qξ, 2Δ_pξ]]` per normal mode,
/// rotated back and scaled by `λ`. Zero when the bath is off.
pub fn build_xi_matrix(spec: &SystemSpec, bath: &BathSpec, when: XiTime) -> Result<DMatrix<f64>> {
    let n = spec.n();
    if !bath.active() {
        bath.validate()?;
        return Ok(DMatrix::zeros(2 * n, 2 * n));
    }
    BathKernels::new(spec, bath)?.xi(when)
}

/// Classical white-noise `Ξ` with `Δ_qξ = 0`, `Δ_pξ = k_B T Γ`.
pub fn classical_xi(spec: &SystemSpec, temperature: f64, scale: f64) -> DMatrix<f64> {
    let n = spec.n();
    let mut xi = DMatrix::zeros(2 * n, 2 * n);
    let kt = spec.units().k_boltzmann * temperature;
    xi.view_mut((n, n), (n, n)).copy_from(&(spec.gamma_mat() * (2.0 * kt * scale)));
    xi
}

/// Sampled `Ξ(t)` with cubic Hermite interpolation; constant after the last sample.
#[derive(Debug, Clone)]
pub struct XiTable {
    times: Vec<f64>,
    values: Vec<DMatrix<f64>>,
    slopes: Vec<DMatrix<f64>>,
}

impl XiTable {
    pub fn new(times: Vec<f64>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InsufficientData("Ξ table needs at least two samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("Ξ table times must be strictly increasing"));
        }
        let k = times.len();
        let mut slopes = Vec::with_capacity(k);
        for i in 0..k {
            let s = if i == 0 {
                (&values[1] - &values[0]) / (times[1] - times[0])
            } else if i == k - 1 {
                (&values[k - 1] - &values[k - 2]) / (times[k - 1] - times[k - 2])
            } else {
                let h0 = times[i] - times[i - 1];
                let h1 = times[i + 1] - times[i];
                ((&values[i + 1] - &values[i]) * (h0 * h0) + (&values[i] - &values[i - 1]) * (h1 * h1))
                    / (h0 * h1 * (h0 + h1))
            };
            slopes.push(s);
        }
        Ok(XiTable { times, values, slopes })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let k = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[k - 1] {
            return self.values[k - 1].clone();
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.values[i] * h00 + &self.slopes[i] * (h10 * h) + &self.values[i + 1] * h01 + &self.slopes[i + 1] * (h11 * h)
    }
}

/// Samples `Ξ(t)` on `[0, t_end]`: geometric from `0.01/Λ`, with spacing capped
/// at `0.05/max(ω, γ)` while the decaying transients last. Sampling stops early
/// once successive values agree to `1e-10` relative.
pub fn transient_xi_table(spec: &SystemSpec, bath: &BathSpec, t_end: f64) -> Result<XiTable> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::validation(format!("t_end must be positive, got {t_end}")));
    }
    let n = spec.n();
    if !bath.active() {
        bath.validate()?;
        let z = DMatrix::zeros(2 * n, 2 * n);
        return XiTable::new(vec![0.0, t_end], vec![z.clone(), z]);
    }
    let kernels = BathKernels::new(spec, bath)?;
    let ratio = 10f64.powf(1.0 / 48.0);
    let cap = 0.05 / kernels.fastest_rate();
    let settle = kernels.settle_time();
    let mut grid = vec![0.0];
    let mut t = 0.01 / kernels.cutoff();
    while t < t_end {
        grid.push(t);
        let geo = t * ratio;
        t = if t < settle { geo.min(t + cap) } else { geo };
    }
    grid.push(t_end);

    let mut times = Vec::with_capacity(grid.len());
    let mut values: Vec<DMatrix<f64>> = Vec::with_capacity(grid.len());
    for chunk in grid.chunks(64) {
        let batch: Vec<DMatrix<f64>> = chunk
            .par_iter()
            .map(|&t| kernels.xi(XiTime::At(t)))
            .collect::<Result<Vec<_>>>()?;
        for (&t, v) in chunk.iter().zip(batch) {
            let converged = t > settle
                && values.last().is_some_and(|prev| (&v - prev).amax() <= 1e-10 * v.amax().max(f64::MIN_POSITIVE));
            times.push(t);
            values.push(v);
            if converged {
                return XiTable::new(times, values);
            }
        }
    }
    XiTable::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: Units = Units::NATURAL;

    #[test]
    fn off_or_zero_scale_gives_zero() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        assert_eq!(build_xi_matrix(&spec, &BathSpec::disabled(), XiTime::Stationary).unwrap(), DMatrix::zeros(2, 2));
        let b = BathSpec::new(1.0).with_scale(0.0);
        assert_eq!(build_xi_matrix(&spec, &b, XiTime::Stationary).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn single_mode_layout() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let bath = BathSpec::new(0.5).with_cutoff(300.0);
        let xi = build_xi_matrix(&spec, &bath, XiTime::Stationary).unwrap();
        let f = fluctuation_terms(1.0, 1.0, 0.5, 300.0, XiTime::Stationary, U).unwrap();
        assert_eq!(xi[(0, 0)], 0.0);
        assert!((xi[(0, 1)] - f.delta_qxi).abs() < 1e-15);
        assert!((xi[(1, 1)] - 2.0 * f.delta_pxi).abs() < 1e-15);
        assert_eq!(xi[(0, 1)], xi[(1, 0)]);
    }

    #[test]
    fn high_temperature_is_classical() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let xi = build_xi_matrix(&spec, &BathSpec::new(100.0), XiTime::Stationary).unwrap();
        let f = fluctuation_terms(1.0, 1.0, 100.0, 1e5, XiTime::Stationary, U).unwrap();
        assert!((f.combo - 100.0).abs() < 1.0);
        // Δ_pξ → γk_BT up to the logarithmic zero-point part.
        assert!((xi[(1, 1)] / 2.0 - 100.0).abs() < 4.0, "{xi}");
    }

    #[test]
    fn normal_mode_assembly_matches_single_modes() {
        let om = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let spec = SystemSpec::new(om, DMatrix::identity(2, 2) * 0.8, U).unwrap();
        let bath = BathSpec::new(0.3).with_cutoff(500.0);
        let xi = build_xi_matrix(&spec, &bath, XiTime::Stationary).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let f0 = fluctuation_terms(0.8, 0.0, 0.3, 500.0, XiTime::Stationary, U).unwrap();
        let f2 = fluctuation_terms(0.8, 2f64.sqrt(), 0.3, 500.0, XiTime::Stationary, U).unwrap();
        let qp = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![f0.delta_qxi, f2.delta_qxi])) * u.transpose();
        let pp = &u
            * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0 * f0.delta_pxi, 2.0 * f2.delta_pxi]))
            * u.transpose();
        assert!((xi.view((0, 2), (2, 2)) - qp).amax() < 1e-12);
        assert!((xi.view((2, 2), (2, 2)) - pp).amax() < 1e-12);
        assert!(crate::linalg::asymmetry(&xi) == 0.0);
    }

    #[test]
    fn noncommuting_is_unsupported() {
        let om = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let gm = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let spec = SystemSpec::new(om, gm, U).unwrap();
        let r = build_xi_matrix(&spec, &BathSpec::new(1.0), XiTime::Stationary);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn classical_source_layout() {
        let spec = SystemSpec::oscillator(0.0, 1.5).unwrap();
        let xi = classical_xi(&spec, 2.0, 1.0);
        assert_eq!(xi[(1, 1)], 2.0 * 1.5 * 2.0);
        assert_eq!(xi[(0, 1)], 0.0);
    }

    #[test]
    fn table_interpolates_and_converges() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let bath = BathSpec::new(1.0).with_cutoff(100.0);
        let table = transient_xi_table(&spec, &bath, 1e3).unwrap();
        assert!(*table.times().last().unwrap() < 1e3, "stops once stationary");
        let kernels = BathKernels::new(&spec, &bath).unwrap();
        for &t in &[0.37, 2.9, 11.3] {
            let exact = kernels.xi(XiTime::At(t)).unwrap();
            let interp = table.at(t);
            let err = (&exact - &interp).amax();
            assert!(err < 1e-4 * exact.amax(), "t={t} err={err:e}");
        }
        let stat = kernels.xi(XiTime::Stationary).unwrap();
        assert!((table.at(1e4) - stat).amax() < 1e-8);
        for v in table.values() {
            assert_eq!(crate::linalg::asymmetry(v), 0.0);
        }
    }
}
