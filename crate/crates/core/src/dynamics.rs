//! Time evolution of the covariance: exact propagation without fluctuations
//! and adaptive Runge–Kutta integration of `Σ̇ = HΣ + ΣHᵀ + Ξ(t)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::bath::XiTable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CovarianceState;
use crate::ode::{self, OdeOptions, OdeStats};

/// `e^{Ht} Σ e^{Hᵀt}`, symmetrized, at time `state.time() + t`.
pub fn propagate_exact(state: &CovarianceState, h: &DMatrix<f64>, t: f64) -> Result<CovarianceState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::validation(format!("propagation time must be nonnegative, got {t}")));
    }
    check_drift(state, h)?;
    let e = (h * t).exp();
    let sigma = &e * state.sigma() * e.transpose();
    Ok(CovarianceState::from_raw(sigma, state.time() + t))
}

fn check_drift(state: &CovarianceState, h: &DMatrix<f64>) -> Result<()> {
    let dim = state.sigma().nrows();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::Dimension { expected: format!("{dim}x{dim} drift"), got: format!("{}x{}", h.nrows(), h.ncols()) });
    }
    Ok(())
}

/// The inhomogeneous term `Ξ(t)`.
#[derive(Debug, Clone)]
pub enum InhomogeneitySource {
    Off,
    Stationary(DMatrix<f64>),
    Transient(XiTable),
}

impl InhomogeneitySource {
    pub fn mode(&self) -> &'static str {
        match self {
            InhomogeneitySource::Off => "off",
            InhomogeneitySource::Stationary(_) => "stationary",
            InhomogeneitySource::Transient(_) => "transient",
        }
    }

    pub fn xi_at(&self, t: f64, dim: usize) -> DMatrix<f64> {
        match self {
            InhomogeneitySource::Off => DMatrix::zeros(dim, dim),
            InhomogeneitySource::Stationary(xi) => xi.clone(),
            InhomogeneitySource::Transient(table) => table.at(t),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let bad = |m: &DMatrix<f64>| m.nrows() != dim || m.ncols() != dim || linalg::asymmetry(m) > 1e-12;
        let ok = match self {
            InhomogeneitySource::Off => true,
            InhomogeneitySource::Stationary(xi) => !bad(xi),
            InhomogeneitySource::Transient(table) => !table.values().iter().any(bad),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("Ξ must be a symmetric {dim}x{dim} matrix")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Also record every accepted step, not only the requested times.
    pub record_steps: bool,
    pub h_max: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { rtol: 1e-9, atol: 1e-12, record_steps: false, h_max: None }
    }
}

impl IntegrateOptions {
    /// Relative tolerance `tol`, absolute `tol·10⁻³`.
    pub fn with_tol(tol: f64) -> Self {
        IntegrateOptions { rtol: tol, atol: tol * 1e-3, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub integrator: &'static str,
    pub rtol: f64,
    pub atol: f64,
    pub source: &'static str,
    pub stats: OdeStats,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceState>,
    pub meta: TrajectoryMeta,
}

/// Samples `propagate_exact` at `outputs`.
pub fn exact_trajectory(state: &CovarianceState, h: &DMatrix<f64>, outputs: &[f64]) -> Result<Trajectory> {
    let states = outputs
        .iter()
        .map(|&t| propagate_exact(state, h, t - state.time()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: outputs.to_vec(),
        states,
        meta: TrajectoryMeta { integrator: "matrix-exponential", rtol: 0.0, atol: 0.0, source: "off", stats: OdeStats::default() },
    })
}

/// Integrates from `state` and samples at `outputs` (strictly increasing,
/// `≥ state.time()`). Fails with a non-physical error when `Σ` loses
/// positivity beyond `−1e-8·‖Σ‖`.
pub fn integrate(
    state: &CovarianceState,
    h: &DMatrix<f64>,
    source: &InhomogeneitySource,
    outputs: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::validation("integration tolerances must be positive"));
    }
    check_drift(state, h)?;
    let dim = state.sigma().nrows();
    source.check(dim)?;
    let ht = h.transpose();
    let rhs = |t: f64, y: &DVector<f64>| {
        let s = linalg::unvec(y, dim);
        let mut ds = h * &s + &s * &ht;
        match source {
            InhomogeneitySource::Off => {}
            InhomogeneitySource::Stationary(xi) => ds += xi,
            InhomogeneitySource::Transient(table) => ds += table.at(t),
        }
        linalg::vec(&ds)
    };
    let project = |y: &mut DVector<f64>| {
        let s = linalg::symmetrize(&linalg::unvec(y, dim));
        y.copy_from(&linalg::vec(&s));
    };
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_max: opts.h_max,
        ..Default::default()
    };
    let sol = ode::solve(rhs, state.time(), state.vec(), outputs, &ode_opts, opts.record_steps, project)?;
    let mut states = Vec::with_capacity(sol.times.len());
    let mut scale = state.sigma().norm();
    for (&t, v) in sol.times.iter().zip(&sol.values) {
        let sigma = linalg::unvec(v, dim);
        let norm = sigma.norm();
        scale = scale.max(norm);
        let min_eig = linalg::min_sym_eigenvalue(&sigma);
        if min_eig < -(1e-8 * scale + 10.0 * opts.atol) {
            return Err(Error::NonPhysical { time: t, min_eigenvalue: min_eig, norm });
        }
        states.push(CovarianceState::from_raw(sigma, t));
    }
    Ok(Trajectory {
        times: sol.times,
        states,
        meta: TrajectoryMeta {
            integrator: "dormand-prince-5(4)",
            rtol: opts.rtol,
            atol: opts.atol,
            source: source.mode(),
            stats: sol.stats,
        },
    })
}

impl Trajectory {
    /// `Δq_i` at every sample.
    pub fn dq(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.dq(i)).collect()
    }

    pub fn last(&self) -> Option<&CovarianceState> {
        self.states.last()
    }

    /// CSV with header `t,<independent entries>`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(first) = self.states.first() else {
            return writeln!(w, "t");
        };
        let names: Vec<String> = first.independent_entries().into_iter().map(|(n, _)| n).collect();
        writeln!(w, "t,{}", names.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for (_, v) in s.independent_entries() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `Δq₁` over the trailing `window` fraction of the
/// trajectory's time span.
pub fn late_time_slope(traj: &Trajectory, window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::validation(format!("window fraction must be in (0, 1], got {window}")));
    }
    let (Some(&t0), Some(&t1)) = (traj.times.first(), traj.times.last()) else {
        return Err(Error::InsufficientData("empty trajectory".into()));
    };
    let start = t1 - window * (t1 - t0);
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(&t, _)| t >= start)
        .map(|(&t, s)| (t, s.dq(0)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "slope window holds {} samples, need at least 3",
            pts.len()
        )));
    }
    Ok(linear_fit(&pts).0)
}

/// Fits `Δq₁ = a·ln t + c` over samples with `t ∈ [t_lo, t_hi]`; returns `(a, c)`.
pub fn log_fit(traj: &Trajectory, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::validation(format!("log fit needs 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(&t, _)| t >= t_lo * (1.0 - 1e-12) && t <= t_hi * (1.0 + 1e-12))
        .map(|(&t, s)| (t.ln(), s.dq(0)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("log fit window holds {} samples, need at least 3", pts.len())));
    }
    Ok(linear_fit(&pts))
}

/// Ordinary least squares `y = a·x + b`; returns `(a, b)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// `n` output times spaced evenly on `(t0, t1]`.
pub fn linear_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect()
}

/// `n` output times spaced geometrically on `[t0, t1]`, `t0 > 0`.
pub fn geometric_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let r = (t1 / t0).ln();
    (0..n).map(|k| t0 * (r * k as f64 / (n - 1).max(1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::classical_xi;
    use crate::model::{build_drift, SystemSpec, Units};
    use crate::zeromodes::make_gaussian_state;

    const U: Units = Units::NATURAL;

    #[test]
    fn exact_propagation_localizes_free_particle() {
        let spec = SystemSpec::oscillator(0.0, 1.0).unwrap();
        let s0 = make_gaussian_state(&[1.0], U).unwrap();
        let s = propagate_exact(&s0, &build_drift(&spec), 50.0).unwrap();
        assert!((s.dq(0) - 1.25).abs() < 1e-12);
        assert!(s.dp(0).abs() < 1e-20 && s.dqp(0).abs() < 1e-20);
        // Closed-form 2×2 propagator oracle: q(t) = q0 + p0(1 − e^{−t}), p(t) = p0 e^{−t}.
        let t = 0.8;
        let e = (-t as f64).exp();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 - e, 0.0, e]);
        let expect = &m * s0.sigma() * m.transpose();
        let got = propagate_exact(&s0, &build_drift(&spec), t).unwrap();
        assert!((got.sigma() - expect).amax() < 1e-14);
    }

    #[test]
    fn exact_propagation_at_zero_time_is_identity() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let s0 = make_gaussian_state(&[0.4], U).unwrap();
        let s = propagate_exact(&s0, &build_drift(&spec), 0.0).unwrap();
        assert_eq!(s.sigma(), s0.sigma());
    }

    #[test]
    fn trapped_oscillator_collapses() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let s0 = make_gaussian_state(&[3.0], U).unwrap();
        let s = propagate_exact(&s0, &build_drift(&spec), 100.0).unwrap();
        assert!(s.sigma().amax() < 1e-15 * s0.sigma().norm());
    }

    #[test]
    fn integration_matches_exact_propagation() {
        let spec = SystemSpec::oscillator(1.3, 0.4).unwrap();
        let h = build_drift(&spec);
        let s0 = make_gaussian_state(&[0.8], U).unwrap();
        let times = linear_times(0.0, 20.0, 40);
        let opts = IntegrateOptions::with_tol(1e-10);
        let traj = integrate(&s0, &h, &InhomogeneitySource::Off, &times, &opts).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let e = propagate_exact(&s0, &h, *t).unwrap();
            assert!((s.sigma() - e.sigma()).amax() < 10.0 * 1e-10 * s0.sigma().norm(), "t={t}");
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let spec = SystemSpec::oscillator(2.0, 0.3).unwrap();
        let h = build_drift(&spec);
        let s0 = make_gaussian_state(&[1.0], U).unwrap();
        let err = |tol: f64| {
            let traj = integrate(&s0, &h, &InhomogeneitySource::Off, &[10.0], &IntegrateOptions::with_tol(tol)).unwrap();
            (traj.states[0].sigma() - propagate_exact(&s0, &h, 10.0).unwrap().sigma()).amax()
        };
        assert!(err(1e-10) < err(1e-6));
    }

    #[test]
    fn classical_einstein_slope() {
        let spec = SystemSpec::oscillator(0.0, 1.0).unwrap();
        let xi = classical_xi(&spec, 1.0, 1.0);
        let s0 = make_gaussian_state(&[1.0], U).unwrap();
        let times = linear_times(0.0, 100.0, 200);
        let traj = integrate(&s0, &build_drift(&spec), &InhomogeneitySource::Stationary(xi), &times, &IntegrateOptions::default())
            .unwrap();
        let slope = late_time_slope(&traj, 0.5).unwrap();
        assert!((slope - 2.0).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn slope_of_linear_data_is_exact() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 0.6 * k as f64 + 2.0)).collect();
        let (a, b) = linear_fit(&pts);
        assert!((a - 0.6).abs() < 1e-14 && (b - 2.0).abs() < 1e-13);
    }

    #[test]
    fn slope_needs_samples() {
        let spec = SystemSpec::oscillator(0.0, 1.0).unwrap();
        let s0 = make_gaussian_state(&[1.0], U).unwrap();
        let traj = integrate(&s0, &build_drift(&spec), &InhomogeneitySource::Off, &[1.0, 2.0], &IntegrateOptions::default())
            .unwrap();
        assert!(matches!(late_time_slope(&traj, 0.1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn log_fit_recovers_coefficient() {
        let spec = SystemSpec::oscillator(0.0, 1.0).unwrap();
        let times = geometric_times(1.0, 1e4, 41);
        let states = times
            .iter()
            .map(|&t| CovarianceState::new(DMatrix::from_row_slice(2, 2, &[0.3 * f64::ln(t) + 2.0, 0.0, 0.0, 0.0]), t).unwrap())
            .collect();
        let traj = Trajectory { times, states, meta: exact_trajectory(&make_gaussian_state(&[1.0], U).unwrap(), &build_drift(&spec), &[]).unwrap().meta };
        let (a, c) = log_fit(&traj, 1e2, 1e4).unwrap();
        assert!((a - 0.3).abs() < 1e-12 && (c - 2.0).abs() < 1e-11);
    }

    #[test]
    fn csv_layout() {
        let spec = SystemSpec::oscillator(1.0, 1.0).unwrap();
        let s0 = make_gaussian_state(&[1.0], U).unwrap();
        let traj = integrate(&s0, &build_drift(&spec), &InhomogeneitySource::Off, &[0.5], &IntegrateOptions::default())
            .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,dq,dp,dqp");
        assert!(lines.next().unwrap().starts_with("5.0000000000000000e-1,"));
    }
}
