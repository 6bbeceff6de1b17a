//! Frequency integrals over the Ohmic spectrum: noise kernel, stationary
//! fluctuation integrals and the diffusion coefficient `D_ω(T)`.

use std::f64::consts::PI;

use serde::Serialize;

use super::green::Regime;
use super::special::zeta_even;
use crate::error::{Error, Result};
use crate::model::Units;
use crate::quadrature::{integrate, integrate_to_infinity, integrate_vec, Estimate, QuadOptions, ScalarEstimate};

/// `ν·coth(βħν/2)`, with the small-argument series below `ν < 10⁻³/(βħ)`.
/// `beta_hbar = ∞` is zero temperature.
pub fn nu_coth(nu: f64, beta_hbar: f64) -> f64 {
    if beta_hbar.is_infinite() {
        return nu;
    }
    if nu < 1e-3 / beta_hbar {
        2.0 / beta_hbar + beta_hbar * nu * nu / 6.0
    } else {
        nu / (0.5 * beta_hbar * nu).tanh()
    }
}

/// Thermal excess `ν·(coth(βħν/2) − 1)`; zero at zero temperature.
pub fn nu_bose(nu: f64, beta_hbar: f64) -> f64 {
    if beta_hbar.is_infinite() {
        return 0.0;
    }
    let x = beta_hbar * nu;
    if x < 1e-8 {
        2.0 / beta_hbar - nu
    } else {
        2.0 * nu / x.exp_m1()
    }
}

/// Sorted, deduplicated breakpoints on `[0, top]` from `marks`, plus a
/// geometric ladder between the largest mark and `top`.
pub(crate) fn spectral_breakpoints(top: f64, marks: &[f64]) -> Vec<f64> {
    let mut pts = vec![0.0, top];
    let mut hi: f64 = 0.0;
    for &m in marks {
        if m > 0.0 && m < top && m.is_finite() {
            pts.push(m);
            hi = hi.max(m);
        }
    }
    if hi > 0.0 {
        let mut x = 4.0 * hi;
        while x < top {
            pts.push(x);
            x *= 4.0;
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * top);
    pts
}

fn resonance_marks(gamma: f64, omega: f64, thermal: f64) -> Vec<f64> {
    vec![
        omega,
        omega - gamma,
        omega + gamma,
        omega - 0.5 * gamma,
        omega + 0.5 * gamma,
        gamma,
        thermal,
        10.0 * thermal,
    ]
}

/// Symmetrized noise correlator `(ħγ/π)∫₀^Λ ν coth(βħν/2) cos(ντ) dν`.
pub fn noise_kernel(tau: f64, temperature: f64, gamma: f64, cutoff: f64, units: Units) -> Result<ScalarEstimate> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::validation(format!("cutoff must be positive, got {cutoff}")));
    }
    let bh = units.beta_hbar(temperature);
    let panels = (cutoff * tau.abs() / PI).ceil() as usize + 1;
    let mut pts = crate::quadrature::breakpoints(0.0, cutoff, panels, &[units.thermal_frequency(temperature)]);
    pts.dedup();
    let est = integrate(|nu| nu_coth(nu, bh) * (nu * tau).cos(), &pts, QuadOptions::rel(1e-12))?;
    let pref = units.hbar * gamma / PI;
    Ok(ScalarEstimate { value: pref * est.value, error: pref * est.error, evaluations: est.evaluations })
}

/// Inner stationary integrals `[∫ν coth·Re Ĝ, ∫ν coth·γν²/D]` over `[0, Λ]`,
/// with `D = (ω² − ν²)² + γ²ν²`. Multiplying by `ħγ/π` gives `Δ_qξ∞` and `Δ_pξ∞`
/// (without the free-particle thermal tail).
pub(crate) fn stationary_integrals(gamma: f64, omega: f64, beta_hbar: f64, cutoff: f64) -> Result<Estimate<2>> {
    let w2 = omega * omega;
    let g2 = gamma * gamma;
    let f = |nu: f64| {
        let nc = nu_coth(nu, beta_hbar);
        if omega == 0.0 {
            let den = nu * nu + g2;
            [-nc / den, nc * gamma / den]
        } else {
            let a = w2 - nu * nu;
            let den = a * a + g2 * nu * nu;
            [nc * a / den, nc * gamma * nu * nu / den]
        }
    };
    let thermal = if beta_hbar.is_infinite() { 0.0 } else { 1.0 / beta_hbar };
    let pts = spectral_breakpoints(cutoff, &resonance_marks(gamma, omega, thermal));
    integrate_vec(f, &pts, QuadOptions::rel(1e-12).with_abs(1e-300))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionEstimate {
    pub value: f64,
    pub error: f64,
    pub regime: Regime,
}

/// `D_ω(T) = (ħω²/π)∫₀^∞ ν coth(βħν/2)/((ω²−ν²)² + γ²ν²) dν` for `ω > 0`,
/// and `k_B T/γ` for `ω = 0`.
pub fn diffusion_coefficient(gamma: f64, omega: f64, temperature: f64, units: Units) -> Result<DiffusionEstimate> {
    check_gamma_omega(gamma, omega)?;
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::validation(format!("temperature must be nonnegative, got {temperature}")));
    }
    let regime = Regime::classify(gamma, omega);
    if omega == 0.0 {
        return Ok(DiffusionEstimate { value: units.k_boltzmann * temperature / gamma, error: 0.0, regime });
    }
    let bh = units.beta_hbar(temperature);
    let w2 = omega * omega;
    let f = |nu: f64| {
        let a = w2 - nu * nu;
        nu_coth(nu, bh) / (a * a + gamma * gamma * nu * nu)
    };
    let thermal = units.thermal_frequency(temperature);
    let split = 8.0 * omega.max(gamma).max(thermal);
    let opts = QuadOptions::rel(1e-13).with_abs(1e-300);
    let pts = spectral_breakpoints(split, &resonance_marks(gamma, omega, thermal));
    let body = integrate(f, &pts, opts)?;
    let tail = integrate_to_infinity(f, split, opts)?;
    let pref = units.hbar * w2 / PI;
    Ok(DiffusionEstimate {
        value: pref * (body.value + tail.value),
        error: pref * (body.error + tail.error),
        regime,
    })
}

/// Zero-temperature `D_ω(0)` in closed form for each damping regime.
pub fn diffusion_zero_t_closed(gamma: f64, omega: f64, units: Units) -> Result<DiffusionEstimate> {
    check_gamma_omega(gamma, omega)?;
    let regime = Regime::classify(gamma, omega);
    let pref = units.hbar * omega * omega / PI;
    let value = match regime {
        Regime::Free => 0.0,
        Regime::Critical => units.hbar / (2.0 * PI),
        Regime::Underdamped => {
            let s = (4.0 * omega * omega - gamma * gamma).sqrt();
            pref * 2.0 / (gamma * s) * (s / gamma).atan()
        }
        Regime::Overdamped => {
            let r = (gamma * gamma - 4.0 * omega * omega).sqrt();
            pref * ((gamma + r) / (gamma - r)).ln() / (gamma * r)
        }
    };
    Ok(DiffusionEstimate { value, error: 0.0, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowTSeries {
    pub value: f64,
    /// First omitted term, used as the truncation error estimate.
    pub next_term: f64,
    /// Set when `k_B T > 0.2·ħω`, where the series is not trustworthy.
    pub outside_validity: bool,
}

pub const MAX_SERIES_ORDER: usize = 7;

/// Low-temperature expansion of `D_ω(T)` keeping `order` thermal terms
/// (`order = 0` is the zero-temperature value). The `T^{2k+2}` coefficient is
/// `(ħω²/π)·a_k ω^{−4−2k}·2(2k+1)!ζ(2k+2)/(ħ/k_B)^{2k+2}` with `a_k` from
/// `1/(1 + b x + x²) = Σ a_k x^k`, `b = (γ² − 2ω²)/ω²`.
pub fn diffusion_low_t_series(gamma: f64, omega: f64, temperature: f64, order: usize, units: Units) -> Result<LowTSeries> {
    if omega <= 0.0 {
        return Err(Error::WrongRegime("low-temperature series needs a nonzero trap frequency".into()));
    }
    if order > MAX_SERIES_ORDER {
        return Err(Error::validation(format!("series order {order} exceeds {MAX_SERIES_ORDER}")));
    }
    let d0 = diffusion_zero_t_closed(gamma, omega, units)?.value;
    let kt = units.k_boltzmann * temperature;
    let outside_validity = kt > 0.2 * units.hbar * omega;
    if temperature == 0.0 {
        return Ok(LowTSeries { value: d0, next_term: 0.0, outside_validity });
    }
    let inv_bh = kt / units.hbar;
    let b = (gamma * gamma - 2.0 * omega * omega) / (omega * omega);
    let pref = units.hbar * omega * omega / PI;
    let mut a = [0.0; MAX_SERIES_ORDER + 1];
    let mut factorial = 1.0; // (2k+1)!
    let mut terms = [0.0; MAX_SERIES_ORDER + 1];
    for k in 0..=order.min(MAX_SERIES_ORDER) {
        a[k] = match k {
            0 => 1.0,
            1 => -b,
            _ => -b * a[k - 1] - a[k - 2],
        };
        if k > 0 {
            factorial *= (2 * k) as f64 * (2 * k + 1) as f64;
        }
        let p = 2 * k as i32 + 2;
        terms[k] = pref * a[k] * omega.powi(-4 - 2 * k as i32) * 2.0 * factorial * zeta_even(k + 1) * inv_bh.powi(p);
    }
    let value = d0 + terms[..order].iter().sum::<f64>();
    let next_term = if order <= MAX_SERIES_ORDER { terms[order] } else { 0.0 };
    Ok(LowTSeries { value, next_term, outside_validity })
}

fn check_gamma_omega(gamma: f64, omega: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::validation(format!("damping gamma must be positive, got {gamma}")));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::validation(format!("trap frequency omega must be nonnegative, got {omega}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: Units = Units::NATURAL;

    #[test]
    fn coth_series_is_continuous() {
        let bh = 2.0;
        let x = 1e-3 / bh;
        let below = nu_coth(x * (1.0 - 1e-12), bh);
        let above = nu_coth(x * (1.0 + 1e-12), bh);
        assert!((below - above).abs() < 1e-12);
        assert!((nu_bose(3.0, bh) - (nu_coth(3.0, bh) - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn kernel_at_zero_lag_and_zero_temperature() {
        let k = noise_kernel(0.0, 0.0, 0.7, 50.0, U).unwrap();
        assert!((k.value - 0.7 * 2500.0 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn kernel_is_even() {
        let a = noise_kernel(0.37, 1.5, 1.0, 40.0, U).unwrap().value;
        let b = noise_kernel(-0.37, 1.5, 1.0, 40.0, U).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_spot_values() {
        let d = |g, w| diffusion_zero_t_closed(g, w, U).unwrap().value;
        assert!((d(1.0, 1.0) - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((d(2.0, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((d(3.0, 1.0) - 0.091_335_614).abs() < 1e-9);
    }

    #[test]
    fn closed_form_branches_are_continuous_at_critical() {
        let d = |g| diffusion_zero_t_closed(g, 1.0, U).unwrap().value;
        let crit = 1.0 / (2.0 * PI);
        assert!((d(2.0 - 1e-6) - crit).abs() < 1e-6);
        assert!((d(2.0 + 1e-6) - crit).abs() < 1e-6);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &g in &[0.1, 1.0, 1.9, 2.0, 2.1, 10.0] {
            let q = diffusion_coefficient(g, 1.0, 0.0, U).unwrap();
            let c = diffusion_zero_t_closed(g, 1.0, U).unwrap();
            assert!((q.value - c.value).abs() < 1e-10 * c.value, "g={g}: {} vs {}", q.value, c.value);
        }
    }

    #[test]
    fn increasing_in_temperature() {
        let mut last = diffusion_coefficient(1.0, 1.0, 0.0, U).unwrap().value;
        for k in 1..12 {
            let v = diffusion_coefficient(1.0, 1.0, 0.1 * k as f64, U).unwrap().value;
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn high_temperature_limit() {
        let v = diffusion_coefficient(1.0, 1.0, 100.0, U).unwrap().value;
        assert!((v - 100.0).abs() < 1e-2 * 100.0);
    }

    #[test]
    fn series_matches_quadrature_at_low_temperature() {
        let (g, w, t) = (1.0, 1.0, 0.03);
        let exact = diffusion_coefficient(g, w, t, U).unwrap().value;
        let s = diffusion_low_t_series(g, w, t, 3, U).unwrap();
        assert!(!s.outside_validity);
        assert!((s.value - exact).abs() < 10.0 * s.next_term.abs() + 1e-14);
        // Leading coefficients as stated in closed form.
        let b2 = (1.0 / t).powi(2);
        let s1 = diffusion_low_t_series(g, w, t, 1, U).unwrap();
        let d0 = diffusion_zero_t_closed(g, w, U).unwrap().value;
        assert!(((s1.value - d0) - PI / (3.0 * w * w * b2)).abs() < 1e-15);
        let s2 = diffusion_low_t_series(g, w, t, 2, U).unwrap();
        let quartic = 2.0 * PI.powi(3) * (2.0 * w * w - g * g) / (15.0 * w.powi(6) * b2 * b2);
        assert!(((s2.value - s1.value) - quartic).abs() < 1e-15);
    }

    #[test]
    fn series_flags_high_temperature() {
        assert!(diffusion_low_t_series(1.0, 1.0, 0.5, 2, U).unwrap().outside_validity);
    }

    #[test]
    fn free_particle_diffusion() {
        let d = diffusion_coefficient(2.0, 0.0, 3.0, U).unwrap();
        assert_eq!(d.value, 1.5);
        assert_eq!(d.regime, Regime::Free);
    }
}
