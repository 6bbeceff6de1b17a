//! Retarded Green function of `G̈ + γĠ + ω²G = δ(t)`.

use nalgebra::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Underdamped,
    Critical,
    Overdamped,
    Free,
}

impl Regime {
    /// Damping regime for trap frequency `omega` and damping `gamma`.
    /// Critical when `|γ − 2ω| ≤ 1e-12·γ`.
    pub fn classify(gamma: f64, omega: f64) -> Regime {
        if omega == 0.0 {
            Regime::Free
        } else if (gamma - 2.0 * omega).abs() <= 1e-12 * gamma {
            Regime::Critical
        } else if gamma < 2.0 * omega {
            Regime::Underdamped
        } else {
            Regime::Overdamped
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Underdamped => "underdamped",
            Regime::Critical => "critical",
            Regime::Overdamped => "overdamped",
            Regime::Free => "free",
        }
    }
}

/// One term `coef · τ^power · e^{rate·τ}` of an exponential-polynomial expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: C64,
    pub rate: C64,
    pub power: u8,
}

impl ExpTerm {
    fn eval(&self, t: f64) -> C64 {
        let e = (self.rate * t).exp();
        self.coef * e * if self.power == 1 { t } else { 1.0 }
    }

    fn derivative(&self, t: f64) -> C64 {
        let e = (self.rate * t).exp();
        let base = self.coef * self.rate * e * if self.power == 1 { t } else { 1.0 };
        if self.power == 1 {
            base + self.coef * e
        } else {
            base
        }
    }
}

/// Sum of terms evaluated at `t` (real part; conjugate pairs cancel the imaginary part).
pub fn eval_terms(terms: &[ExpTerm], t: f64) -> f64 {
    terms.iter().map(|k| k.eval(t)).sum::<C64>().re
}

pub fn eval_terms_derivative(terms: &[ExpTerm], t: f64) -> f64 {
    terms.iter().map(|k| k.derivative(t)).sum::<C64>().re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenFunction1D {
    pub gamma: f64,
    pub omega: f64,
    pub regime: Regime,
}

impl GreenFunction1D {
    pub fn new(gamma: f64, omega: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::validation(format!("damping gamma must be positive, got {gamma}")));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::validation(format!("trap frequency omega must be nonnegative, got {omega}")));
        }
        Ok(GreenFunction1D { gamma, omega, regime: Regime::classify(gamma, omega) })
    }

    /// `G(t)`; zero for `t < 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (g, w) = (self.gamma, self.omega);
        match self.regime {
            Regime::Free => -(-g * t).exp_m1() / g,
            Regime::Critical => t * (-0.5 * g * t).exp(),
            Regime::Underdamped => {
                let nu = (w * w - 0.25 * g * g).sqrt();
                (-0.5 * g * t).exp() * (nu * t).sin() / nu
            }
            Regime::Overdamped => {
                let k = (0.25 * g * g - w * w).sqrt();
                0.5 * (((k - 0.5 * g) * t).exp() - ((-k - 0.5 * g) * t).exp()) / k
            }
        }
    }

    /// `Ġ(t)`; zero for `t < 0`, one at `t = 0⁺`.
    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (g, w) = (self.gamma, self.omega);
        match self.regime {
            Regime::Free => (-g * t).exp(),
            Regime::Critical => (1.0 - 0.5 * g * t) * (-0.5 * g * t).exp(),
            Regime::Underdamped => {
                let nu = (w * w - 0.25 * g * g).sqrt();
                (-0.5 * g * t).exp() * ((nu * t).cos() - 0.5 * g * (nu * t).sin() / nu)
            }
            Regime::Overdamped => {
                let k = (0.25 * g * g - w * w).sqrt();
                let ep = ((k - 0.5 * g) * t).exp();
                let em = ((-k - 0.5 * g) * t).exp();
                0.5 * (ep + em) - 0.25 * g * (ep - em) / k
            }
        }
    }

    /// Exponential-polynomial expansions of `G` and `Ġ`, split into decaying
    /// terms and the non-decaying constant left over for a free particle.
    /// Returns `(g_decaying, g_dot_decaying, g_constant)`.
    pub fn expansions(&self) -> (Vec<ExpTerm>, Vec<ExpTerm>, f64) {
        let (g, w) = (self.gamma, self.omega);
        let c = |re: f64, im: f64| C64::new(re, im);
        match self.regime {
            Regime::Critical => {
                let s = c(-0.5 * g, 0.0);
                (
                    vec![ExpTerm { coef: c(1.0, 0.0), rate: s, power: 1 }],
                    vec![
                        ExpTerm { coef: c(1.0, 0.0), rate: s, power: 0 },
                        ExpTerm { coef: s, rate: s, power: 1 },
                    ],
                    0.0,
                )
            }
            Regime::Free => {
                let s = c(-g, 0.0);
                (
                    vec![ExpTerm { coef: c(-1.0 / g, 0.0), rate: s, power: 0 }],
                    vec![ExpTerm { coef: c(1.0, 0.0), rate: s, power: 0 }],
                    1.0 / g,
                )
            }
            Regime::Underdamped | Regime::Overdamped => {
                let disc = C64::new(0.25 * g * g - w * w, 0.0).sqrt();
                let sp = c(-0.5 * g, 0.0) + disc;
                let sm = c(-0.5 * g, 0.0) - disc;
                let inv = (sp - sm).inv();
                (
                    vec![
                        ExpTerm { coef: inv, rate: sp, power: 0 },
                        ExpTerm { coef: -inv, rate: sm, power: 0 },
                    ],
                    vec![
                        ExpTerm { coef: sp * inv, rate: sp, power: 0 },
                        ExpTerm { coef: -sm * inv, rate: sm, power: 0 },
                    ],
                    0.0,
                )
            }
        }
    }
}

/// `G(t)` for damping `gamma` and trap frequency `omega`; zero for `t < 0`.
pub fn green(gamma: f64, omega: f64, t: f64) -> Result<f64> {
    Ok(GreenFunction1D::new(gamma, omega)?.value(t))
}
