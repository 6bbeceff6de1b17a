//! Dormand–Prince 5(4) with Hairer's 5th-order dense output.

use nalgebra::DVector;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, h_init: None, h_max: None, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Solution samples: requested output times, plus every accepted step when
/// `record_steps` is set. Sorted by time.
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    pub stats: OdeStats,
}

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` and samples at `outputs` (ascending, `≥ t0`).
/// `project` is applied to every accepted and every interpolated state.
pub fn solve<F, P>(
    f: F,
    t0: f64,
    y0: DVector<f64>,
    outputs: &[f64],
    opts: &OdeOptions,
    record_steps: bool,
    project: P,
) -> Result<OdeSolution>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    P: Fn(&mut DVector<f64>),
{
    if outputs.windows(2).any(|w| !(w[1] > w[0])) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::validation("output times must be strictly increasing and >= t0"));
    }
    let mut stats = OdeStats::default();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let Some(&t_end) = outputs.last() else {
        return Ok(OdeSolution { times, values, stats });
    };

    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        times.push(outputs[next_out]);
        values.push(y0.clone());
        next_out += 1;
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&f, t, &y, &k1, opts, &mut stats),
    }
    .min(h_max);

    let mut last_rejected = false;
    while t < t_end && next_out < outputs.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness { time: t, step: h });
        }
        if h < 1e-14 * t.abs().max(span) {
            return Err(Error::Stiffness { time: t, step: h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let y2 = &y + &k1 * (h * A21);
        let k2 = f(t + C2 * h, &y2);
        let y3 = &y + (&k1 * A31 + &k2 * A32) * h;
        let k3 = f(t + C3 * h, &y3);
        let y4 = &y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h;
        let k4 = f(t + C4 * h, &y4);
        let y5 = &y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h;
        let k5 = f(t + C5 * h, &y5);
        let y6 = &y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h;
        let k6 = f(t + h, &y6);
        let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let err = error_norm(&err_vec, &y, &y_new, opts);

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if t + h >= t_end { t_end } else { t + h };

            // Dense output coefficients.
            let r2 = &y_new - &y;
            let r3 = &k1 * h - &r2;
            let r4 = &r2 - &k7 * h - &r3;
            let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;

            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let to = outputs[next_out];
                let mut yo = if to == t_new {
                    y_new.clone()
                } else {
                    let th = (to - t) / h;
                    let th1 = 1.0 - th;
                    &y + (&r2 + (&r3 + (&r4 + &r5 * th1) * th) * th1) * th
                };
                project(&mut yo);
                times.push(to);
                values.push(yo);
                next_out += 1;
            }

            let mut y_acc = y_new;
            project(&mut y_acc);
            if record_steps && times.last().is_none_or(|&tl| tl < t_new) {
                times.push(t_new);
                values.push(y_acc.clone());
            }
            t = t_new;
            y = y_acc;
            k1 = k7;

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= if err.is_finite() { fac } else { 0.1 };
            last_rejected = true;
        }
    }

    Ok(OdeSolution { times, values, stats })
}

fn initial_step<F>(f: &F, t: f64, y: &DVector<f64>, k1: &DVector<f64>, opts: &OdeOptions, stats: &mut OdeStats) -> f64
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let scale = |v: &DVector<f64>| -> f64 {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(y.iter())
            .map(|(a, b)| (a / (opts.atol + opts.rtol * b.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y + k1 * h0;
    let k2 = f(t + h0, &y1);
    stats.evaluations += 1;
    let d2 = scale(&(&k2 - k1)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_with_dense_output() {
        let outs: Vec<f64> = (0..=20).map(|k| k as f64 * 0.37).collect();
        let sol = solve(
            |_, y| -y.clone(),
            0.0,
            DVector::from_vec(vec![1.0]),
            &outs,
            &OdeOptions::default(),
            false,
            |_| {},
        )
        .unwrap();
        assert_eq!(sol.times.len(), outs.len());
        for (t, y) in sol.times.iter().zip(&sol.values) {
            assert!((y[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let sol = solve(
            |_, y| DVector::from_vec(vec![y[1], -y[0]]),
            0.0,
            DVector::from_vec(vec![1.0, 0.0]),
            &[10.0],
            &OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() },
            true,
            |_| {},
        )
        .unwrap();
        let y = sol.values.last().unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!(sol.stats.accepted > 10);
        assert!(sol.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let run = |tol: f64| {
            let sol = solve(
                |t, y| DVector::from_vec(vec![y[0] * t.cos()]),
                0.0,
                DVector::from_vec(vec![1.0]),
                &[8.0],
                &OdeOptions { rtol: tol, atol: tol * 1e-3, ..Default::default() },
                false,
                |_| {},
            )
            .unwrap();
            (sol.values[0][0] - 8f64.sin().exp()).abs()
        };
        assert!(run(1e-10) < run(1e-6));
    }

    #[test]
    fn rejects_unsorted_outputs() {
        let r = solve(|_, y| y.clone(), 0.0, DVector::from_vec(vec![1.0]), &[1.0, 0.5], &OdeOptions::default(), false, |_| {});
        assert!(r.is_err());
    }

    #[test]
    fn stiff_problem_hits_step_limit() {
        let opts = OdeOptions { max_steps: 50, ..Default::default() };
        let r = solve(|_, y| -y * 1e7, 0.0, DVector::from_vec(vec![1.0]), &[1.0], &opts, false, |_| {});
        assert!(matches!(r, Err(Error::Stiffness { .. })));
    }
}
