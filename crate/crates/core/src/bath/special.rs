//! Cosine integral and the zeta values used by the low-temperature series.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Ci(x) = γ_E + ln x + ∫₀^x (cos t − 1)/t dt` for `x > 0`.
pub fn cos_integral(x: f64) -> f64 {
    assert!(x > 0.0, "cos_integral: x must be positive");
    if x <= 2.0 {
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..60 {
            let k2 = 2 * k;
            term *= -x2 / ((k2 - 1) as f64 * k2 as f64);
            let add = term / k2 as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        EULER_GAMMA + x.ln() + sum
    } else {
        // Lentz continued fraction for E1(ix).
        let tiny = 1e-300;
        let (mut b_re, b_im) = (1.0, x);
        let inv = |re: f64, im: f64| {
            let d = re * re + im * im;
            (re / d, -im / d)
        };
        let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let mut c = (1.0 / tiny, 0.0);
        let mut d = inv(b_re, b_im);
        let mut h = d;
        for i in 2..200 {
            let a = -((i - 1) * (i - 1)) as f64;
            b_re += 2.0;
            let ad = (a * d.0 + b_re, a * d.1 + b_im);
            d = inv(ad.0, ad.1);
            let ac = inv(c.0, c.1);
            c = (b_re + a * ac.0, b_im + a * ac.1);
            let del = mul(c, d);
            h = mul(h, del);
            if (del.0 - 1.0).abs() + del.1.abs() < 1e-16 {
                break;
            }
        }
        let h = mul((x.cos(), -x.sin()), h);
        -h.0
    }
}

/// `ζ(2k)` for `k = 1..=8`.
pub fn zeta_even(k: usize) -> f64 {
    match k {
        1 => PI.powi(2) / 6.0,
        2 => PI.powi(4) / 90.0,
        3 => PI.powi(6) / 945.0,
        4 => PI.powi(8) / 9450.0,
        5 => PI.powi(10) / 93555.0,
        6 => 691.0 * PI.powi(12) / 638_512_875.0,
        7 => 2.0 * PI.powi(14) / 18_243_225.0,
        8 => 3617.0 * PI.powi(16) / 325_641_566_250.0,
        _ => panic!("zeta_even: k = {k} outside 1..=8"),
    }
}
