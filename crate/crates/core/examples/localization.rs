//! A free damped particle stops spreading: its width settles at
//! `a² + ħ²/(4γ²a²)` instead of growing.

use covariance_landscape::dynamics::{integrate, InhomogeneitySource, IntegrateOptions};
use covariance_landscape::model::build_drift;
use covariance_landscape::zeromodes::{make_gaussian_state, predict_asymptotic};
use covariance_landscape::{SystemSpec, Units};

fn main() -> covariance_landscape::Result<()> {
    let gamma = 1.0;
    let spec = SystemSpec::oscillator(0.0, gamma)?;
    let h = build_drift(&spec);
    println!("{:>6} {:>14} {:>14} {:>14}", "a", "dq(60)", "projected", "closed form");
    for a in [0.5, 1.0, 2.0] {
        let s0 = make_gaussian_state(&[a], Units::NATURAL)?;
        let traj = integrate(&s0, &h, &InhomogeneitySource::Off, &[60.0], &IntegrateOptions::default())?;
        let projected = predict_asymptotic(&spec, &s0)?;
        let closed = a * a + 1.0 / (4.0 * gamma * gamma * a * a);
        println!("{a:>6} {:>14.10} {:>14.10} {closed:>14.10}", traj.states[0].dq(0), projected.dq(0));
    }
    Ok(())
}
