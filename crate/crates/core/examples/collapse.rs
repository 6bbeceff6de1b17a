//! Without fluctuations any trap squeezes the packet to zero width.

use covariance_landscape::dynamics::exact_trajectory;
use covariance_landscape::model::build_drift;
use covariance_landscape::zeromodes::make_gaussian_state;
use covariance_landscape::{SystemSpec, Units};

fn main() -> covariance_landscape::Result<()> {
    let h = build_drift(&SystemSpec::oscillator(1.0, 1.0)?);
    let times = [1.0, 10.0, 50.0, 100.0];
    for a in [0.1, 1.0, 10.0] {
        let s0 = make_gaussian_state(&[a], Units::NATURAL)?;
        let traj = exact_trajectory(&s0, &h, &times)?;
        let row: Vec<String> = traj.states.iter().map(|s| format!("{:10.3e}", s.dq(0))).collect();
        println!("a = {a:<5} dq at t = {times:?}: {}", row.join(" "));
    }
    Ok(())
}
