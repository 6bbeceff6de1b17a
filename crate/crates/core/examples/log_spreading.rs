//! A free particle in a zero-temperature bath spreads logarithmically with
//! coefficient 2ħ/(πγ).

use covariance_landscape::cli::cmd_simulate;
use covariance_landscape::config::Scenario;

fn main() -> covariance_landscape::Result<()> {
    let report = cmd_simulate(&Scenario::preset("log-spreading")?)?;
    let (a, reference) = report.log_coefficient.expect("preset requests a log fit");
    for s in report.trajectory.states.iter().step_by(20) {
        println!("t = {:10.3e}  dq = {:.6}", s.time(), s.dq(0));
    }
    println!("fitted coefficient {a:.6}, 2/(pi gamma) = {reference:.6}");
    Ok(())
}
