//! A trapped particle in an Ohmic bath reaches the width `γD_ω(T)/ω²`,
//! which tends to the classical `k_B T/ω²` at high temperature.

use covariance_landscape::cli::cmd_simulate;
use covariance_landscape::config::Scenario;

fn main() -> covariance_landscape::Result<()> {
    for name in ["qbm-confined", "qbm-high-t"] {
        let report = cmd_simulate(&Scenario::preset(name)?)?;
        let dq = report.final_state().dq(0);
        let reference = report.reference_width.unwrap_or(f64::NAN);
        println!("{name:>13}: dq = {dq:.9}, reference = {reference:.9}, rel {:.1e}", (dq - reference).abs() / reference);
    }
    Ok(())
}
