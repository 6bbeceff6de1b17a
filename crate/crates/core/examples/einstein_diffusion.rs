//! Classical noise on a free particle gives Einstein diffusion, dq ~ 2 D t.

use covariance_landscape::cli::cmd_simulate;
use covariance_landscape::config::Scenario;

fn main() -> covariance_landscape::Result<()> {
    let sc = Scenario::preset("einstein-diffusion")?;
    let report = cmd_simulate(&sc)?;
    print!("{}", report.summary());
    Ok(())
}
