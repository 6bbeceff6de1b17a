//! Opening the trap and running time to infinity do not commute; neither do
//! switching off fluctuations and running time to infinity.

use covariance_landscape::cli::cmd_limits;
use covariance_landscape::config::Scenario;

fn main() -> covariance_landscape::Result<()> {
    for name in ["limits-trap", "limits-fluctuation"] {
        let table = cmd_limits(&Scenario::preset(name)?)?;
        println!("# {name}");
        print!("{}", table.csv());
    }
    Ok(())
}
