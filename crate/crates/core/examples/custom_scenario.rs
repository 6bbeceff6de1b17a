//! Builds a scenario from inline TOML and runs it as the CLI would.

use covariance_landscape::cli::run_scenario;
use covariance_landscape::config::Scenario;

const SCENARIO: &str = r#"
[scenario]
name = "underdamped-bath"
kind = "simulate"

[system]
omega = 2.0
gamma = 0.3

[bath]
enabled = true
temperature = 0.5

[initial]
widths = [1.5]

[schedule]
t_end = "auto"
points = 50
"#;

fn main() -> covariance_landscape::Result<()> {
    print!("{}", run_scenario(&Scenario::from_toml(SCENARIO)?)?);
    Ok(())
}
