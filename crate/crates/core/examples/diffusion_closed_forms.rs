//! Quadrature of the diffusion coefficient against the zero-temperature closed
//! forms in each damping regime, and the low-temperature series.

use covariance_landscape::bath::{diffusion_coefficient, diffusion_low_t_series, diffusion_zero_t_closed};
use covariance_landscape::Units;

fn main() -> covariance_landscape::Result<()> {
    let u = Units::NATURAL;
    println!("{:>5} {:>5} {:>12} {:>18} {:>18}", "gamma", "omega", "regime", "quadrature", "closed form");
    for (gamma, omega) in [(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (0.2, 1.0)] {
        let q = diffusion_coefficient(gamma, omega, 0.0, u)?;
        let c = diffusion_zero_t_closed(gamma, omega, u)?;
        println!("{gamma:>5} {omega:>5} {:>12} {:>18.15} {:>18.15}", q.regime.name(), q.value, c.value);
    }
    println!();
    println!("{:>6} {:>16} {:>16} {:>12}", "T", "quadrature", "series (k=3)", "next term");
    for t in [0.02, 0.05, 0.1] {
        let q = diffusion_coefficient(1.0, 1.0, t, u)?;
        let s = diffusion_low_t_series(1.0, 1.0, t, 3, u)?;
        println!("{t:>6} {:>16.12} {:>16.12} {:>12.2e}", q.value, s.value, s.next_term);
    }
    Ok(())
}
