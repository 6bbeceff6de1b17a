//! Landscape surfaces over (dq, dp) for a trapped and a free particle,
//! written as CSV grids with TOML sidecars in the temp directory.

use std::fs::File;

use covariance_landscape::landscape::{landscape_cho, landscape_fp, landscape_grid, FixedCoordinate, GridAxes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let axes = GridAxes { dq_min: -1.0, dq_max: 1.0, dq_points: 41, dp_min: -1.0, dp_max: 1.0, dp_points: 41 };
    let dir = std::env::temp_dir();
    for (label, dec) in [("bowl", landscape_cho(1.0, 1.0)?), ("valley", landscape_fp(1.0)?)] {
        let grid = landscape_grid(&dec, axes.clone(), FixedCoordinate::Minimize)?;
        let path = dir.join(format!("landscape-{label}.csv"));
        grid.write_csv(File::create(&path)?)?;
        let mut params = toml::Table::new();
        params.insert("panel".into(), label.into());
        std::fs::write(path.with_extension("toml"), grid.sidecar_toml(&params)?)?;
        println!(
            "{label:>6}: L(0.5, 0) = {:.4}, L(0, 0.5) = {:.4}, L(0.5, 0.5) = {:.4} -> {}",
            grid.value_at(0.5, 0.0).unwrap_or(f64::NAN),
            grid.value_at(0.0, 0.5).unwrap_or(f64::NAN),
            grid.value_at(0.5, 0.5).unwrap_or(f64::NAN),
            path.display()
        );
    }
    Ok(())
}
