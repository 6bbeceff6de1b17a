//! Command-line front-end: `simulate`, `landscape`, `diffusion`,
//! `asymptotics`, `limits`, `sweep` and `presets`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::{
    build_xi_matrix, classical_xi, diffusion_coefficient, diffusion_low_t_series, diffusion_zero_t_closed,
    transient_xi_table, XiTime,
};
use crate::config::{LandscapeMode, LimitsMode, Method, NoiseModel, Panel, Scenario, ScenarioKind, PRESET_NAMES};
use crate::dynamics::{
    exact_trajectory, integrate, late_time_slope, linear_times, log_fit, propagate_exact, InhomogeneitySource,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::landscape::{
    landscape_cho, landscape_for_system, landscape_fp, landscape_grid, landscape_qbm, LandscapeDecomposition,
    LandscapeGrid,
};
use crate::linalg;
use crate::model::{build_drift, vectorize_drift, BathSpec, CovarianceState, SystemSpec, Units};
use crate::zeromodes::{asymptotic_covariance, conserved_values, predict_asymptotic, zero_mode_basis, DEFAULT_KERNEL_TOL};

#[derive(Debug, Parser)]
#[command(name = "covland", version, about = "Covariance dynamics, landscapes and bath integrals of damped quantum oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Source {
    /// Scenario file (TOML); repeatable
    #[arg(long)]
    pub config: Vec<PathBuf>,
    /// Bundled scenario; repeatable
    #[arg(long)]
    pub preset: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Cho,
    Fp,
    Qbm,
    General,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LimitsArg {
    Trap,
    Fluctuation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the covariance equation and write the trajectory
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Trajectory CSV (a directory when several scenarios run)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Integrator relative tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Run the scenarios concurrently
        #[arg(long)]
        sweep: bool,
    },
    /// Export landscape surfaces on a (dq, dp) grid
    #[command(allow_negative_numbers = true)]
    Landscape {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Evaluate the diffusion coefficient D_omega(T)
    #[command(allow_negative_numbers = true)]
    Diffusion {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        /// Also evaluate the low-temperature series to this order
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long, default_value_t = 1.0)]
        k_boltzmann: f64,
    },
    /// Zero-mode report and predicted long-time covariance
    Asymptotics {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Order-of-limits tables
    Limits {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        mode: Option<LimitsArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Diffusion coefficient over a parameter grid as CSV
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        temperature: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List bundled scenarios
    Presets,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_with_io<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { crate::error::Category::Config.exit_code() } else { 0 };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.category().exit_code()
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn load_all(source: &Source) -> Result<Vec<Scenario>> {
    let mut all = Vec::new();
    for p in &source.config {
        all.push(Scenario::load(p)?);
    }
    for name in &source.preset {
        all.push(Scenario::preset(name)?);
    }
    if all.is_empty() {
        return Err(Error::Config { key: "--config/--preset".into(), message: "no scenario given".into() });
    }
    Ok(all)
}

fn load_one(source: &Source) -> Result<Scenario> {
    let mut all = load_all(source)?;
    if all.len() != 1 {
        return Err(Error::Config { key: "--config/--preset".into(), message: "this command takes one scenario".into() });
    }
    Ok(all.remove(0))
}

fn apply_tol(s: Scenario, tol: Option<f64>) -> Result<Scenario> {
    match tol {
        Some(t) => s.with_tol(t),
        None => Ok(s),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate { source, out: path, tol, sweep } => {
            let scenarios = load_all(&source)?
                .into_iter()
                .map(|s| apply_tol(s, tol))
                .collect::<Result<Vec<_>>>()?;
            let reports: Vec<Result<SimulationReport>> = if sweep {
                scenarios.par_iter().map(cmd_simulate).collect()
            } else {
                scenarios.iter().map(cmd_simulate).collect()
            };
            let several = scenarios.len() > 1;
            for (sc, rep) in scenarios.iter().zip(reports) {
                let rep = rep?;
                let target = match (&path, several) {
                    (Some(p), false) => Some(p.clone()),
                    (Some(dir), true) => Some(dir.join(format!("{}.csv", sc.name))),
                    (None, _) => sc.trajectory_path.as_ref().map(PathBuf::from),
                };
                if let Some(t) = target {
                    let mut buf = Vec::new();
                    rep.trajectory.write_csv(&mut buf)?;
                    write_file(&t, &buf)?;
                }
                write!(out, "{}", rep.summary())?;
            }
            Ok(())
        }
        Command::Landscape { source, out: path, mode, gamma, omega, temperature } => {
            let mut sc = if source.config.is_empty() && source.preset.is_empty() {
                adhoc_landscape_scenario(mode.unwrap_or(ModeArg::Cho), gamma.unwrap_or(1.0), omega, temperature)?
            } else {
                load_one(&source)?
            };
            if let (Some(m), Some(cfg)) = (mode, sc.landscape.as_mut()) {
                cfg.panels = vec![Panel { label: sc.name.clone(), mode: mode_of(m), omega, xi: None }];
            }
            let panels = cmd_landscape(&sc)?;
            let several = panels.len() > 1;
            for p in &panels {
                let mut csv = Vec::new();
                p.grid.write_csv(&mut csv)?;
                match &path {
                    Some(base) => {
                        let file = if several { suffixed(base, &p.panel.label) } else { base.clone() };
                        write_file(&file, &csv)?;
                        write_file(&file.with_extension("toml"), p.sidecar(&sc)?.as_bytes())?;
                        writeln!(out, "{}: {} ({} nodes{})", p.panel.label, file.display(), p.grid.rows.len(), flags(&p.grid))?;
                    }
                    None => {
                        if several {
                            writeln!(out, "# {}", p.panel.label)?;
                        }
                        out.write_all(&csv)?;
                    }
                }
            }
            Ok(())
        }
        Command::Diffusion { gamma, omega, temperature, order, hbar, k_boltzmann } => {
            let units = Units::new(hbar, k_boltzmann)?;
            write!(out, "{}", cmd_diffusion(gamma, omega, temperature, order, units)?)?;
            Ok(())
        }
        Command::Asymptotics { source, tol } => {
            let sc = apply_tol(load_one(&source)?, tol)?;
            write!(out, "{}", cmd_asymptotics(&sc)?.render())?;
            Ok(())
        }
        Command::Limits { source, mode, out: path, tol } => {
            let sc = if source.config.is_empty() && source.preset.is_empty() {
                let name = match mode.unwrap_or(LimitsArg::Trap) {
                    LimitsArg::Trap => "limits-trap",
                    LimitsArg::Fluctuation => "limits-fluctuation",
                };
                Scenario::preset(name)?
            } else {
                load_one(&source)?
            };
            let sc = apply_tol(sc, tol)?;
            let table = cmd_limits(&sc)?;
            match path {
                Some(p) => {
                    write_file(&p, table.csv().as_bytes())?;
                    writeln!(out, "{}: {} rows -> {}", sc.name, table.rows.len(), p.display())?;
                }
                None => write!(out, "{}", table.csv())?,
            }
            Ok(())
        }
        Command::Sweep { gamma, omega, temperature, out: path } => {
            let rows = diffusion_sweep(&gamma, &omega, &temperature, Units::NATURAL)?;
            let mut csv = String::from("gamma,omega,T,D,err\n");
            for r in &rows {
                writeln!(csv, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.0, r.1, r.2, r.3, r.4).expect("string write");
            }
            match path {
                Some(p) => {
                    write_file(&p, csv.as_bytes())?;
                    writeln!(out, "{} rows -> {}", rows.len(), p.display())?;
                }
                None => write!(out, "{csv}")?,
            }
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                let sc = Scenario::preset(name)?;
                writeln!(out, "{name:<22} {:<12} {}", format!("{:?}", sc.kind).to_lowercase(), sc.claim)?;
            }
            Ok(())
        }
    }
}

fn mode_of(m: ModeArg) -> LandscapeMode {
    match m {
        ModeArg::Cho => LandscapeMode::Cho,
        ModeArg::Fp => LandscapeMode::Fp,
        ModeArg::Qbm => LandscapeMode::Qbm,
        ModeArg::General => LandscapeMode::General,
    }
}

fn suffixed(base: &Path, label: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}-{label}.{ext}"))
}

fn flags(grid: &LandscapeGrid) -> &'static str {
    match (grid.unbounded_below, grid.unbounded_fixed) {
        (false, false) => "",
        (true, false) => ", unbounded below",
        (_, true) => ", no conditional minimizer",
    }
}

fn adhoc_landscape_scenario(mode: ModeArg, gamma: f64, omega: Option<f64>, temperature: Option<f64>) -> Result<Scenario> {
    let omega = omega.unwrap_or(match mode {
        ModeArg::Fp => 0.0,
        _ => 1.0,
    });
    let bath = match temperature {
        Some(t) => format!("[bath]\nenabled = true\ntemperature = {t:?}\n"),
        None => String::new(),
    };
    let mode = format!("{:?}", mode_of(mode)).to_lowercase();
    let text = format!(
        "[scenario]\nname = \"landscape-{mode}\"\nkind = \"landscape\"\n[system]\nomega = {omega:?}\ngamma = {gamma:?}\n{bath}[landscape]\nmode = \"{mode}\"\n"
    );
    Scenario::from_toml(&text)
}

/// `ω` and `γ` of a single-oscillator system.
fn scalar_params(spec: &SystemSpec) -> Result<(f64, f64)> {
    if spec.n() != 1 {
        return Err(Error::UnsupportedReduction { n: spec.n() });
    }
    Ok((spec.omega_mat()[(0, 0)].sqrt(), spec.gamma_mat()[(0, 0)]))
}

/// Stationary `Ξ_∞` of a scenario's bath, zero when it is off.
pub fn stationary_xi(sc: &Scenario) -> Result<DMatrix<f64>> {
    let n = sc.system.n();
    if !sc.bath.active() {
        return Ok(DMatrix::zeros(2 * n, 2 * n));
    }
    match sc.noise {
        NoiseModel::Classical => Ok(classical_xi(&sc.system, sc.bath.temperature, sc.bath.scale)),
        NoiseModel::Stationary | NoiseModel::Transient => build_xi_matrix(&sc.system, &sc.bath, XiTime::Stationary),
    }
}

fn source_for(sc: &Scenario, bath: &BathSpec) -> Result<InhomogeneitySource> {
    if !bath.active() {
        return Ok(InhomogeneitySource::Off);
    }
    Ok(match sc.noise {
        NoiseModel::Classical => InhomogeneitySource::Stationary(classical_xi(&sc.system, bath.temperature, bath.scale)),
        NoiseModel::Stationary => InhomogeneitySource::Stationary(build_xi_matrix(&sc.system, bath, XiTime::Stationary)?),
        NoiseModel::Transient => InhomogeneitySource::Transient(transient_xi_table(&sc.system, bath, sc.t_end)?),
    })
}

fn run_trajectory(sc: &Scenario, bath: &BathSpec, outputs: &[f64]) -> Result<Trajectory> {
    let h = build_drift(&sc.system);
    match sc.method {
        Method::Exact if !bath.active() => exact_trajectory(&sc.initial, &h, outputs),
        _ => integrate(&sc.initial, &h, &source_for(sc, bath)?, outputs, &sc.integrator),
    }
}

/// Stationary covariance `H_σσ* + vec(Ξ) = 0` when the drift is Hurwitz.
fn stationary_state(spec: &SystemSpec, xi: &DMatrix<f64>) -> Result<Option<CovarianceState>> {
    if zero_mode_basis(spec, DEFAULT_KERNEL_TOL)?.is_some() {
        return Ok(None);
    }
    let hs = vectorize_drift(&build_drift(spec))?;
    let v = hs
        .lu()
        .solve(&(-linalg::vec(xi)))
        .ok_or_else(|| Error::LinearAlgebra("vectorized drift is singular".into()))?;
    Ok(Some(CovarianceState::new(linalg::symmetrize(&linalg::unvec(&v, 2 * spec.n())), f64::INFINITY)?))
}

/// Landscape for a scenario's system and stationary bath.
pub fn scenario_landscape(sc: &Scenario) -> Result<LandscapeDecomposition> {
    let xi = stationary_xi(sc)?;
    if sc.system.n() == 1 {
        let (w, g) = scalar_params(&sc.system)?;
        landscape_qbm(g, w, xi[(0, 1)], 0.5 * xi[(1, 1)])
    } else {
        landscape_for_system(&sc.system, Some(&xi))
    }
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub name: String,
    pub claim: String,
    pub trajectory: Trajectory,
    /// Long-time prediction: zero-mode projection without a bath, the
    /// stationary state with one; `None` when the width grows without bound.
    pub predicted: Option<CovarianceState>,
    /// `γD_ω(T)/ω²` (or `k_B T/ω²` for classical noise) for a trapped single oscillator.
    pub reference_width: Option<f64>,
    pub landscape_end: Option<f64>,
    pub slope: Option<f64>,
    /// `(coefficient, reference 2ħ/(πγ))` of `Δq` against `ln t`.
    pub log_coefficient: Option<(f64, f64)>,
}

impl SimulationReport {
    pub fn final_state(&self) -> &CovarianceState {
        self.trajectory.last().expect("trajectory has at least one sample")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let last = self.final_state();
        let _ = writeln!(s, "scenario: {}", self.name);
        if !self.claim.is_empty() {
            let _ = writeln!(s, "claim: {}", self.claim);
        }
        let m = &self.trajectory.meta;
        let _ = writeln!(
            s,
            "integrator: {} (rtol {:e}, atol {:e}, noise {}, {} steps, {} rejected)",
            m.integrator, m.rtol, m.atol, m.source, m.stats.accepted, m.stats.rejected
        );
        let _ = writeln!(s, "t_end: {:.10e}", last.time());
        for i in 0..last.n() {
            let _ = writeln!(s, "final dq[{i}]: {:.12e}", last.dq(i));
        }
        if let Some(p) = &self.predicted {
            for i in 0..p.n() {
                let _ = writeln!(s, "predicted dq[{i}]: {:.12e}", p.dq(i));
            }
        }
        if let Some(w) = self.reference_width {
            let _ = writeln!(s, "reference width: {w:.12e}");
        }
        if let Some(v) = self.landscape_end {
            let _ = writeln!(s, "landscape at end: {v:.12e}");
        }
        if let Some(v) = self.slope {
            let _ = writeln!(s, "late-time slope: {v:.12e}");
        }
        if let Some((a, r)) = self.log_coefficient {
            let _ = writeln!(s, "log coefficient: {a:.12e} (reference {r:.12e}, ratio {:.6})", a / r);
        }
        s
    }
}

pub fn cmd_simulate(sc: &Scenario) -> Result<SimulationReport> {
    let trajectory = run_trajectory(sc, &sc.bath, &sc.outputs)?;
    let xi = stationary_xi(sc)?;
    let predicted = if sc.bath.active() {
        stationary_state(&sc.system, &xi)?
    } else {
        Some(predict_asymptotic(&sc.system, &sc.initial)?)
    };
    let reference_width = match (sc.system.n(), sc.bath.active()) {
        (1, true) => {
            let (w, g) = scalar_params(&sc.system)?;
            let units = sc.system.units();
            match (w > 0.0, sc.noise) {
                (false, _) => None,
                (true, NoiseModel::Classical) => Some(sc.bath.scale * units.k_boltzmann * sc.bath.temperature / (w * w)),
                (true, _) => {
                    Some(sc.bath.scale * g * diffusion_coefficient(g, w, sc.bath.temperature, units)?.value / (w * w))
                }
            }
        }
        _ => None,
    };
    let last = trajectory.last().ok_or_else(|| Error::InsufficientData("empty output schedule".into()))?;
    let landscape_end = scenario_landscape(sc).ok().map(|d| d.value_at(last)).transpose()?;
    let slope = sc.slope_window.map(|w| late_time_slope(&trajectory, w)).transpose()?;
    let log_coefficient = match sc.log_fit {
        Some([a, b]) => {
            let (_, g) = scalar_params(&sc.system)?;
            let (coef, _) = log_fit(&trajectory, a, b)?;
            Some((coef, 2.0 * sc.system.units().hbar / (std::f64::consts::PI * g)))
        }
        None => None,
    };
    Ok(SimulationReport {
        name: sc.name.clone(),
        claim: sc.claim.clone(),
        trajectory,
        predicted,
        reference_width,
        landscape_end,
        slope,
        log_coefficient,
    })
}

#[derive(Debug, Clone)]
pub struct LandscapePanel {
    pub panel: Panel,
    pub gamma: f64,
    pub omega: f64,
    pub xi: [f64; 2],
    pub decomposition: LandscapeDecomposition,
    pub grid: LandscapeGrid,
}

impl LandscapePanel {
    pub fn sidecar(&self, sc: &Scenario) -> Result<String> {
        let mut t = toml::Table::new();
        t.insert("scenario".into(), sc.name.clone().into());
        t.insert("panel".into(), self.panel.label.clone().into());
        t.insert("mode".into(), format!("{:?}", self.panel.mode).to_lowercase().into());
        t.insert("gamma".into(), self.gamma.into());
        t.insert("omega".into(), self.omega.into());
        t.insert("delta_qxi".into(), self.xi[0].into());
        t.insert("delta_pxi".into(), self.xi[1].into());
        if !sc.claim.is_empty() {
            t.insert("claim".into(), sc.claim.clone().into());
        }
        self.grid.sidecar_toml(&t)
    }
}

pub fn cmd_landscape(sc: &Scenario) -> Result<Vec<LandscapePanel>> {
    let cfg = sc
        .landscape
        .as_ref()
        .ok_or_else(|| Error::Config { key: "landscape".into(), message: "scenario has no [landscape] section".into() })?;
    cfg.panels
        .iter()
        .map(|panel| {
            let (spec, omega, gamma) = match sc.system.n() {
                1 => {
                    let (w0, g) = scalar_params(&sc.system)?;
                    let w = panel.omega.unwrap_or(w0);
                    (SystemSpec::oscillator_with_units(w, g, sc.system.units())?, w, g)
                }
                _ => (sc.system.clone(), f64::NAN, f64::NAN),
            };
            let panel_sc = Scenario { system: spec.clone(), ..sc.clone() };
            let xi_mat = stationary_xi(&panel_sc)?;
            let xi = match (panel.xi, spec.n()) {
                (Some(x), _) => x,
                (None, 1) => [xi_mat[(0, 1)], 0.5 * xi_mat[(1, 1)]],
                (None, _) => [f64::NAN, f64::NAN],
            };
            let decomposition = match panel.mode {
                LandscapeMode::Cho => landscape_cho(gamma, omega)?,
                LandscapeMode::Fp => landscape_fp(gamma)?,
                LandscapeMode::Qbm => landscape_qbm(gamma, omega, xi[0], xi[1])?,
                LandscapeMode::General => {
                    let xi_full = match (panel.xi, spec.n()) {
                        (Some([q, p]), 1) => DMatrix::from_row_slice(2, 2, &[0.0, q, q, 2.0 * p]),
                        _ => xi_mat,
                    };
                    landscape_for_system(&spec, Some(&xi_full))?
                }
            };
            let grid = landscape_grid(&decomposition, cfg.axes, cfg.fixed)?;
            Ok(LandscapePanel { panel: panel.clone(), gamma, omega, xi, decomposition, grid })
        })
        .collect()
}

pub fn cmd_diffusion(gamma: f64, omega: f64, temperature: f64, order: Option<usize>, units: Units) -> Result<String> {
    let d = diffusion_coefficient(gamma, omega, temperature, units)?;
    let mut s = String::new();
    let _ = writeln!(s, "D = {}", d.value);
    let _ = writeln!(s, "error = {:e}", d.error);
    let _ = writeln!(s, "regime = {}", d.regime.name());
    if omega > 0.0 {
        let _ = writeln!(s, "zero-temperature closed form = {}", diffusion_zero_t_closed(gamma, omega, units)?.value);
        let _ = writeln!(s, "confined width gamma*D/omega^2 = {}", gamma * d.value / (omega * omega));
        if let Some(k) = order {
            let series = diffusion_low_t_series(gamma, omega, temperature, k, units)?;
            let _ = writeln!(s, "low-temperature series (order {k}) = {}", series.value);
            let _ = writeln!(s, "next term = {:e}", series.next_term);
            if series.outside_validity {
                let _ = writeln!(s, "warning: k_B T > 0.2 hbar omega, series outside its validity range");
            }
        }
    } else if order.is_some() {
        return Err(Error::WrongRegime("the low-temperature series needs omega > 0".into()));
    }
    Ok(s)
}

/// `(γ, ω, T, D, err)` over the Cartesian product, computed in parallel.
pub fn diffusion_sweep(
    gammas: &[f64],
    omegas: &[f64],
    temps: &[f64],
    units: Units,
) -> Result<Vec<(f64, f64, f64, f64, f64)>> {
    let mut points = Vec::new();
    for &g in gammas {
        for &w in omegas {
            for &t in temps {
                points.push((g, w, t));
            }
        }
    }
    points
        .par_iter()
        .map(|&(g, w, t)| diffusion_coefficient(g, w, t, units).map(|d| (g, w, t, d.value, d.error)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AsymptoticsReport {
    pub name: String,
    pub kernel_dim: usize,
    pub flat_directions: usize,
    pub pairing_condition: Option<f64>,
    pub conserved: Vec<f64>,
    pub predicted: CovarianceState,
    /// Exact propagation to the scenario's end time, for comparison.
    pub propagated: CovarianceState,
}

impl AsymptoticsReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(s, "kernel dimension: {}", self.kernel_dim);
        let _ = writeln!(s, "symmetrized flat directions: {}", self.flat_directions);
        match self.pairing_condition {
            Some(c) => {
                let _ = writeln!(s, "pairing condition number: {c:.6e}");
            }
            None => {
                let _ = writeln!(s, "pairing condition number: n/a (no zero modes, collapse)");
            }
        }
        for (k, v) in self.conserved.iter().enumerate() {
            let _ = writeln!(s, "conserved[{k}]: {v:.12e}");
        }
        let _ = writeln!(s, "entry,predicted,propagated(t={:.6e})", self.propagated.time());
        for ((name, p), (_, q)) in self.predicted.independent_entries().into_iter().zip(self.propagated.independent_entries()) {
            let _ = writeln!(s, "{name},{p:.12e},{q:.12e}");
        }
        s
    }
}

pub fn cmd_asymptotics(sc: &Scenario) -> Result<AsymptoticsReport> {
    if sc.bath.active() {
        return Err(Error::Unsupported("asymptotics from zero modes apply to fluctuation-free scenarios".into()));
    }
    let basis = zero_mode_basis(&sc.system, DEFAULT_KERNEL_TOL)?;
    let sigma0 = sc.initial.vec();
    let v = asymptotic_covariance(basis.as_ref(), &sigma0)?;
    let predicted = CovarianceState::new(linalg::symmetrize(&linalg::unvec(&v, 2 * sc.system.n())), f64::INFINITY)?;
    let propagated = propagate_exact(&sc.initial, &build_drift(&sc.system), sc.t_end)?;
    let d = basis.as_ref().map_or(0, |b| b.dim());
    Ok(AsymptoticsReport {
        name: sc.name.clone(),
        kernel_dim: d,
        flat_directions: d * (d + 1) / 2,
        pairing_condition: basis.as_ref().map(|b| b.pairing_condition),
        conserved: basis.as_ref().map(|b| conserved_values(b, &sigma0).iter().copied().collect()).unwrap_or_default(),
        predicted,
        propagated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsRow {
    /// `ω` (trap mode) or `λ` (fluctuation mode).
    pub parameter: f64,
    pub t: f64,
    pub dq_at_t: f64,
    /// `t → ∞` width at fixed parameter; infinite when it grows without bound.
    pub dq_limit: f64,
    /// Late-time slope (fluctuation mode) and its prediction `2λD`.
    pub slope: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsTable {
    pub mode: LimitsMode,
    pub rows: Vec<LimitsRow>,
}

impl LimitsTable {
    pub fn csv(&self) -> String {
        let mut s = String::new();
        match self.mode {
            LimitsMode::Trap => {
                s.push_str("omega,t,dq_at_t,dq_limit\n");
                for r in &self.rows {
                    let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", r.parameter, r.t, r.dq_at_t, r.dq_limit);
                }
            }
            LimitsMode::Fluctuation => {
                s.push_str("lambda,t,dq_at_t,slope,slope_expected,dq_limit\n");
                for r in &self.rows {
                    let (a, b) = r.slope.unwrap_or((f64::NAN, f64::NAN));
                    let _ = writeln!(
                        s,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        r.parameter, r.t, r.dq_at_t, a, b, r.dq_limit
                    );
                }
            }
        }
        s
    }
}

pub fn cmd_limits(sc: &Scenario) -> Result<LimitsTable> {
    let cfg = sc
        .limits
        .as_ref()
        .ok_or_else(|| Error::Config { key: "limits".into(), message: "scenario has no [limits] section".into() })?;
    let (_, gamma) = scalar_params(&sc.system)?;
    let units = sc.system.units();
    let rows = match cfg.mode {
        LimitsMode::Trap => cfg
            .values
            .iter()
            .map(|&w| {
                let spec = SystemSpec::oscillator_with_units(w, gamma, units)?;
                let at_t = propagate_exact(&sc.initial, &build_drift(&spec), cfg.t_end)?;
                let limit = predict_asymptotic(&spec, &sc.initial)?;
                Ok(LimitsRow { parameter: w, t: cfg.t_end, dq_at_t: at_t.dq(0), dq_limit: limit.dq(0), slope: None })
            })
            .collect::<Result<Vec<_>>>()?,
        LimitsMode::Fluctuation => {
            let base = if sc.bath.enabled { sc.bath } else { BathSpec::new(sc.bath.temperature) };
            let outputs = linear_times(0.0, cfg.t_end, 400);
            let drive = {
                let xi = match sc.noise {
                    NoiseModel::Classical => classical_xi(&sc.system, base.temperature, 1.0),
                    _ => build_xi_matrix(&sc.system, &base.with_scale(1.0), XiTime::Stationary)?,
                };
                let (w, g) = scalar_params(&sc.system)?;
                if w != 0.0 {
                    return Err(Error::WrongRegime("the fluctuation limit table is for the free particle (omega = 0)".into()));
                }
                (g * xi[(0, 1)] + 0.5 * xi[(1, 1)]) / (g * g)
            };
            cfg.values
                .iter()
                .map(|&lam| {
                    let bath = base.with_scale(lam);
                    let traj = run_trajectory(sc, &bath, &outputs)?;
                    let last = traj.last().expect("nonempty schedule");
                    let slope = late_time_slope(&traj, 0.5)?;
                    let dq_limit = if lam == 0.0 { predict_asymptotic(&sc.system, &sc.initial)?.dq(0) } else { f64::INFINITY };
                    Ok(LimitsRow {
                        parameter: lam,
                        t: cfg.t_end,
                        dq_at_t: last.dq(0),
                        dq_limit,
                        slope: Some((slope, 2.0 * lam * drive)),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(LimitsTable { mode: cfg.mode, rows })
}

/// Runs whatever a scenario's kind asks for and renders a text report.
pub fn run_scenario(sc: &Scenario) -> Result<String> {
    Ok(match sc.kind {
        ScenarioKind::Simulate => cmd_simulate(sc)?.summary(),
        ScenarioKind::Asymptotics => cmd_asymptotics(sc)?.render(),
        ScenarioKind::Limits => cmd_limits(sc)?.csv(),
        ScenarioKind::Landscape => {
            let mut s = String::new();
            for p in cmd_landscape(sc)? {
                let _ = writeln!(s, "{}: {} nodes{}", p.panel.label, p.grid.rows.len(), flags(&p.grid));
            }
            s
        }
    })
}
