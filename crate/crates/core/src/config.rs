//! TOML scenario files and the bundled presets.
//!
//! ```toml
//! [scenario]
//! name = "fp-localization"
//! kind = "simulate"            # simulate | landscape | limits | asymptotics
//! claim = "free damped particle localizes to a² + ħ²/(4γ²a²)"
//!
//! [system]
//! omega = 0.0                  # single oscillator; or omega_matrix / gamma_matrix
//! gamma = 1.0
//! hbar = 1.0
//! k_boltzmann = 1.0
//!
//! [bath]
//! enabled = false
//! temperature = 0.0
//! cutoff = 1e3                 # optional
//! scale = 1.0
//! noise = "stationary"         # stationary | transient | classical
//!
//! [initial]
//! widths = [1.0]
//!
//! [schedule]
//! t_end = "auto"               # or a number; auto = 60 / slowest nonzero rate
//! points = 200
//! spacing = "linear"           # linear | geometric
//! t_first = 1e-2               # first output time for geometric spacing
//!
//! [integrator]
//! method = "adaptive"          # adaptive | exact
//! rtol = 1e-9
//! atol = 1e-12
//!
//! [output]
//! trajectory = "out.csv"
//! slope_window = 0.5
//! log_fit = [1e2, 1e4]
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::dynamics::{geometric_times, linear_times, IntegrateOptions};
use crate::error::{Error, Result};
use crate::landscape::{FixedCoordinate, GridAxes};
use crate::linalg;
use crate::model::{build_drift, vectorize_drift, BathSpec, CovarianceState, SystemSpec, Units};
use crate::zeromodes::make_gaussian_state;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Simulate,
    Landscape,
    Limits,
    Asymptotics,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: String,
    #[serde(default = "default_kind")]
    kind: ScenarioKind,
    #[serde(default)]
    claim: String,
}

fn default_kind() -> ScenarioKind {
    ScenarioKind::Simulate
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    omega: Option<f64>,
    gamma: Option<f64>,
    omega_matrix: Option<Vec<Vec<f64>>>,
    gamma_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    hbar: f64,
    #[serde(default = "one")]
    k_boltzmann: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    #[default]
    Stationary,
    Transient,
    Classical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BathSection {
    #[serde(default)]
    enabled: bool,
    #[serde(default)]
    temperature: f64,
    cutoff: Option<f64>,
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    noise: NoiseModel,
}

impl Default for BathSection {
    fn default() -> Self {
        BathSection { enabled: false, temperature: 0.0, cutoff: None, scale: 1.0, noise: NoiseModel::Stationary }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    widths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum TEnd {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    #[serde(default = "auto_end")]
    t_end: TEnd,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default)]
    spacing: Spacing,
    t_first: Option<f64>,
}

fn auto_end() -> TEnd {
    TEnd::Keyword(AutoKeyword::Auto)
}

fn default_points() -> usize {
    200
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { t_end: auto_end(), points: default_points(), spacing: Spacing::Linear, t_first: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Adaptive,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorSection {
    #[serde(default)]
    method: Method,
    #[serde(default = "default_rtol")]
    rtol: f64,
    #[serde(default = "default_atol")]
    atol: f64,
}

fn default_rtol() -> f64 {
    1e-9
}

fn default_atol() -> f64 {
    1e-12
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection { method: Method::Adaptive, rtol: default_rtol(), atol: default_atol() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    trajectory: Option<String>,
    slope_window: Option<f64>,
    log_fit: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandscapeMode {
    /// Oscillator bowl.
    Cho,
    /// Free-particle valley.
    Fp,
    /// Bowl or valley with the bath shift or tilt.
    Qbm,
    /// Lyapunov-gauge or zero-mode-projected construction.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum FixedSpec {
    Value(f64),
    Keyword(MinimizeKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MinimizeKeyword {
    Minimize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelSection {
    label: String,
    mode: LandscapeMode,
    omega: Option<f64>,
    xi: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandscapeSection {
    mode: Option<LandscapeMode>,
    #[serde(default)]
    panel: Vec<PanelSection>,
    #[serde(default = "default_dq_range")]
    dq: [f64; 2],
    #[serde(default = "default_dp_range")]
    dp: [f64; 2],
    #[serde(default = "default_grid_points")]
    points: [usize; 2],
    #[serde(default = "minimize")]
    fixed: FixedSpec,
}

fn default_dq_range() -> [f64; 2] {
    [-1.0, 3.0]
}

fn default_dp_range() -> [f64; 2] {
    [-1.0, 3.0]
}

fn default_grid_points() -> [usize; 2] {
    [81, 81]
}

fn minimize() -> FixedSpec {
    FixedSpec::Keyword(MinimizeKeyword::Minimize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitsMode {
    /// `ω → 0` against `t → ∞` without fluctuations.
    Trap,
    /// `λ → 0` against `t → ∞` for the free particle.
    Fluctuation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsSection {
    mode: LimitsMode,
    values: Option<Vec<f64>>,
    t_end: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: ScenarioSection,
    system: SystemSection,
    #[serde(default)]
    bath: BathSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    schedule: ScheduleSection,
    #[serde(default)]
    integrator: IntegratorSection,
    #[serde(default)]
    output: OutputSection,
    landscape: Option<LandscapeSection>,
    limits: Option<LimitsSection>,
}

/// One landscape surface. `omega` overrides the system trap frequency and
/// `xi = [Δqξ, Δpξ]` replaces the bath-computed fluctuation terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub label: String,
    pub mode: LandscapeMode,
    pub omega: Option<f64>,
    pub xi: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeConfig {
    pub panels: Vec<Panel>,
    pub axes: GridAxes,
    pub fixed: FixedCoordinate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsConfig {
    pub mode: LimitsMode,
    pub values: Vec<f64>,
    pub t_end: f64,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub claim: String,
    pub system: SystemSpec,
    pub bath: BathSpec,
    pub noise: NoiseModel,
    pub initial: CovarianceState,
    pub t_end: f64,
    pub outputs: Vec<f64>,
    pub method: Method,
    pub integrator: IntegrateOptions,
    pub trajectory_path: Option<String>,
    pub slope_window: Option<f64>,
    pub log_fit: Option<[f64; 2]>,
    pub landscape: Option<LandscapeConfig>,
    pub limits: Option<LimitsConfig>,
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn matrix(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(cfg_err(key, "must be a nonempty square array of rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn with_key<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => cfg_err(key, other.to_string()),
    })
}

/// Slowest nonzero relaxation rate of the fluctuation-free covariance flow.
pub fn slowest_rate(spec: &SystemSpec) -> Result<f64> {
    let h = build_drift(spec);
    let tol = 1e-10 * vectorize_drift(&h)?.norm();
    let rate = linalg::kron_sum_eigenvalues(&h)?
        .into_iter()
        .map(|(re, im)| (re, (re * re + im * im).sqrt()))
        .filter(|&(_, abs)| abs > tol)
        .map(|(re, _)| -re)
        .fold(f64::INFINITY, f64::min);
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::validation("no decaying mode to set an automatic end time"));
    }
    Ok(rate)
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            cfg_err(&at, e.message().to_string())
        })?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { key, message } => cfg_err(&format!("{}: {key}", path.display()), message),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| {
            cfg_err("preset", format!("unknown preset '{name}'; available: {}", PRESET_NAMES.join(", ")))
        })?;
        Self::from_toml(text)
    }

    fn from_file(file: ScenarioFile) -> Result<Self> {
        let sys = &file.system;
        let units = with_key("system.hbar", Units::new(sys.hbar, sys.k_boltzmann))?;
        let system = match (&sys.omega_matrix, &sys.gamma_matrix, sys.omega, sys.gamma) {
            (Some(om), Some(gm), None, None) => {
                let om = matrix("system.omega_matrix", om)?;
                let gm = matrix("system.gamma_matrix", gm)?;
                with_key("system", SystemSpec::new(om, gm, units))?
            }
            (None, None, Some(w), Some(g)) => with_key("system", SystemSpec::oscillator_with_units(w, g, units))?,
            _ => {
                return Err(cfg_err(
                    "system",
                    "give either omega and gamma, or omega_matrix and gamma_matrix",
                ))
            }
        };
        let n = system.n();

        let b = &file.bath;
        let bath = if b.enabled {
            let mut spec = BathSpec::new(b.temperature).with_scale(b.scale);
            if let Some(c) = b.cutoff {
                spec = spec.with_cutoff(c);
            }
            spec
        } else {
            BathSpec::disabled()
        };
        with_key("bath", bath.validate())?;
        if bath.active() && b.noise != NoiseModel::Classical && n > 1 && !system.commuting() {
            return Err(cfg_err("bath", "Ohmic noise for N > 1 needs commuting omega_matrix and gamma_matrix"));
        }

        let widths = file.initial.widths.clone().unwrap_or_else(|| vec![1.0; n]);
        if widths.len() != n {
            return Err(cfg_err("initial.widths", format!("expected {n} widths, got {}", widths.len())));
        }
        let initial = with_key("initial.widths", make_gaussian_state(&widths, units))?;

        let s = &file.schedule;
        let t_end = match s.t_end {
            TEnd::Value(v) if v > 0.0 && v.is_finite() => v,
            TEnd::Value(v) => return Err(cfg_err("schedule.t_end", format!("must be positive, got {v}"))),
            TEnd::Keyword(AutoKeyword::Auto) => 60.0 / with_key("schedule.t_end", slowest_rate(&system))?,
        };
        if s.points == 0 {
            return Err(cfg_err("schedule.points", "must be at least 1"));
        }
        let outputs = match s.spacing {
            Spacing::Linear => linear_times(0.0, t_end, s.points),
            Spacing::Geometric => {
                let t0 = s.t_first.ok_or_else(|| cfg_err("schedule.t_first", "required for geometric spacing"))?;
                if !(t0 > 0.0 && t0 < t_end) {
                    return Err(cfg_err("schedule.t_first", "must lie in (0, t_end)"));
                }
                geometric_times(t0, t_end, s.points.max(2))
            }
        };

        let ig = &file.integrator;
        if !(ig.rtol > 0.0 && ig.atol > 0.0) {
            return Err(cfg_err("integrator", "rtol and atol must be positive"));
        }
        if ig.method == Method::Exact && bath.active() {
            return Err(cfg_err("integrator.method", "exact propagation applies only with the bath disabled"));
        }

        let out = &file.output;
        if let Some(w) = out.slope_window {
            if !(w > 0.0 && w <= 1.0) {
                return Err(cfg_err("output.slope_window", "must lie in (0, 1]"));
            }
        }
        if let Some([a, b]) = out.log_fit {
            if !(a > 0.0 && b > a) {
                return Err(cfg_err("output.log_fit", "needs 0 < start < end"));
            }
        }

        let landscape = match &file.landscape {
            None => None,
            Some(l) => {
                let axes = GridAxes {
                    dq_min: l.dq[0],
                    dq_max: l.dq[1],
                    dq_points: l.points[0],
                    dp_min: l.dp[0],
                    dp_max: l.dp[1],
                    dp_points: l.points[1],
                };
                with_key("landscape", axes.validate())?;
                let panels: Vec<Panel> = match (l.mode, l.panel.is_empty()) {
                    (Some(mode), true) => {
                        vec![Panel { label: file.scenario.name.clone(), mode, omega: None, xi: None }]
                    }
                    (None, false) => l
                        .panel
                        .iter()
                        .map(|p| Panel { label: p.label.clone(), mode: p.mode, omega: p.omega, xi: p.xi })
                        .collect(),
                    _ => return Err(cfg_err("landscape", "give either mode or one or more [[landscape.panel]] entries")),
                };
                for p in &panels {
                    if n != 1 && (p.mode != LandscapeMode::General || p.omega.is_some() || p.xi.is_some()) {
                        return Err(cfg_err("landscape.panel", "explicit landscapes and overrides are single-oscillator only"));
                    }
                    if let Some(w) = p.omega {
                        if !(w >= 0.0 && w.is_finite()) {
                            return Err(cfg_err("landscape.panel.omega", "must be nonnegative"));
                        }
                    }
                }
                let fixed = match l.fixed {
                    FixedSpec::Value(v) => FixedCoordinate::Value(v),
                    FixedSpec::Keyword(MinimizeKeyword::Minimize) => FixedCoordinate::Minimize,
                };
                Some(LandscapeConfig { panels, axes, fixed })
            }
        };

        let limits = match &file.limits {
            None => None,
            Some(l) => {
                if n != 1 {
                    return Err(cfg_err("limits", "limit tables are single-oscillator only"));
                }
                let values = l.values.clone().unwrap_or_else(|| match l.mode {
                    LimitsMode::Trap => vec![0.0, 1e-3, 1e-2, 1e-1],
                    LimitsMode::Fluctuation => vec![0.0, 1e-2, 1e-1, 1.0],
                });
                if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(cfg_err("limits.values", "must be a nonempty list of nonnegative numbers"));
                }
                let t_end = l.t_end.unwrap_or(1e4);
                if !(t_end > 0.0 && t_end.is_finite()) {
                    return Err(cfg_err("limits.t_end", "must be positive"));
                }
                Some(LimitsConfig { mode: l.mode, values, t_end })
            }
        };

        match file.scenario.kind {
            ScenarioKind::Landscape if landscape.is_none() => {
                return Err(cfg_err("landscape", "a landscape scenario needs a [landscape] section"))
            }
            ScenarioKind::Limits if limits.is_none() => {
                return Err(cfg_err("limits", "a limits scenario needs a [limits] section"))
            }
            _ => {}
        }

        Ok(Scenario {
            name: file.scenario.name,
            kind: file.scenario.kind,
            claim: file.scenario.claim,
            system,
            bath,
            noise: b.noise,
            initial,
            t_end,
            outputs,
            method: ig.method,
            integrator: IntegrateOptions { rtol: ig.rtol, atol: ig.atol, ..Default::default() },
            trajectory_path: out.trajectory.clone(),
            slope_window: out.slope_window,
            log_fit: out.log_fit,
            landscape,
            limits,
        })
    }

    /// Overrides the integrator tolerance: `rtol = tol`, `atol = tol·10⁻³`.
    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(cfg_err("--tol", "must be positive"));
        }
        self.integrator = IntegrateOptions { rtol: tol, atol: tol * 1e-3, ..self.integrator };
        Ok(self)
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "cho-collapse",
    "fp-localization",
    "qbm-confined",
    "qbm-high-t",
    "einstein-diffusion",
    "log-spreading",
    "limits-trap",
    "limits-fluctuation",
    "landscape-trap",
    "landscape-fluctuation",
    "coupled-pair",
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "cho-collapse" => include_str!("../presets/cho-collapse.toml"),
        "fp-localization" => include_str!("../presets/fp-localization.toml"),
        "qbm-confined" => include_str!("../presets/qbm-confined.toml"),
        "qbm-high-t" => include_str!("../presets/qbm-high-t.toml"),
        "einstein-diffusion" => include_str!("../presets/einstein-diffusion.toml"),
        "log-spreading" => include_str!("../presets/log-spreading.toml"),
        "limits-trap" => include_str!("../presets/limits-trap.toml"),
        "limits-fluctuation" => include_str!("../presets/limits-fluctuation.toml"),
        "landscape-trap" => include_str!("../presets/landscape-trap.toml"),
        "landscape-fluctuation" => include_str!("../presets/landscape-fluctuation.toml"),
        "coupled-pair" => include_str!("../presets/coupled-pair.toml"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in PRESET_NAMES {
            let s = Scenario::preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&s.name, name);
            assert!(!s.claim.is_empty(), "{name} lacks a claim");
        }
    }

    #[test]
    fn auto_end_time_for_free_particle() {
        let s = Scenario::preset("fp-localization").unwrap();
        assert!((s.t_end - 60.0).abs() < 1e-9);
        assert_eq!(*s.outputs.last().unwrap(), s.t_end);
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        let text = "[scenario]\nname = \"x\"\n[system]\nomega = 1.0\ngamma = 1.0\nbogus = 3\n";
        match Scenario::from_toml(text) {
            Err(Error::Config { key, message }) => {
                assert_eq!(key, "line 6");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_physics_names_the_section() {
        let text = "[scenario]\nname = \"x\"\n[system]\nomega = 1.0\ngamma = -1.0\n";
        match Scenario::from_toml(text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "system"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matrices_and_widths_must_agree() {
        let text = "[scenario]\nname = \"x\"\n[system]\nomega_matrix = [[1.0, 0.0], [0.0, 1.0]]\n\
                    gamma_matrix = [[1.0, 0.0], [0.0, 1.0]]\n[initial]\nwidths = [1.0]\n";
        assert!(matches!(Scenario::from_toml(text), Err(Error::Config { key, .. }) if key == "initial.widths"));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Scenario::preset("nope"), Err(Error::Config { .. })));
    }
}
