// SPDX-License-Identifier: MIT OR Apache-2.0
//! Run configuration files and the built-in scenario presets.
//!
//! Configs are TOML. Every table rejects unknown keys, so a typo in `alpha`
//! or `length` is an error rather than a silent default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fracop::FracOrder;
use crate::fronts::{Direction, Level};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::snapshot;
use crate::solver::{InitialData, Scheme, SolverConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub alpha: f64,
    pub d: usize,
    /// Seed for randomized checks.
    #[serde(default)]
    pub seed: u64,
    pub mu: MuSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub eigen: EigenSpec,
    pub solver: SolverSpec,
    pub initial: InitialData,
    pub fronts: FrontsSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub attractor: AttractorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// μ on the unit cell [0, 1)^d.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum MuSpec {
    Constant {
        value: f64,
        #[serde(default = "default_cell_n")]
        cell_n: usize,
    },
    /// mean + amplitude·Π cos(2π x_i)
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "default_cell_n")]
        cell_n: usize,
    },
    /// A snapshot file holding the cell field, relative to the config file.
    File { path: PathBuf },
}

fn default_cell_n() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// points per axis
    pub n: usize,
    /// box side, a whole number of cells
    pub length: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSpec {
    #[serde(default = "default_eigen_tol")]
    pub tol: f64,
    #[serde(default = "default_eigen_iter")]
    pub max_iter: usize,
}

fn default_eigen_tol() -> f64 {
    1e-11
}

fn default_eigen_iter() -> usize {
    1000
}

impl Default for EigenSpec {
    fn default() -> Self {
        Self {
            tol: default_eigen_tol(),
            max_iter: default_eigen_iter(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub snapshot_every: f64,
    /// Extra snapshot times on top of the regular ones.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub front_guard: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontsSpec {
    pub levels: Vec<f64>,
    /// Integer lattice steps; default: ± each axis, plus the main diagonal for d ≥ 2.
    #[serde(default)]
    pub directions: Option<Vec<Vec<isize>>>,
    pub fit_window: [f64; 2],
    #[serde(default = "default_ten_percent")]
    pub slope_tolerance: f64,
    #[serde(default = "default_ten_percent")]
    pub isotropy_threshold: f64,
}

fn default_ten_percent() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default)]
    pub enabled: bool,
    /// Profile widths w (b = w^{−(d+2α)}) over which D is maximized.
    #[serde(default = "default_widths")]
    pub d_widths: Vec<f64>,
    /// M B̲^q / |λ1| for the residual-check subsolution, in (0, 1).
    #[serde(default = "default_sub_ratio")]
    pub sub_ratio: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_check_times")]
    pub check_times: Vec<f64>,
    /// Multiplier applied to a̲ in the residual check (1 = none).
    #[serde(default = "default_one")]
    pub sabotage: f64,
    /// Step 3 start time; default 1.05 × the smallest admissible t1.
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default = "default_slack")]
    pub ordering_slack: f64,
    #[serde(default = "default_radius_tol")]
    pub radius_tolerance: f64,
}

fn default_widths() -> Vec<f64> {
    vec![1.0, 4.0, 16.0, 64.0]
}

fn default_sub_ratio() -> f64 {
    0.5
}

fn default_check_times() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0, 8.0]
}

fn default_one() -> f64 {
    1.0
}

fn default_slack() -> f64 {
    1e-6
}

fn default_radius_tol() -> f64 {
    0.05
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            d_widths: default_widths(),
            sub_ratio: default_sub_ratio(),
            gamma: None,
            check_times: default_check_times(),
            sabotage: default_one(),
            t1: None,
            ordering_slack: default_slack(),
            radius_tolerance: default_radius_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
    #[serde(default = "default_y_n")]
    pub y_n: usize,
    #[serde(default = "default_attractor_times")]
    pub times: Vec<f64>,
    /// Allowed increase of the distance per step.
    #[serde(default = "default_attractor_slack")]
    pub slack: f64,
}

fn default_y_max() -> f64 {
    crate::attractor::DEFAULT_Y_MAX
}

fn default_y_n() -> usize {
    256
}

fn default_attractor_times() -> Vec<f64> {
    vec![4.0, 6.0, 8.0]
}

fn default_attractor_slack() -> f64 {
    1e-3
}

impl Default for AttractorSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            y_max: default_y_max(),
            y_n: default_y_n(),
            times: default_attractor_times(),
            slack: default_attractor_slack(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub snapshots: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            snapshots: true,
        }
    }
}

/// Built-in presets, one per acceptance scenario.
pub const PRESETS: &[(&str, &str)] = &[
    ("homog-1d-a025", include_str!("../presets/homog-1d-a025.toml")),
    ("periodic-1d-a025", include_str!("../presets/periodic-1d-a025.toml")),
    ("isotropy-2d-a03", include_str!("../presets/isotropy-2d-a03.toml")),
    ("eigen-cosine-1d", include_str!("../presets/eigen-cosine-1d.toml")),
    ("operators-1d", include_str!("../presets/operators-1d.toml")),
    ("bounds-1d-a025", include_str!("../presets/bounds-1d-a025.toml")),
    ("sandwich-1d-a025", include_str!("../presets/sandwich-1d-a025.toml")),
    ("attractor-1d-a025", include_str!("../presets/attractor-1d-a025.toml")),
    ("comparison-1d", include_str!("../presets/comparison-1d.toml")),
    ("steady-cosine-1d", include_str!("../presets/steady-cosine-1d.toml")),
    ("tiny-box", include_str!("../presets/tiny-box.toml")),
];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown preset {name:?}; known: {}", names.join(", ")))
        })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::parse(preset_text(name)?)
    }
}

/// A validated configuration with its derived objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: RunConfig,
    pub order: FracOrder,
    pub mu_cell: ScalarField,
    pub grid: PeriodicGrid,
    pub levels: Vec<Level>,
    pub directions: Vec<Direction>,
    pub solver: SolverConfig,
    pub warnings: Vec<String>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl Scenario {
    /// Validates `cfg`; relative paths resolve against `base`.
    pub fn new(cfg: RunConfig, base: &Path) -> Result<Self> {
        let order = FracOrder::new(cfg.alpha, cfg.d).map_err(config_err)?;
        let mut warnings = Vec::new();
        if cfg.alpha >= 0.5 {
            warnings.push(format!(
                "alpha = {} >= 1/2: the bounds use the modified exponent (2α − γ)/(d + 2α)",
                cfg.alpha
            ));
        }
        let mu_cell = build_mu(&cfg.mu, cfg.d, base)?;
        let mu_min = mu_cell.min();
        if !(mu_min > 0.0) {
            return Err(Error::Config(format!("min mu = {mu_min} must be positive")));
        }
        let grid = PeriodicGrid::cube(cfg.d, cfg.grid.n, cfg.grid.length, true).map_err(config_err)?;
        let cells = cfg.grid.length;
        if (cells - cells.round()).abs() > 1e-9 || cells < 1.0 {
            return Err(Error::Config(format!(
                "grid length {cells} must be a whole number of unit cells"
            )));
        }
        if cfg.fronts.levels.is_empty() {
            return Err(Error::Config("at least one front level is required".into()));
        }
        let levels = cfg
            .fronts
            .levels
            .iter()
            .map(|&l| Level::new(l, mu_min))
            .collect::<Result<Vec<_>>>()
            .map_err(config_err)?;
        let directions = match &cfg.fronts.directions {
            Some(list) => list
                .iter()
                .map(|s| {
                    if s.len() != cfg.d {
                        return Err(Error::Config(format!("direction {s:?} is not {}-dimensional", cfg.d)));
                    }
                    Direction::new(s).map_err(config_err)
                })
                .collect::<Result<Vec<_>>>()?,
            None => default_directions(cfg.d),
        };
        let [a, b] = cfg.fronts.fit_window;
        if !(a < b) {
            return Err(Error::Config(format!("fit_window [{a}, {b}] is empty")));
        }
        let solver = solver_config(&cfg)?;
        let bounds = &cfg.bounds;
        if !(bounds.sub_ratio > 0.0 && bounds.sub_ratio < 1.0) {
            return Err(Error::Config(format!("sub_ratio {} not in (0, 1)", bounds.sub_ratio)));
        }
        if bounds.d_widths.is_empty() || bounds.d_widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("d_widths must be positive and non-empty".into()));
        }
        if !(bounds.sabotage > 0.0) {
            return Err(Error::Config("sabotage factor must be positive".into()));
        }
        if cfg.attractor.y_n < 8 || !cfg.attractor.y_n.is_power_of_two() {
            return Err(Error::Config("attractor y_n must be a power of two >= 8".into()));
        }
        if !(cfg.attractor.y_max > 0.0) {
            return Err(Error::Config("attractor y_max must be positive".into()));
        }
        Ok(Self {
            cfg,
            order,
            mu_cell,
            grid,
            levels,
            directions,
            solver,
            warnings,
        })
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        Self::new(RunConfig::preset(name)?, Path::new("."))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::new(RunConfig::from_file(path)?, base)
    }

    /// Radius up to which fronts are measured: front_guard·L/2.
    pub fn r_max(&self) -> f64 {
        self.solver.front_guard * self.grid.half_width()
    }

    /// Adds `extra` times (within [0, t_end]) to the snapshot schedule.
    pub fn with_snapshots(&self, extra: &[f64]) -> SolverConfig {
        let mut cfg = self.solver.clone();
        cfg.snapshot_times = merge_times(&cfg.snapshot_times, extra, cfg.t_end);
        cfg
    }
}

fn default_directions(d: usize) -> Vec<Direction> {
    let mut dirs = Direction::axes(d);
    if d >= 2 {
        dirs.push(Direction::new(&vec![1; d]).expect("nonzero"));
    }
    dirs
}

fn merge_times(base: &[f64], extra: &[f64], t_end: f64) -> Vec<f64> {
    let mut all: Vec<f64> = base
        .iter()
        .chain(extra)
        .cloned()
        .filter(|&t| t >= 0.0 && t <= t_end)
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    all
}

fn solver_config(cfg: &RunConfig) -> Result<SolverConfig> {
    let s = &cfg.solver;
    if !(s.snapshot_every > 0.0) {
        return Err(Error::Config("snapshot_every must be positive".into()));
    }
    if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
        return Err(Error::Config(format!("t_end = {} must be >= 0", s.t_end)));
    }
    let regular = SolverConfig::regular_times(s.snapshot_every, s.t_end);
    let out = SolverConfig {
        dt: s.dt,
        t_end: s.t_end,
        scheme: s.scheme,
        snapshot_times: merge_times(&regular, &s.snapshot_times, s.t_end),
        front_guard: s.front_guard,
    };
    out.validate()?;
    Ok(out)
}

fn build_mu(spec: &MuSpec, d: usize, base: &Path) -> Result<ScalarField> {
    let cell = |n: usize| PeriodicGrid::cube(d, n, 1.0, false).map_err(config_err);
    match spec {
        MuSpec::Constant { value, cell_n } => Ok(ScalarField::constant(&cell(*cell_n)?, *value)),
        MuSpec::Cosine {
            mean,
            amplitude,
            cell_n,
        } => ScalarField::from_fn(&cell(*cell_n)?, |x| {
            mean + amplitude * x.iter().map(|&xi| (2.0 * PI * xi).cos()).product::<f64>()
        })
        .map_err(config_err),
        MuSpec::File { path } => {
            let full = base.join(path);
            let (field, _) = snapshot::read(&full)
                .map_err(|e| Error::Config(format!("mu file {}: {e}", full.display())))?;
            let g = field.grid();
            if g.dim() != d || g.is_centered() || g.lengths().iter().any(|&l| l != 1.0) {
                return Err(Error::Config(format!(
                    "mu file {} must hold a {d}-d field on the unit cell",
                    full.display()
                )));
            }
            Ok(field)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for (name, _) in PRESETS {
            let sc = Scenario::from_preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.cfg.scenario, *name);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = preset_text("homog-1d-a025").unwrap().replace("alpha =", "alpah =");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
        let text = preset_text("homog-1d-a025")
            .unwrap()
            .replace("[grid]", "[grid]\nspacing = 0.1");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn levels_must_lie_below_min_mu() {
        let base = preset_text("periodic-1d-a025").unwrap();
        let with = |levels: &str| {
            let mut cfg = RunConfig::parse(base).unwrap();
            cfg.fronts.levels = levels.split(',').map(|s| s.parse().unwrap()).collect();
            Scenario::new(cfg, Path::new("."))
        };
        // min μ = 0.5
        assert!(with("0.45").is_ok());
        assert!(matches!(with("0.55"), Err(Error::Config(_))));
        assert!(matches!(with("0"), Err(Error::Config(_))));
    }

    #[test]
    fn large_alpha_warns() {
        let mut cfg = RunConfig::preset("homog-1d-a025").unwrap();
        cfg.alpha = 0.6;
        let sc = Scenario::new(cfg, Path::new(".")).unwrap();
        assert_eq!(sc.warnings.len(), 1);
    }

    #[test]
    fn missing_mu_file_is_a_config_error() {
        let mut cfg = RunConfig::preset("homog-1d-a025").unwrap();
        cfg.mu = MuSpec::File {
            path: PathBuf::from("does/not/exist.kpf"),
        };
        assert!(matches!(Scenario::new(cfg, Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn snapshot_schedule_merges_extras() {
        let sc = Scenario::from_preset("homog-1d-a025").unwrap();
        let cfg = sc.with_snapshots(&[0.35, 4.0, 100.0]);
        assert!(cfg.snapshot_times.iter().any(|&t| t == 0.35));
        assert_eq!(
            cfg.snapshot_times.iter().filter(|&&t| (t - 4.0).abs() < 1e-9).count(),
            1
        );
        assert!(cfg.snapshot_times.iter().all(|&t| t <= sc.solver.t_end));
    }
}
