// SPDX-License-Identifier: MIT OR Apache-2.0
//! Time integration of u_t + (−Δ)^α u = μ(x)u − u² on an origin-centered box.
//!
//! Diffusion is implicit in Fourier space, the reaction explicit. IMEX1 is
//! forward/backward Euler; IMEX2 is the two-stage ARS(2,2,2) scheme.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::principal_eigenpair;
use crate::error::{Error, Result};
use crate::fracop::{FracOrder, FractionalLaplacian};
use crate::fronts::{ray_samples, Direction};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::interp::PeriodicInterpolant;
use crate::output::Record;

/// Values in [−UNDERSHOOT_TOL, 0) are clamped to 0; anything lower is an error.
pub const UNDERSHOOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "IMEX1")]
    Imex1,
    #[serde(rename = "IMEX2")]
    Imex2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub snapshot_times: Vec<f64>,
    pub front_guard: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::Config(format!("dt = {} not in (0, 0.1]", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if !(self.front_guard > 0.0 && self.front_guard < 1.0) {
            return Err(Error::Config(format!(
                "front_guard = {} not in (0, 1)",
                self.front_guard
            )));
        }
        for w in self.snapshot_times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config("snapshot_times must be strictly increasing".into()));
            }
        }
        if let (Some(&a), Some(&b)) = (self.snapshot_times.first(), self.snapshot_times.last()) {
            if a < 0.0 || b > self.t_end {
                return Err(Error::Config("snapshot_times must lie in [0, t_end]".into()));
            }
        }
        Ok(())
    }

    /// Snapshot times 0, every, 2·every, ... up to t_end.
    pub fn regular_times(every: f64, t_end: f64) -> Vec<f64> {
        let count = (t_end / every + 1e-9).floor() as usize;
        (0..=count).map(|k| k as f64 * every).collect()
    }
}

/// Closed-form initial data, sampled pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `height` on the ball |x| ≤ radius, 0 elsewhere.
    Indicator { radius: f64, height: f64 },
    /// min(height, |x|^{−(d+2α)}).
    Algebraic { height: f64 },
    /// height·exp(−|x|²/width²).
    Gaussian { width: f64, height: f64 },
}

impl InitialData {
    pub fn sample(&self, grid: &PeriodicGrid, order: FracOrder) -> Result<ScalarField> {
        let p = order.decay_exponent();
        match *self {
            InitialData::Indicator { radius, height } => ScalarField::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 <= radius * radius * (1.0 + 1e-12) {
                    height
                } else {
                    0.0
                }
            }),
            InitialData::Algebraic { height } => ScalarField::from_fn(grid, |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    height
                } else {
                    height.min(r.powf(-p))
                }
            }),
            InitialData::Gaussian { width, height } => ScalarField::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                height * (-r2 / (width * width)).exp()
            }),
        }
    }
}

/// Tiles a cell field onto `grid` by trigonometric interpolation.
///
/// Each box length must be an integer multiple of the cell length.
pub fn tile(cell_field: &ScalarField, grid: &PeriodicGrid) -> Result<ScalarField> {
    let cell = cell_field.grid();
    if cell.dim() != grid.dim() {
        return Err(Error::InvalidGrid("cell and box dimensions differ".into()));
    }
    for a in 0..grid.dim() {
        let ratio = grid.lengths()[a] / cell.lengths()[a];
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "box length {} is not a multiple of the cell length {}",
                grid.lengths()[a],
                cell.lengths()[a]
            )));
        }
    }
    PeriodicInterpolant::new(cell_field)?.sample_on(grid, 1.0)
}

#[derive(Debug, Clone)]
pub struct SolutionState {
    pub t: f64,
    pub u: ScalarField,
    pub mu_box: ScalarField,
    pub ord: FracOrder,
    /// max(max u0, max μ); u may not exceed 1% above it
    ceiling: f64,
    lap: Arc<FractionalLaplacian>,
    resolvent: Option<(f64, Arc<Vec<f64>>)>,
}

pub fn init_state(
    u0: &ScalarField,
    mu_cell: &ScalarField,
    ord: FracOrder,
    grid: &PeriodicGrid,
) -> Result<SolutionState> {
    if !grid.is_centered() {
        return Err(Error::InvalidGrid("the propagation box must be origin-centered".into()));
    }
    if u0.grid() != grid {
        return Err(Error::InvalidArgument("u0 does not live on the box grid".into()));
    }
    if u0.min() < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "initial data must be nonnegative (min {})",
            u0.min()
        )));
    }
    if u0.max() <= 0.0 {
        return Err(Error::InvalidArgument("initial data vanish identically".into()));
    }
    let mu_box = tile(mu_cell, grid)?;
    SolutionState::new(u0.clone(), mu_box, ord)
}

impl SolutionState {
    /// State with μ already given on the box.
    pub fn new(u: ScalarField, mu_box: ScalarField, ord: FracOrder) -> Result<Self> {
        u.check_same_grid(&mu_box)?;
        let lap = Arc::new(FractionalLaplacian::new(u.grid(), ord)?);
        let ceiling = u.max().max(mu_box.max());
        Ok(Self {
            t: 0.0,
            u,
            mu_box,
            ord,
            ceiling,
            lap,
            resolvent: None,
        })
    }

    pub fn mass(&self) -> f64 {
        self.u.integral()
    }

    pub fn laplacian(&self) -> &FractionalLaplacian {
        &self.lap
    }

    fn resolvent(&mut self, tau: f64) -> Arc<Vec<f64>> {
        if let Some((key, r)) = &self.resolvent {
            if *key == tau {
                return Arc::clone(r);
            }
        }
        let r: Arc<Vec<f64>> = Arc::new(self.lap.symbol().iter().map(|s| 1.0 / (1.0 + tau * s)).collect());
        self.resolvent = Some((tau, Arc::clone(&r)));
        r
    }

    fn reaction(&self, u: &[f64]) -> Vec<f64> {
        u.par_iter()
            .zip(self.mu_box.values().par_iter())
            .map(|(&v, &m)| m * v - v * v)
            .collect()
    }

    fn solve_implicit(&mut self, rhs: Vec<f64>, tau: f64) -> Result<Vec<f64>> {
        let res = self.resolvent(tau);
        let four = self.lap.fourier();
        let mut spec: Vec<Complex64> = four.forward(&rhs)?;
        spec.par_iter_mut().zip(res.par_iter()).for_each(|(c, &r)| *c *= r);
        four.inverse(spec)
    }

    fn apply_lap(&self, v: &[f64]) -> Result<Vec<f64>> {
        let four = self.lap.fourier();
        let mut spec: Vec<Complex64> = four.forward(v)?;
        spec.par_iter_mut()
            .zip(self.lap.symbol().par_iter())
            .for_each(|(c, &s)| *c *= s);
        four.inverse(spec)
    }

    /// Advances by one step of size `dt`.
    pub fn step(&mut self, dt: f64, scheme: Scheme) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size {dt}")));
        }
        let u = self.u.values().to_vec();
        let next = match scheme {
            Scheme::Imex1 => {
                let rhs: Vec<f64> = u
                    .iter()
                    .zip(self.reaction(&u))
                    .map(|(v, n)| v + dt * n)
                    .collect();
                self.solve_implicit(rhs, dt)?
            }
            Scheme::Imex2 => {
                let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
                let delta = 1.0 - 1.0 / (2.0 * g);
                let n0 = self.reaction(&u);
                let rhs: Vec<f64> = u.iter().zip(&n0).map(|(v, n)| v + g * dt * n).collect();
                let u1 = self.solve_implicit(rhs, g * dt)?;
                let n1 = self.reaction(&u1);
                let l1 = self.apply_lap(&u1)?;
                let rhs: Vec<f64> = (0..u.len())
                    .map(|i| u[i] + dt * (delta * n0[i] + (1.0 - delta) * n1[i]) - dt * (1.0 - g) * l1[i])
                    .collect();
                self.solve_implicit(rhs, g * dt)?
            }
        };
        let t_next = self.t + dt;
        let mut out = next;
        let mut low = 0.0f64;
        for v in out.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite("solution"));
            }
            if *v < 0.0 {
                low = low.min(*v);
                *v = 0.0;
            }
        }
        if low < -UNDERSHOOT_TOL {
            return Err(Error::Undershoot { value: low, t: t_next });
        }
        let top = out.iter().cloned().fold(0.0, f64::max);
        if top > 1.01 * self.ceiling {
            return Err(Error::Numerical(format!(
                "max u = {top} exceeds the a-priori bound {} at t = {t_next}",
                1.01 * self.ceiling
            )));
        }
        self.u = ScalarField::new(self.u.grid().clone(), out)?;
        self.t = t_next;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TEnd,
    FrontGuard,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::TEnd => "t_end",
            StopReason::FrontGuard => "front_guard",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub t: f64,
    pub mass: f64,
    pub umax: f64,
    pub stop: Option<StopReason>,
}

impl ReportLine {
    pub fn record(&self) -> Record {
        Record::new()
            .num("t", self.t)
            .num("mass", self.mass)
            .num("umax", self.umax)
            .opt_text("stop", self.stop.map(StopReason::name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub t: f64,
    pub stop: StopReason,
    pub lines: Vec<ReportLine>,
}

/// The outer front used by the guard: the lowest tracked level, probed
/// along the tracked directions.
#[derive(Debug, Clone)]
pub struct FrontGuard {
    pub level: f64,
    pub directions: Vec<Direction>,
}

impl FrontGuard {
    /// True once u ≥ level somewhere on a ray beyond `fraction`·L/2.
    pub fn tripped(&self, u: &ScalarField, fraction: f64) -> Result<bool> {
        let grid = u.grid();
        let half = grid.half_width();
        let limit = fraction * half;
        for &dir in &self.directions {
            let hit = ray_samples(u, dir, f64::INFINITY)?
                .into_iter()
                .any(|(r, v)| r >= limit && v >= self.level);
            if hit {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Receives the state at every snapshot time.
pub trait Sink {
    fn snapshot(&mut self, state: &SolutionState) -> Result<()>;
}

impl<F: FnMut(&SolutionState) -> Result<()>> Sink for F {
    fn snapshot(&mut self, state: &SolutionState) -> Result<()> {
        self(state)
    }
}

/// Keeps a copy of every snapshot.
#[derive(Debug, Default)]
pub struct Collect {
    pub frames: Vec<(f64, ScalarField)>,
}

impl Sink for Collect {
    fn snapshot(&mut self, state: &SolutionState) -> Result<()> {
        self.frames.push((state.t, state.u.clone()));
        Ok(())
    }
}

fn report_line(state: &SolutionState, stop: Option<StopReason>) -> ReportLine {
    ReportLine {
        t: state.t,
        mass: state.mass(),
        umax: state.u.max(),
        stop,
    }
}

/// Integrates to `cfg.t_end`, stopping early if the guard trips.
///
/// The initial state is always emitted; later snapshots land exactly on
/// `cfg.snapshot_times` (the step before a snapshot is shortened).
pub fn run(
    state: &mut SolutionState,
    cfg: &SolverConfig,
    guard: Option<&FrontGuard>,
    sinks: &mut [&mut dyn Sink],
) -> Result<RunReport> {
    cfg.validate()?;
    let emit = |state: &SolutionState, sinks: &mut [&mut dyn Sink]| -> Result<()> {
        for s in sinks.iter_mut() {
            s.snapshot(state)?;
        }
        Ok(())
    };
    let start = state.t;
    let mut lines = vec![report_line(state, None)];
    emit(state, sinks)?;
    let mut targets: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&s| s > start + 1e-12)
        .collect();
    if targets.last().is_none_or(|&l| l < cfg.t_end - 1e-12) && cfg.t_end > start + 1e-12 {
        targets.push(cfg.t_end);
    }
    let mut steps = 0;
    let mut stop = StopReason::TEnd;
    'outer: for &target in &targets {
        let anchor = state.t;
        let span = target - anchor;
        let full = ((span / cfg.dt) * (1.0 + 1e-12)).floor() as usize;
        let rest = span - full as f64 * cfg.dt;
        let count = if rest > 1e-9 * cfg.dt { full + 1 } else { full };
        for k in 1..=count {
            let h = if k <= full { cfg.dt } else { rest };
            state.step(h, cfg.scheme)?;
            steps += 1;
            state.t = if k == count { target } else { anchor + k as f64 * cfg.dt };
            if let Some(g) = guard {
                if g.tripped(&state.u, cfg.front_guard)? {
                    stop = StopReason::FrontGuard;
                    break 'outer;
                }
            }
        }
        let is_snapshot = cfg.snapshot_times.iter().any(|&s| (s - target).abs() <= 1e-12);
        if is_snapshot {
            lines.push(report_line(state, None));
            emit(state, sinks)?;
        }
    }
    match lines.last_mut() {
        Some(last) if last.t == state.t => last.stop = Some(stop),
        _ => lines.push(report_line(state, Some(stop))),
    }
    Ok(RunReport {
        steps,
        t: state.t,
        stop,
        lines,
    })
}

/// Time step used by [`steady_state`].
pub const STEADY_DT: f64 = 0.1;

/// The positive periodic steady state u_+ on the cell, by time marching from
/// u ≡ max μ until ‖(−Δ)^α u − μu + u²‖∞ ≤ tol.
pub fn steady_state(mu_cell: &ScalarField, ord: FracOrder, tol: f64) -> Result<ScalarField> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let pair = principal_eigenpair(mu_cell, ord, 1e-10, 2000)?;
    if pair.lambda1 >= 0.0 {
        return Err(Error::Extinction(pair.lambda1));
    }
    let u0 = ScalarField::constant(mu_cell.grid(), mu_cell.max());
    let mut state = SolutionState::new(u0, mu_cell.clone(), ord)?;
    let max_steps = 1_000_000;
    let mut residual = f64::INFINITY;
    for _ in 0..max_steps {
        let before = state.u.clone();
        state.step(STEADY_DT, Scheme::Imex1)?;
        let change = state
            .u
            .values()
            .iter()
            .zip(before.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change <= tol * STEADY_DT {
            residual = steady_residual(&state.u, mu_cell, ord)?;
            if residual <= tol {
                return Ok(state.u);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: max_steps,
        residual,
    })
}

/// ‖(−Δ)^α u − μu + u²‖∞
pub fn steady_residual(u: &ScalarField, mu: &ScalarField, ord: FracOrder) -> Result<f64> {
    let lap = FractionalLaplacian::new(u.grid(), ord)?.apply(u)?;
    Ok((0..u.len()).fold(0.0f64, |m, i| {
        let v = u.values()[i];
        m.max((lap.values()[i] - mu.values()[i] * v + v * v).abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box1(n: usize, l: f64) -> PeriodicGrid {
        PeriodicGrid::new(1, &[n], &[l], true).unwrap()
    }

    fn unit_mu() -> ScalarField {
        ScalarField::constant(&PeriodicGrid::new(1, &[8], &[1.0], false).unwrap(), 1.0)
    }

    fn ord() -> FracOrder {
        FracOrder::new(0.25, 1).unwrap()
    }

    #[test]
    fn zero_and_one_are_fixed() {
        let g = box1(64, 16.0);
        for (c, scheme) in [(0.0, Scheme::Imex1), (1.0, Scheme::Imex1), (1.0, Scheme::Imex2)] {
            let mut s = SolutionState::new(ScalarField::constant(&g, c), ScalarField::constant(&g, 1.0), ord()).unwrap();
            for _ in 0..10 {
                s.step(0.05, scheme).unwrap();
            }
            assert!(s.u.values().iter().all(|v| (v - c).abs() < 1e-14));
        }
    }

    #[test]
    fn logistic_ode_for_constant_data() {
        let g = box1(16, 4.0);
        for scheme in [Scheme::Imex1, Scheme::Imex2] {
            let mut s = SolutionState::new(ScalarField::constant(&g, 0.5), ScalarField::constant(&g, 1.0), ord()).unwrap();
            for _ in 0..100 {
                s.step(0.01, scheme).unwrap();
            }
            let exact = 1.0 / (1.0 + (-1.0f64).exp());
            assert!((s.u.values()[3] - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn init_rejects_bad_input() {
        let g = box1(64, 16.0);
        let mut bad = vec![0.0; 64];
        bad[10] = 1.0;
        bad[11] = -1e-3;
        let u0 = ScalarField::new(g.clone(), bad).unwrap();
        assert!(init_state(&u0, &unit_mu(), ord(), &g).is_err());
        let zero = ScalarField::zeros(&g);
        assert!(init_state(&zero, &unit_mu(), ord(), &g).is_err());
        let odd = box1(64, 16.5);
        let u0 = ScalarField::constant(&odd, 1.0);
        assert!(init_state(&u0, &unit_mu(), ord(), &odd).is_err());
    }

    #[test]
    fn config_validation() {
        let good = SolverConfig {
            dt: 0.05,
            t_end: 1.0,
            scheme: Scheme::Imex1,
            snapshot_times: vec![0.0, 0.5, 1.0],
            front_guard: 0.8,
        };
        assert!(good.validate().is_ok());
        let mut c = good.clone();
        c.dt = 0.2;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.snapshot_times = vec![0.5, 0.5];
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.front_guard = 1.0;
        assert!(c.validate().is_err());
        let mut c = good;
        c.snapshot_times = vec![0.0, 2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn regular_times_hit_the_end() {
        assert_eq!(SolverConfig::regular_times(0.25, 1.0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(SolverConfig::regular_times(0.1, 0.3).len(), 4);
    }

    #[test]
    fn initial_presets() {
        let g = box1(64, 16.0);
        let ind = InitialData::Indicator { radius: 1.0, height: 1.0 }.sample(&g, ord()).unwrap();
        assert_eq!(ind.integral(), 2.25);
        let alg = InitialData::Algebraic { height: 1.0 }.sample(&g, ord()).unwrap();
        assert_eq!(alg.max(), 1.0);
        let x = g.point(g.len() - 1)[0];
        assert!((alg.values()[g.len() - 1] - x.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn undershoot_is_reported() {
        // a huge explicit step overshoots the a-priori bound
        let g = box1(64, 16.0);
        let mut s = SolutionState::new(ScalarField::constant(&g, 0.5), ScalarField::constant(&g, 1.0), ord()).unwrap();
        assert!(matches!(s.step(5.0, Scheme::Imex1), Err(Error::Numerical(_))));
        let mut s = SolutionState::new(ScalarField::constant(&g, 3.0), ScalarField::constant(&g, 1.0), ord()).unwrap();
        assert!(matches!(s.step(1.0, Scheme::Imex1), Err(Error::Undershoot { .. })));
    }
}
