// SPDX-License-Identifier: MIT OR Apache-2.0
//! Command-line front end and the end-to-end verification pipeline.
//!
//! Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical failure,
//! 4 stopped by the front guard.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attractor::{attractor_series, window_for, y_grid, AttractorRecord, Transport};
use crate::bounds::{
    admissible_params, b_for_ratio, bound_exponent, interior_mask, measure_c, residual_summary,
    step3_min_t1, step3_sub_params, BoundParams, BoundProfile, Kind, ResidualSummary,
};
use crate::config::Scenario;
use crate::eigen::{principal_eigenpair, EigenPair};
use crate::error::{Error, Result};
use crate::fracop::estimate_d;
use crate::fronts::{
    fit_exponent, from_csv, group, isotropy_report, records_at, to_csv, FrontFit, FrontRecord,
    IsotropyReport, Side,
};
use crate::grid::ScalarField;
use crate::output::{ndjson, Record};
use crate::snapshot;
use crate::solver::{init_state, run, FrontGuard, RunReport, StopReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    CheckFailure = 1,
    ConfigError = 2,
    NumericalFailure = 3,
    Guard = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) => ExitStatus::ConfigError,
            Error::Extinction(_) => ExitStatus::CheckFailure,
            _ => ExitStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "frackpp", version, about = "Fractional Fisher-KPP fronts in periodic media")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal eigenpair: writes phi1.kpf and phi1.txt.
    Eig,
    /// Simulation with front extraction and exponent fits.
    Run,
    /// Full pipeline with pass/fail checks.
    Verify,
    /// Rescaled frames against the transport solution.
    Attractor,
    /// Re-fit exponents from a front CSV (default: <out>/fronts.csv).
    Fronts { csv: Option<PathBuf> },
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::ConfigError.code()
            } else {
                ExitStatus::Pass.code()
            };
        }
    };
    match execute(&cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::from_error(&e).code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<ExitStatus> {
    let scenario = load(&cli.common)?;
    for w in &scenario.warnings {
        eprintln!("WARNING: {w}");
    }
    let out = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| scenario.cfg.output.dir.clone());
    let threads = cli.common.threads.unwrap_or(0);
    if cli.common.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Eig => cmd_eig(&scenario, &out),
        Command::Run => cmd_run(&scenario, &out),
        Command::Verify => cmd_verify(&scenario, &out),
        Command::Attractor => cmd_attractor(&scenario, &out),
        Command::Fronts { csv } => {
            let path = csv.clone().unwrap_or_else(|| out.join("fronts.csv"));
            cmd_fronts(&scenario, &path, &out)
        }
    })
}

fn load(common: &Common) -> Result<Scenario> {
    match (&common.config, &common.preset) {
        (Some(path), _) => Scenario::from_file(path),
        (None, Some(name)) => Scenario::from_preset(name),
        (None, None) => Err(Error::Config("one of --config or --preset is required".into())),
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn solve_eigen(sc: &Scenario) -> Result<EigenPair> {
    let pair = principal_eigenpair(&sc.mu_cell, sc.order, sc.cfg.eigen.tol, sc.cfg.eigen.max_iter)?;
    if pair.lambda1 >= 0.0 {
        return Err(Error::Extinction(pair.lambda1));
    }
    Ok(pair)
}

pub fn cmd_eig(sc: &Scenario, out: &Path) -> Result<ExitStatus> {
    let pair = solve_eigen(sc)?;
    fs::create_dir_all(out)?;
    pair.export(&out.join("phi1.kpf"))?;
    println!("lambda1 = {:.16e}", pair.lambda1);
    println!("exponent = {:.16e}", sc.order.spreading_rate(pair.lambda1));
    println!("residual = {:.3e} after {} iterations", pair.residual, pair.iterations);
    Ok(ExitStatus::Pass)
}

/// Which snapshots a simulation keeps in memory.
#[derive(Debug, Clone, Copy)]
pub enum Keep<'a> {
    All,
    Times(&'a [f64]),
    Nothing,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub report: RunReport,
    pub records: Vec<FrontRecord>,
    pub frames: Vec<(f64, ScalarField)>,
}

impl Simulation {
    pub fn frame_at(&self, t: f64) -> Option<&ScalarField> {
        self.frames.iter().find(|(s, _)| (s - t).abs() <= 1e-9).map(|(_, u)| u)
    }
}

/// The solver run of a scenario, with front records at every snapshot.
pub fn simulate(sc: &Scenario, extra_times: &[f64], keep: Keep, snapshot_dir: Option<&Path>) -> Result<Simulation> {
    let u0 = sc.cfg.initial.sample(&sc.grid, sc.order)?;
    let mut state = init_state(&u0, &sc.mu_cell, sc.order, &sc.grid)?;
    let cfg = sc.with_snapshots(extra_times);
    let lowest = sc
        .levels
        .iter()
        .map(|l| l.value())
        .fold(f64::INFINITY, f64::min);
    let guard = FrontGuard {
        level: lowest,
        directions: sc.directions.clone(),
    };
    if let Some(dir) = snapshot_dir {
        fs::create_dir_all(dir)?;
    }
    let r_max = sc.r_max();
    let mut records = Vec::new();
    let mut frames = Vec::new();
    let mut index = 0usize;
    let mut sink = |s: &crate::solver::SolutionState| -> Result<()> {
        records.extend(records_at(&s.u, s.t, &sc.levels, &sc.directions, r_max)?);
        if let Some(dir) = snapshot_dir {
            snapshot::write(&dir.join(format!("u_{index:05}.kpf")), &s.u, s.t)?;
        }
        index += 1;
        let wanted = match keep {
            Keep::All => true,
            Keep::Times(ts) => ts.iter().any(|&t| (t - s.t).abs() <= 1e-9),
            Keep::Nothing => false,
        };
        if wanted {
            frames.push((s.t, s.u.clone()));
        }
        Ok(())
    };
    let report = run(&mut state, &cfg, Some(&guard), &mut [&mut sink])?;
    Ok(Simulation {
        report,
        records,
        frames,
    })
}

/// Fits for every (level, direction, side) with enough records in the
/// configured window; groups without enough records are listed separately.
pub fn fit_all(sc: &Scenario, records: &[FrontRecord]) -> (Vec<FrontFit>, Vec<(f64, usize, Side, String)>) {
    let window = (sc.cfg.fronts.fit_window[0], sc.cfg.fronts.fit_window[1]);
    let mut fits = Vec::new();
    let mut missing = Vec::new();
    for g in group(records) {
        for side in [Side::Inner, Side::Outer] {
            match fit_exponent(&g, side, window) {
                Ok(f) => fits.push(f),
                Err(e) => missing.push((g[0].lambda, g[0].direction, side, e.to_string())),
            }
        }
    }
    (fits, missing)
}

fn fits_text(fits: &[FrontFit], theory: f64) -> String {
    let recs: Vec<Record> = fits.iter().map(|f| f.record(theory)).collect();
    ndjson(&recs)
}

pub fn cmd_run(sc: &Scenario, out: &Path) -> Result<ExitStatus> {
    let pair = solve_eigen(sc)?;
    let theory = sc.order.spreading_rate(pair.lambda1);
    let snaps = out.join("snapshots");
    let sim = simulate(
        sc,
        &[],
        Keep::Nothing,
        sc.cfg.output.snapshots.then_some(snaps.as_path()),
    )?;
    let (fits, missing) = fit_all(sc, &sim.records);
    let lines: Vec<Record> = sim.report.lines.iter().map(|l| l.record()).collect();
    write_file(out, "run.ndjson", &ndjson(&lines))?;
    write_file(out, "fronts.csv", &to_csv(&sim.records))?;
    write_file(out, "fits.ndjson", &fits_text(&fits, theory))?;
    println!(
        "lambda1 = {:.16e}, exponent = {:.16e}",
        pair.lambda1, theory
    );
    println!("stopped at t = {} ({})", sim.report.t, sim.report.stop.name());
    for f in &fits {
        println!(
            "level {} dir {} {}: slope {:.6} (rel. error {:.3})",
            f.lambda,
            f.direction,
            f.side.name(),
            f.slope,
            (f.slope - theory).abs() / theory
        );
    }
    if !missing.is_empty() {
        eprintln!("{} fits skipped for lack of records in the window", missing.len());
    }
    Ok(match sim.report.stop {
        StopReason::FrontGuard => ExitStatus::Guard,
        StopReason::TEnd => ExitStatus::Pass,
    })
}

pub fn cmd_fronts(sc: &Scenario, csv: &Path, out: &Path) -> Result<ExitStatus> {
    let text = fs::read_to_string(csv)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", csv.display())))?;
    let records = from_csv(&text)?;
    let pair = solve_eigen(sc)?;
    let theory = sc.order.spreading_rate(pair.lambda1);
    let (fits, missing) = fit_all(sc, &records);
    write_file(out, "fits.ndjson", &fits_text(&fits, theory))?;
    println!("{} fits written, {} skipped", fits.len(), missing.len());
    Ok(ExitStatus::Pass)
}

/// Attractor records for the frames the run produced, and the requested
/// times it did not reach.
#[derive(Debug, Clone)]
pub struct AttractorOutcome {
    pub records: Vec<AttractorRecord>,
    pub missing: Vec<f64>,
    pub y_max: f64,
}

fn attractor_on(sc: &Scenario, pair: &EigenPair, sim: &Simulation) -> Result<AttractorOutcome> {
    let spec = &sc.cfg.attractor;
    let mut frames = Vec::new();
    let mut missing = Vec::new();
    for &t in &spec.times {
        match sim.frame_at(t) {
            Some(u) => frames.push((t, u.clone())),
            None => missing.push(t),
        }
    }
    let transport = Transport::new(pair, sc.order)?;
    let t_last = frames.last().map_or(0.0, |f| f.0);
    let y_max = window_for(&transport, spec.y_max, t_last, &sc.grid, sc.solver.front_guard);
    let ygrid = y_grid(sc.cfg.d, spec.y_n, y_max)?;
    let records = attractor_series(&frames, pair, sc.order, &ygrid, sc.solver.front_guard)?;
    Ok(AttractorOutcome {
        records,
        missing,
        y_max,
    })
}

pub fn run_attractor(sc: &Scenario, pair: &EigenPair) -> Result<(Simulation, AttractorOutcome)> {
    let times = sc.cfg.attractor.times.clone();
    let sim = simulate(sc, &times, Keep::Times(&times), None)?;
    let outcome = attractor_on(sc, pair, &sim)?;
    Ok((sim, outcome))
}

pub fn cmd_attractor(sc: &Scenario, out: &Path) -> Result<ExitStatus> {
    let pair = solve_eigen(sc)?;
    let (sim, outcome) = run_attractor(sc, &pair)?;
    let recs: Vec<Record> = outcome.records.iter().map(|r| r.record()).collect();
    write_file(out, "attractor.ndjson", &ndjson(&recs))?;
    println!("y-window |y| <= {}", outcome.y_max);
    for r in &outcome.records {
        println!(
            "t = {}: shift {:.6}, sup_dist {:.6e}, neglected {:.6e}",
            r.t, r.shift, r.sup_dist, r.neglected_norm
        );
    }
    if !outcome.missing.is_empty() {
        eprintln!(
            "run stopped at t = {} ({}); frames {:?} not reached",
            sim.report.t,
            sim.report.stop.name(),
            outcome.missing
        );
        return Ok(ExitStatus::Guard);
    }
    Ok(ExitStatus::Pass)
}

/// One line of the verdict.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Record,
}

impl Check {
    fn new(name: &str, pass: bool, detail: Record) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    pub fn record(&self) -> Record {
        Record::new()
            .text("check", &self.name)
            .boolean("pass", self.pass)
            .merge(&self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub checks: Vec<Check>,
    pub eigen: EigenPair,
    pub d_const: f64,
    pub sub: Option<BoundParams>,
    pub sup: Option<BoundParams>,
    pub step3: Option<BoundParams>,
    pub t1: Option<f64>,
    pub residuals: Vec<ResidualSummary>,
    pub fits: Vec<FrontFit>,
    pub isotropy: Vec<IsotropyReport>,
    pub attractor: Option<AttractorOutcome>,
    pub simulation: Simulation,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// D maximized over the configured profile widths.
pub fn measure_d(sc: &Scenario, pair: &EigenPair) -> Result<(f64, Vec<f64>)> {
    let exponent = if sc.cfg.alpha >= 0.5 {
        Some(bound_exponent(sc.order, sc.cfg.bounds.gamma)?)
    } else {
        None
    };
    let p = sc.order.decay_exponent();
    let per: Vec<f64> = sc
        .cfg
        .bounds
        .d_widths
        .iter()
        .map(|w| estimate_d(sc.order, &pair.phi1, pair.lambda1, w.powf(-p), &sc.grid, exponent).map(|e| e.d))
        .collect::<Result<_>>()?;
    Ok((per.iter().cloned().fold(0.0, f64::max), per))
}

/// Largest interior value of `u − v` (positive means `u` exceeds `v`).
fn max_excess(u: &ScalarField, v: &ScalarField, mask: &[bool]) -> f64 {
    u.values()
        .iter()
        .zip(v.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold(f64::NEG_INFINITY, |acc, ((a, b), _)| acc.max(a - b))
}

pub fn verify(sc: &Scenario) -> Result<Verdict> {
    let bspec = sc.cfg.bounds.clone();
    let mut checks = Vec::new();
    let pair = solve_eigen(sc)?;
    let theory = sc.order.spreading_rate(pair.lambda1);
    checks.push(Check::new(
        "eigen",
        pair.residual <= sc.cfg.eigen.tol,
        Record::new()
            .num("lambda1", pair.lambda1)
            .num("exponent", theory)
            .num("residual", pair.residual)
            .int("iterations", pair.iterations as i64),
    ));

    let mut d_const = f64::NAN;
    let mut sub = None;
    let mut sup = None;
    let mut t1 = None;
    let mut residuals = Vec::new();
    let mut extra = sc.cfg.attractor.times.clone();
    if bspec.enabled {
        let (d, per) = measure_d(sc, &pair)?;
        d_const = d;
        checks.push(Check::new(
            "measure_d",
            d.is_finite() && d > 0.0,
            Record::new().num("D", d).nums("per_width", &per).nums("widths", &bspec.d_widths),
        ));
        let q = bound_exponent(sc.order, bspec.gamma)?;
        let m = d * (1.0 / pair.phi1.min() + 1.0);
        let b_sub = b_for_ratio(pair.lambda1, m, q, bspec.sub_ratio);
        let s = admissible_params(Kind::Sub, &pair, sc.order, d, Some(b_sub), bspec.gamma)?;
        let p = admissible_params(Kind::Super, &pair, sc.order, d, None, bspec.gamma)?;
        extra.push(p.t0);
        let start = match bspec.t1 {
            Some(t) => t,
            None => 1.05 * step3_min_t1(&pair, sc.order, d, bspec.gamma)?,
        };
        extra.push(start);
        t1 = Some(start);
        sub = Some(s);
        sup = Some(p);

        let sub_prof = BoundProfile::new(s, &pair, &sc.mu_cell, &sc.grid)?.with_a(s.a * bspec.sabotage);
        let sup_prof = BoundProfile::new(p, &pair, &sc.mu_cell, &sc.grid)?;
        let mut sub_ok = true;
        let mut sup_ok = true;
        for &t in &bspec.check_times {
            let r = residual_summary(&sub_prof, t, sc.order)?;
            sub_ok &= r.pass();
            residuals.push(r);
            if t >= p.t0 {
                let r = residual_summary(&sup_prof, t, sc.order)?;
                sup_ok &= r.pass();
                residuals.push(r);
            }
        }
        let summarize = |kind: Kind| {
            let rs: Vec<&ResidualSummary> = residuals.iter().filter(|r| r.kind == kind).collect();
            Record::new()
                .int("times", rs.len() as i64)
                .num("worst_viol_frac", rs.iter().map(|r| r.viol_frac).fold(0.0, f64::max))
                .num(
                    "worst_max_viol",
                    rs.iter().map(|r| r.max_viol).fold(f64::NEG_INFINITY, f64::max),
                )
        };
        checks.push(Check::new(
            "residual_sub",
            sub_ok,
            summarize(Kind::Sub).num("a", s.a * bspec.sabotage).num("sabotage", bspec.sabotage),
        ));
        checks.push(Check::new("residual_super", sup_ok, summarize(Kind::Super).num("t0", p.t0)));
    }

    let sim = simulate(sc, &extra, Keep::All, None)?;
    let stop = Record::new()
        .num("t_stop", sim.report.t)
        .text("stop", sim.report.stop.name());

    let mut step3 = None;
    if let (Some(_), Some(mut p), Some(t1v)) = (sub, sup, t1) {
        let mask = interior_mask(&sc.grid);
        let slack = bspec.ordering_slack;
        // supersolution: raise ā so that ū(t0) covers u(t0)
        let sup_prof = BoundProfile::new(p, &pair, &sc.mu_cell, &sc.grid)?;
        let start = sim
            .frame_at(p.t0)
            .ok_or_else(|| Error::Numerical(format!("no snapshot at t0 = {}", p.t0)))?;
        p.a = p.a.max(sup_prof.a_to_cover(start, p.t0)?);
        sup = Some(p);
        let sup_prof = sup_prof.with_a(p.a);
        let mut worst = f64::NEG_INFINITY;
        let mut count = 0;
        for (t, u) in sim.frames.iter().filter(|(t, _)| *t >= p.t0) {
            worst = worst.max(max_excess(u, &sup_prof.evaluate(*t)?, &mask));
            count += 1;
        }
        checks.push(Check::new(
            "ordering_super",
            count > 0 && worst <= slack,
            Record::new()
                .num("a", p.a)
                .int("snapshots", count)
                .num("worst_excess", worst)
                .merge(&stop),
        ));

        // Step 3 subsolution started at t1
        let sub3 = match sim.frame_at(t1v) {
            Some(u1) => {
                let c = measure_c(u1, t1v, sc.order)?;
                Some((c, step3_sub_params(c, t1v, &pair, sc.order, d_const, bspec.gamma)?))
            }
            None => None,
        };
        match sub3 {
            Some((c, params)) => {
                let prof = BoundProfile::new(params, &pair, &sc.mu_cell, &sc.grid)?;
                let mut worst = f64::NEG_INFINITY;
                let mut count = 0;
                for (t, u) in sim.frames.iter().filter(|(t, _)| *t >= t1v - 1e-9) {
                    let low = prof.evaluate((t - t1v).max(0.0))?;
                    worst = worst.max(max_excess(&low, u, &mask));
                    count += 1;
                }
                checks.push(Check::new(
                    "ordering_sub",
                    worst <= slack,
                    Record::new()
                        .num("t1", t1v)
                        .num("c", c)
                        .num("a", params.a)
                        .num("B", params.b_const)
                        .int("snapshots", count)
                        .num("worst_excess", worst)
                        .merge(&stop),
                ));
                step3 = Some(params);
            }
            None => checks.push(Check::new(
                "ordering_sub",
                false,
                Record::new()
                    .num("t1", t1v)
                    .text("reason", "run stopped before t1")
                    .merge(&stop),
            )),
        }

        // level-set radii against the bounds' λ-radii
        let tol = bspec.radius_tolerance;
        let mut outer_ok = true;
        let mut worst_outer: f64 = 0.0;
        let mut inner_ok = true;
        let mut worst_inner: f64 = 0.0;
        let mut inner_count = 0;
        for rec in &sim.records {
            if rec.t >= p.t0 {
                let bound = p.level_radius(rec.lambda, pair.phi1.min(), pair.phi1.max(), rec.t)?;
                if rec.r_outer > (1.0 + tol) * bound {
                    outer_ok = false;
                }
                if bound > 0.0 {
                    worst_outer = worst_outer.max(rec.r_outer / bound);
                }
            }
            if let Some(s3) = step3 {
                if rec.t >= t1v - 1e-9 {
                    let bound = s3.level_radius(rec.lambda, pair.phi1.min(), pair.phi1.max(), (rec.t - t1v).max(0.0))?;
                    inner_count += 1;
                    if rec.r_inner < (1.0 - tol) * bound {
                        inner_ok = false;
                    }
                    if rec.r_inner > 0.0 {
                        worst_inner = worst_inner.max(bound / rec.r_inner);
                    }
                }
            }
        }
        checks.push(Check::new(
            "front_sandwich_outer",
            outer_ok,
            Record::new().num("worst_ratio", worst_outer).num("tolerance", tol),
        ));
        checks.push(Check::new(
            "front_sandwich_inner",
            step3.is_some() && inner_ok,
            Record::new()
                .int("records", inner_count)
                .num("worst_ratio", worst_inner)
                .num("tolerance", tol),
        ));
    }

    let (fits, missing) = fit_all(sc, &sim.records);
    let tol = sc.cfg.fronts.slope_tolerance;
    let worst = fits
        .iter()
        .map(|f| (f.slope - theory).abs() / theory)
        .fold(0.0, f64::max);
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    checks.push(Check::new(
        "fit_slopes",
        missing.is_empty() && !fits.is_empty() && worst <= tol,
        Record::new()
            .num("theory", theory)
            .nums("slopes", &slopes)
            .num("worst_rel_error", worst)
            .int("missing_fits", missing.len() as i64)
            .merge(&stop),
    ));

    let mut isotropy = Vec::new();
    if sc.directions.len() >= 2 {
        for &level in &sc.levels {
            for side in [Side::Inner, Side::Outer] {
                let subset: Vec<FrontFit> = fits
                    .iter()
                    .filter(|f| f.lambda == level.value() && f.side == side)
                    .cloned()
                    .collect();
                if subset.len() == sc.directions.len() {
                    isotropy.push(isotropy_report(&subset, sc.cfg.fronts.isotropy_threshold)?);
                }
            }
        }
        let expected = sc.levels.len() * 2;
        let worst = isotropy.iter().map(|r| r.max_rel_diff).fold(0.0, f64::max);
        checks.push(Check::new(
            "isotropy",
            isotropy.len() == expected && isotropy.iter().all(|r| r.pass),
            Record::new()
                .int("reports", isotropy.len() as i64)
                .int("expected", expected as i64)
                .num("worst_rel_diff", worst)
                .num("threshold", sc.cfg.fronts.isotropy_threshold),
        ));
    }

    let mut attractor = None;
    if sc.cfg.attractor.enabled {
        let outcome = attractor_on(sc, &pair, &sim)?;
        let slack = sc.cfg.attractor.slack;
        let complete = outcome.missing.is_empty() && outcome.records.len() >= 2;
        let dist_ok = outcome
            .records
            .windows(2)
            .all(|w| w[1].sup_dist <= w[0].sup_dist + slack);
        let negl_ok = outcome
            .records
            .windows(2)
            .all(|w| w[1].neglected_norm < w[0].neglected_norm);
        let dists: Vec<f64> = outcome.records.iter().map(|r| r.sup_dist).collect();
        let negl: Vec<f64> = outcome.records.iter().map(|r| r.neglected_norm).collect();
        let missing = Record::new().nums("missing_times", &outcome.missing).merge(&stop);
        checks.push(Check::new(
            "attractor_distance",
            complete && dist_ok,
            Record::new().nums("sup_dist", &dists).num("y_max", outcome.y_max).merge(&missing),
        ));
        checks.push(Check::new(
            "attractor_neglected",
            complete && negl_ok,
            Record::new().nums("neglected_norm", &negl).merge(&missing),
        ));
        attractor = Some(outcome);
    }

    Ok(Verdict {
        checks,
        eigen: pair,
        d_const,
        sub,
        sup,
        step3,
        t1,
        residuals,
        fits,
        isotropy,
        attractor,
        simulation: sim,
    })
}

pub fn cmd_verify(sc: &Scenario, out: &Path) -> Result<ExitStatus> {
    let v = verify(sc)?;
    let theory = sc.order.spreading_rate(v.eigen.lambda1);
    let lines: Vec<Record> = v.checks.iter().map(|c| c.record()).collect();
    write_file(out, "verdict.ndjson", &ndjson(&lines))?;
    write_file(out, "fronts.csv", &to_csv(&v.simulation.records))?;
    write_file(out, "fits.ndjson", &fits_text(&v.fits, theory))?;
    if !v.residuals.is_empty() {
        let recs: Vec<Record> = v.residuals.iter().map(|r| r.record()).collect();
        write_file(out, "residuals.ndjson", &ndjson(&recs))?;
    }
    let params: Vec<Record> = [v.sub, v.sup, v.step3]
        .iter()
        .flatten()
        .map(|p| p.record())
        .collect();
    if !params.is_empty() {
        write_file(out, "bounds.ndjson", &ndjson(&params))?;
    }
    if let Some(a) = &v.attractor {
        let recs: Vec<Record> = a.records.iter().map(|r| r.record()).collect();
        write_file(out, "attractor.ndjson", &ndjson(&recs))?;
    }
    if !v.isotropy.is_empty() {
        let recs: Vec<Record> = v.isotropy.iter().map(|r| r.record()).collect();
        write_file(out, "isotropy.ndjson", &ndjson(&recs))?;
    }
    for c in &v.checks {
        println!("{:<22} {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    let failing: Vec<&str> = v.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failing.is_empty() {
        Ok(ExitStatus::Pass)
    } else {
        eprintln!("failing checks: {}", failing.join(", "));
        Ok(ExitStatus::CheckFailure)
    }
}
