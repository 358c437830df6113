// SPDX-License-Identifier: MIT OR Apache-2.0
//! Level-set radii along rays and exponential fits of their growth.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, MAX_DIM};
use crate::output::{num, Record};

/// A level λ inside the admissible range (0, min μ).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Level(f64);

impl Level {
    pub fn new(lambda: f64, mu_min: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < mu_min) {
            return Err(Error::InvalidArgument(format!(
                "level {lambda} outside (0, min mu = {mu_min})"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A ray direction given by a nonzero integer lattice step, e.g. (1, 0) or (1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    step: [isize; MAX_DIM],
    d: usize,
}

impl Direction {
    pub fn new(step: &[isize]) -> Result<Self> {
        if step.is_empty() || step.len() > MAX_DIM || step.iter().all(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("bad direction {step:?}")));
        }
        let mut s = [0isize; MAX_DIM];
        s[..step.len()].copy_from_slice(step);
        Ok(Self { step: s, d: step.len() })
    }

    /// The coordinate axes in both orientations.
    pub fn axes(d: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for a in 0..d {
            for sign in [1, -1] {
                let mut s = vec![0isize; d];
                s[a] = sign;
                out.push(Self::new(&s).expect("nonzero"));
            }
        }
        out
    }

    pub fn step(&self) -> &[isize] {
        &self.step[..self.d]
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.step().iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Samples (r, u) along the ray from the origin, stopping at `r_max` or at the
/// box edge, whichever comes first.
pub fn ray_samples(u: &ScalarField, dir: Direction, r_max: f64) -> Result<Vec<(f64, f64)>> {
    let grid = u.grid();
    let d = grid.dim();
    if dir.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "direction {dir} does not match dimension {d}"
        )));
    }
    let origin = grid
        .origin_index()
        .ok_or_else(|| Error::InvalidGrid("fronts need an origin-centered grid".into()))?;
    let o = grid.unravel(origin);
    let unit = dir
        .step()
        .iter()
        .enumerate()
        .map(|(a, &s)| (s as f64 * grid.spacing(a)).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    for j in 0.. {
        let r = j as f64 * unit;
        if r > r_max * (1.0 + 1e-12) {
            break;
        }
        let mut inside = true;
        for a in 0..d {
            let pos = o[a] as isize + j as isize * dir.step()[a];
            if pos < 0 || pos >= grid.shape()[a] as isize {
                inside = false;
                break;
            }
            idx[a] = pos as usize;
        }
        if !inside {
            break;
        }
        out.push((r, u.values()[grid.ravel(&idx)]));
    }
    Ok(out)
}

fn crossing(a: (f64, f64), b: (f64, f64), lambda: f64) -> f64 {
    let (ra, ua) = a;
    let (rb, ub) = b;
    if ua == ub {
        return ra;
    }
    ra + (ua - lambda) / (ua - ub) * (rb - ra)
}

/// Inner and outer λ-radii along `dir`, searched on [0, r_max].
///
/// The inner radius is the first down-crossing of λ, the outer radius the last
/// up-crossing; both are linearly interpolated between samples.
pub fn extract_front(u: &ScalarField, level: Level, dir: Direction, r_max: f64) -> Result<(f64, f64)> {
    let lambda = level.value();
    let samples = ray_samples(u, dir, r_max)?;
    let last = samples.len() - 1;
    let r_inner = match samples.iter().position(|&(_, v)| v <= lambda) {
        None => samples[last].0,
        Some(0) => 0.0,
        Some(j) => crossing(samples[j - 1], samples[j], lambda),
    };
    let r_outer = match samples.iter().rposition(|&(_, v)| v >= lambda) {
        None => 0.0,
        Some(k) if k == last => samples[last].0,
        Some(k) => crossing(samples[k], samples[k + 1], lambda),
    };
    Ok((r_inner, r_outer.max(r_inner)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontRecord {
    pub t: f64,
    pub lambda: f64,
    pub direction: usize,
    pub r_inner: f64,
    pub r_outer: f64,
}

/// Records for every (level, direction) pair at one time.
pub fn records_at(
    u: &ScalarField,
    t: f64,
    levels: &[Level],
    dirs: &[Direction],
    r_max: f64,
) -> Result<Vec<FrontRecord>> {
    let mut out = Vec::with_capacity(levels.len() * dirs.len());
    for &level in levels {
        for (k, &dir) in dirs.iter().enumerate() {
            let (r_inner, r_outer) = extract_front(u, level, dir, r_max)?;
            out.push(FrontRecord {
                t,
                lambda: level.value(),
                direction: k,
                r_inner,
                r_outer,
            });
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "t,lambda,dir_index,r_inner,r_outer";

pub fn to_csv(records: &[FrontRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(r.t),
            num(r.lambda),
            r.direction,
            num(r.r_inner),
            num(r.r_outer)
        ));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<FrontRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Format(format!("bad front CSV header {other:?}"))),
    }
    let mut out = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("front CSV line {}: {line:?}", no + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let p = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        out.push(FrontRecord {
            t: p(f[0])?,
            lambda: p(f[1])?,
            direction: f[2].trim().parse().map_err(|_| bad())?,
            r_inner: p(f[3])?,
            r_outer: p(f[4])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inner,
    Outer,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Inner => "inner",
            Side::Outer => "outer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontFit {
    pub lambda: f64,
    pub direction: usize,
    pub side: Side,
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub c_lambda_est: f64,
    pub residual_rms: f64,
    pub count: usize,
}

pub const MIN_FIT_RECORDS: usize = 5;

/// Least-squares line through (t, log r) for the records with t in `window`.
pub fn fit_exponent(records: &[FrontRecord], side: Side, window: (f64, f64)) -> Result<FrontFit> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no front records".into()))?;
    if records
        .iter()
        .any(|r| r.lambda != first.lambda || r.direction != first.direction)
    {
        return Err(Error::InvalidArgument(
            "records mix levels or directions".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .map(|r| {
            let rad = match side {
                Side::Inner => r.r_inner,
                Side::Outer => r.r_outer,
            };
            (r.t, rad)
        })
        .filter(|&(_, rad)| rad > 0.0)
        .map(|(t, rad)| (t, rad.ln()))
        .collect();
    if pts.len() < MIN_FIT_RECORDS {
        return Err(Error::InvalidArgument(format!(
            "{} usable records in window [{}, {}], need {MIN_FIT_RECORDS}",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let sty = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    if stt <= 0.0 {
        return Err(Error::InvalidArgument("all records share one time".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let rss = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>();
    let c_lambda_est = match side {
        Side::Inner => intercept.exp(),
        Side::Outer => (-intercept).exp(),
    };
    Ok(FrontFit {
        lambda: first.lambda,
        direction: first.direction,
        side,
        slope,
        intercept,
        window,
        c_lambda_est,
        residual_rms: (rss / n).sqrt(),
        count: pts.len(),
    })
}

/// Splits records by (level, direction), preserving first-seen order.
pub fn group(records: &[FrontRecord]) -> Vec<Vec<FrontRecord>> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    let mut groups: Vec<Vec<FrontRecord>> = Vec::new();
    for r in records {
        match keys.iter().position(|&(l, d)| l == r.lambda && d == r.direction) {
            Some(k) => groups[k].push(*r),
            None => {
                keys.push((r.lambda, r.direction));
                groups.push(vec![*r]);
            }
        }
    }
    groups
}

impl FrontFit {
    /// `theory` is the predicted exponent |λ1|/(d+2α).
    pub fn record(&self, theory: f64) -> Record {
        Record::new()
            .num("lambda", self.lambda)
            .int("dir_index", self.direction as i64)
            .text("side", self.side.name())
            .num("slope", self.slope)
            .num("intercept", self.intercept)
            .num("c_lambda_est", self.c_lambda_est)
            .nums("window", &[self.window.0, self.window.1])
            .int("count", self.count as i64)
            .num("residual_rms", self.residual_rms)
            .num("theory", theory)
            .num("rel_error", (self.slope - theory).abs() / theory)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropyReport {
    pub lambda: f64,
    pub slopes: Vec<(usize, f64)>,
    /// max over pairs of |s_i − s_j| / min(s_i, s_j)
    pub max_rel_diff: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn isotropy_report(fits: &[FrontFit], threshold: f64) -> Result<IsotropyReport> {
    if fits.len() < 2 {
        return Err(Error::InvalidArgument("isotropy needs at least two directions".into()));
    }
    let lambda = fits[0].lambda;
    if fits.iter().any(|f| f.lambda != lambda) {
        return Err(Error::InvalidArgument("fits mix levels".into()));
    }
    let mut worst: f64 = 0.0;
    for (i, a) in fits.iter().enumerate() {
        for b in &fits[i + 1..] {
            let lo = a.slope.min(b.slope);
            let diff = if lo > 0.0 {
                (a.slope - b.slope).abs() / lo
            } else {
                f64::INFINITY
            };
            worst = worst.max(diff);
        }
    }
    Ok(IsotropyReport {
        lambda,
        slopes: fits.iter().map(|f| (f.direction, f.slope)).collect(),
        max_rel_diff: worst,
        threshold,
        pass: worst <= threshold,
    })
}

impl IsotropyReport {
    pub fn record(&self) -> Record {
        let slopes: Vec<f64> = self.slopes.iter().map(|s| s.1).collect();
        Record::new()
            .num("lambda", self.lambda)
            .nums("slopes", &slopes)
            .num("max_rel_diff", self.max_rel_diff)
            .num("threshold", self.threshold)
            .boolean("pass", self.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    fn line(n: usize, l: f64, f: impl Fn(f64) -> f64) -> ScalarField {
        let g = PeriodicGrid::new(1, &[n], &[l], true).unwrap();
        ScalarField::from_fn(&g, |x| f(x[0])).unwrap()
    }

    #[test]
    fn hat_crossing_is_exact() {
        let u = line(64, 8.0, |x| (1.0 - x.abs()).max(0.0));
        let lvl = Level::new(0.5, 1.0).unwrap();
        for dir in Direction::axes(1) {
            let (ri, ro) = extract_front(&u, lvl, dir, 3.5).unwrap();
            assert!((ri - 0.5).abs() < 1e-12 && (ro - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn below_level_everywhere() {
        let u = line(32, 8.0, |_| 0.2);
        let lvl = Level::new(0.4, 1.0).unwrap();
        let dir = Direction::new(&[1]).unwrap();
        assert_eq!(extract_front(&u, lvl, dir, 3.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn two_crossings() {
        // above λ on [0, 1), below on (1, 2), above again up to 3
        let u = line(128, 16.0, |x| {
            let r = x.abs();
            if r < 1.0 {
                1.0 - 0.5 * r
            } else if r < 2.0 {
                0.2
            } else if r <= 3.0 {
                0.8 - 0.3 * (r - 2.0)
            } else {
                0.1
            }
        });
        let lvl = Level::new(0.5, 1.0).unwrap();
        let (ri, ro) = extract_front(&u, lvl, Direction::new(&[1]).unwrap(), 7.0).unwrap();
        assert!((ri - 1.0).abs() <= 0.125, "{ri}");
        assert!((ro - 3.0).abs() <= 0.125, "{ro}");
    }

    #[test]
    fn level_range_is_enforced() {
        assert!(Level::new(0.0, 1.0).is_err());
        assert!(Level::new(1.0, 1.0).is_err());
        assert!(Level::new(1.1, 1.0).is_err());
        assert!(Level::new(0.9, 1.0).is_ok());
    }

    #[test]
    fn diagonal_ray_uses_euclidean_radius() {
        let g = PeriodicGrid::cube(2, 32, 16.0, true).unwrap();
        let u = ScalarField::from_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1]).sqrt() / 2.0).exp()).unwrap();
        let lvl = Level::new(0.5, 1.0).unwrap();
        let expect = 2.0 * 2f64.ln();
        for dir in [Direction::new(&[1, 0]).unwrap(), Direction::new(&[1, 1]).unwrap()] {
            let (ri, _) = extract_front(&u, lvl, dir, 7.0).unwrap();
            assert!((ri - expect).abs() < 0.05, "{dir}: {ri}");
        }
    }

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<FrontRecord> {
        (0..=40)
            .map(|k| {
                let t = k as f64 * 0.25;
                FrontRecord {
                    t,
                    lambda: 0.5,
                    direction: 0,
                    r_inner: f(t),
                    r_outer: f(t),
                }
            })
            .collect()
    }

    #[test]
    fn exact_exponential_fit() {
        let recs = synthetic(|t| 3.0 * (0.4 * t).exp());
        let inner = fit_exponent(&recs, Side::Inner, (0.0, 10.0)).unwrap();
        assert!((inner.slope - 0.4).abs() < 1e-12);
        assert!((inner.c_lambda_est - 3.0).abs() < 1e-12);
        assert!(inner.residual_rms < 1e-12);
        let outer = fit_exponent(&recs, Side::Outer, (0.0, 10.0)).unwrap();
        assert!((outer.c_lambda_est - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_exponential_fit() {
        let recs = synthetic(|t| 3.0 * (0.4 * t).exp() * (1.0 + 0.01 * t.sin()));
        let fit = fit_exponent(&recs, Side::Inner, (0.0, 10.0)).unwrap();
        assert!((fit.slope - 0.4).abs() < 0.01);
    }

    #[test]
    fn fit_needs_five_records() {
        let recs = synthetic(|t| 1.0 + t);
        assert!(fit_exponent(&recs, Side::Inner, (0.0, 0.9)).is_err());
        assert!(fit_exponent(&recs, Side::Inner, (0.0, 1.0)).is_ok());
    }

    fn fit_with(direction: usize, slope: f64) -> FrontFit {
        FrontFit {
            lambda: 0.5,
            direction,
            side: Side::Outer,
            slope,
            intercept: 0.0,
            window: (0.0, 1.0),
            c_lambda_est: 1.0,
            residual_rms: 0.0,
            count: 5,
        }
    }

    #[test]
    fn isotropy_arithmetic() {
        let same = isotropy_report(&[fit_with(0, 0.5), fit_with(1, 0.5)], 0.1).unwrap();
        assert_eq!(same.max_rel_diff, 0.0);
        assert!(same.pass);
        let off = isotropy_report(&[fit_with(0, 0.5), fit_with(1, 0.6)], 0.1).unwrap();
        assert!((off.max_rel_diff - 0.2).abs() < 1e-12);
        assert!(!off.pass);
        let mut other = fit_with(1, 0.5);
        other.lambda = 0.3;
        assert!(isotropy_report(&[fit_with(0, 0.5), other], 0.1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let recs = synthetic(|t| (0.3 * t).exp());
        let back = from_csv(&to_csv(&recs)).unwrap();
        assert_eq!(back, recs);
        assert!(from_csv("a,b\n").is_err());
    }
}
