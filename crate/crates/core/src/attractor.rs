// SPDX-License-Identifier: MIT OR Apache-2.0
//! Rescaled frames and the transport-equation limit.
//!
//! With u = φ1 v and r(t) = e^{|λ1| t/(d+2α)}, the rescaled unknown
//! w(y, t) = v(y r(t), t) satisfies, up to terms of size e^{−2α|λ1|t/(d+2α)},
//!
//! ```text
//! w_t − (|λ1|/(d+2α)) y·∇w − |λ1| w + φ1(y r(t)) w² = 0,
//! ```
//!
//! whose solution from w̃0 is known in closed form.

use rayon::prelude::*;

use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::fracop::{apply_k, apply_multiplier, FracOrder};
use crate::grid::{PeriodicGrid, ScalarField, MAX_DIM};
use crate::interp::PeriodicInterpolant;
use crate::output::Record;
use crate::solver::tile;

pub const DEFAULT_Y_MAX: f64 = 5.0;

/// Closed-form solutions of the transport equation for a given eigenpair.
#[derive(Debug, Clone)]
pub struct Transport {
    phi: PeriodicInterpolant,
    lambda1: f64,
    order: FracOrder,
}

impl Transport {
    pub fn new(eigen: &EigenPair, order: FracOrder) -> Result<Self> {
        if eigen.lambda1 >= 0.0 {
            return Err(Error::Extinction(eigen.lambda1));
        }
        if eigen.phi1.grid().dim() != order.dim() {
            return Err(Error::InvalidArgument("eigenfunction dimension mismatch".into()));
        }
        Ok(Self {
            phi: PeriodicInterpolant::new(&eigen.phi1)?,
            lambda1: eigen.lambda1,
            order,
        })
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    /// |λ1|/(d+2α)
    pub fn rate(&self) -> f64 {
        self.order.spreading_rate(self.lambda1)
    }

    pub fn r(&self, t: f64) -> f64 {
        (self.rate() * t).exp()
    }

    pub fn phi_at(&self, x: &[f64]) -> f64 {
        self.phi.eval(x)
    }

    /// w̃(y, t) for w̃0(y) = 1/(1 + |y|^{d+2α}), given φ1(y r(t)).
    fn exact_from_phi(&self, phi_yr: f64, y_norm_p: f64, t: f64) -> f64 {
        let l = self.lambda1.abs();
        let e = (-l * t).exp();
        1.0 / (phi_yr / l * (1.0 - e) + e + y_norm_p)
    }

    pub fn exact(&self, y: &[f64], t: f64) -> Result<f64> {
        check_time(t)?;
        let r = self.r(t);
        let x: Vec<f64> = y.iter().map(|v| v * r).collect();
        Ok(self.exact_from_phi(self.phi_at(&x), norm(y).powf(self.order.decay_exponent()), t))
    }

    /// w̃(y, t) from an arbitrary positive datum w̃0.
    pub fn general(&self, y: &[f64], t: f64, w0: impl Fn(&[f64]) -> f64) -> Result<f64> {
        check_time(t)?;
        let l = self.lambda1.abs();
        let r = self.r(t);
        let x: Vec<f64> = y.iter().map(|v| v * r).collect();
        let phi = self.phi_at(&x);
        Ok(1.0 / (phi / l + (-l * t).exp() * (1.0 / w0(&x) - phi / l)))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be >= 0")));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// w̃(y, t) for w̃0(y) = 1/(1 + |y|^{d+2α}).
pub fn transport_exact(y: &[f64], t: f64, eigen: &EigenPair, order: FracOrder) -> Result<f64> {
    Transport::new(eigen, order)?.exact(y, t)
}

/// Origin-centered cube [−y_max, y_max)^d with n points per axis.
pub fn y_grid(d: usize, n: usize, y_max: f64) -> Result<PeriodicGrid> {
    PeriodicGrid::cube(d, n, 2.0 * y_max, true)
}

/// Largest y-window not beyond `y_max` that stays valid up to `t_last`.
pub fn window_for(transport: &Transport, y_max: f64, t_last: f64, box_grid: &PeriodicGrid, front_guard: f64) -> f64 {
    y_max.min(front_guard * box_grid.half_width() / transport.r(t_last))
}

#[derive(Debug, Clone)]
pub struct RescaledFrame {
    pub t: f64,
    pub r_t: f64,
    /// w on the y-grid
    pub w: ScalarField,
    /// φ1(y r(t)) on the y-grid
    phi_yr: Vec<f64>,
}

/// Multilinear interpolation of a box field at an arbitrary point.
pub fn multilinear(f: &ScalarField, x: &[f64]) -> f64 {
    let grid = f.grid();
    let d = grid.dim();
    let mut base = [0isize; MAX_DIM];
    let mut frac = [0.0f64; MAX_DIM];
    for a in 0..d {
        let s = (x[a] - grid.coord(a, 0)) / grid.spacing(a);
        let i = s.floor();
        base[a] = i as isize;
        frac[a] = s - i;
    }
    let mut acc = 0.0;
    let mut idx = [0usize; MAX_DIM];
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        for a in 0..d {
            let up = (corner >> a) & 1;
            let n = grid.shape()[a] as isize;
            idx[a] = (base[a] + up as isize).rem_euclid(n) as usize;
            weight *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if weight != 0.0 {
            acc += weight * f.values()[grid.ravel(&idx[..d])];
        }
    }
    acc
}

/// Samples w(y, t) = (u/φ1)(y r(t)) on `ygrid`.
///
/// The window must map inside the valid part of the box:
/// r(t)·max|y| ≤ front_guard·L/2.
pub fn rescale(
    u: &ScalarField,
    transport: &Transport,
    phi_box: &ScalarField,
    t: f64,
    ygrid: &PeriodicGrid,
    front_guard: f64,
) -> Result<RescaledFrame> {
    u.check_same_grid(phi_box)?;
    if ygrid.dim() != u.grid().dim() || !ygrid.is_centered() {
        return Err(Error::InvalidGrid("y-grid must be origin-centered with the box dimension".into()));
    }
    let r = transport.r(t);
    let reach = r * ygrid.half_width() * (ygrid.dim() as f64).sqrt();
    let limit = front_guard * u.grid().half_width();
    if reach > limit {
        return Err(Error::InvalidArgument(format!(
            "y-window reaches |x| = {reach:.3} at t = {t}, beyond the valid radius {limit:.3}"
        )));
    }
    let v = u.zip_map(phi_box, |a, b| a / b)?;
    let d = ygrid.dim();
    let (w, phi_yr): (Vec<f64>, Vec<f64>) = (0..ygrid.len())
        .into_par_iter()
        .map(|flat| {
            let y = ygrid.point(flat);
            let x: Vec<f64> = y[..d].iter().map(|c| c * r).collect();
            (multilinear(&v, &x), transport.phi_at(&x))
        })
        .unzip();
    Ok(RescaledFrame {
        t,
        r_t: r,
        w: ScalarField::new(ygrid.clone(), w)?,
        phi_yr,
    })
}

/// Box tiling of φ1 for [`rescale`].
pub fn phi_on_box(eigen: &EigenPair, grid: &PeriodicGrid) -> Result<ScalarField> {
    tile(&eigen.phi1, grid)
}

/// sup_y |w(y, t) − w̃(y e^{−c s}, t + s)|, c = |λ1|/(d+2α).
///
/// The time shift is applied in the original variables, so φ1(y r(t)) is
/// unchanged and |y e^{−cs}|^{d+2α} = |y|^{d+2α} e^{−|λ1| s}.
pub fn attractor_distance(frame: &RescaledFrame, transport: &Transport, shift: f64) -> Result<f64> {
    if frame.w.is_empty() {
        return Err(Error::InvalidArgument("empty y-window".into()));
    }
    let t = frame.t + shift;
    check_time(t)?;
    let grid = frame.w.grid();
    let p = transport.order.decay_exponent();
    let damp = (-transport.lambda1.abs() * shift).exp();
    let mut sup: f64 = 0.0;
    for flat in 0..grid.len() {
        let y = grid.point(flat);
        let yp = norm(&y[..grid.dim()]).powf(p) * damp;
        let wt = transport.exact_from_phi(frame.phi_yr[flat], yp, t);
        sup = sup.max((frame.w.values()[flat] - wt).abs());
    }
    Ok(sup)
}

/// Shift minimizing [`attractor_distance`] over s ≥ −t: a scan followed by
/// golden-section refinement.
pub fn calibrate_shift(frame: &RescaledFrame, transport: &Transport) -> Result<f64> {
    let lo = -frame.t;
    let hi = 20.0;
    let step = 0.02;
    let count = ((hi - lo) / step).ceil() as usize;
    let dist = |s: f64| attractor_distance(frame, transport, s.max(lo));
    let mut best = (lo, dist(lo)?);
    for k in 1..=count {
        let s = lo + k as f64 * step;
        let v = dist(s)?;
        if v < best.1 {
            best = (s, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (dist(c)?, dist(e)?);
    while b - a > 1e-10 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = dist(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = dist(e)?;
        }
    }
    let s = 0.5 * (a + b);
    Ok(if dist(s)? <= best.1 { s } else { best.0 })
}

/// e^{−2α|λ1|t/(d+2α)} sup_{|y| ≤ Y} |(−Δ)^α w − K w/φ1|.
///
/// Both operators are homogeneous of degree 2α under x = y r(t), so the
/// prefactor cancels and the sup is taken over |x| ≤ Y r(t) in the original
/// variables, with K at scale 1.
pub fn neglected_norm(
    u: &ScalarField,
    eigen: &EigenPair,
    phi_box: &ScalarField,
    transport: &Transport,
    t: f64,
    y_max: f64,
) -> Result<f64> {
    let order = transport.order;
    let v = u.zip_map(phi_box, |a, b| a / b)?;
    let lap = apply_multiplier(&v, order)?;
    let k = apply_k(&v, &eigen.phi1, 1.0, order)?;
    let grid = u.grid();
    let limit = y_max * transport.r(t);
    let mut sup: f64 = 0.0;
    for flat in 0..grid.len() {
        let x = grid.point(flat);
        if norm(&x[..grid.dim()]) > limit {
            continue;
        }
        let term = lap.values()[flat] - k.values()[flat] / phi_box.values()[flat];
        sup = sup.max(term.abs());
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorRecord {
    pub t: f64,
    pub shift: f64,
    pub sup_dist: f64,
    pub neglected_norm: f64,
}

impl AttractorRecord {
    pub fn record(&self) -> Record {
        Record::new()
            .num("t", self.t)
            .num("shift", self.shift)
            .num("sup_dist", self.sup_dist)
            .num("neglected_norm", self.neglected_norm)
    }
}

/// Distances and neglected-term norms for a sequence of snapshots. The shift
/// is calibrated on the first frame and reused for the rest.
pub fn attractor_series(
    frames: &[(f64, ScalarField)],
    eigen: &EigenPair,
    order: FracOrder,
    ygrid: &PeriodicGrid,
    front_guard: f64,
) -> Result<Vec<AttractorRecord>> {
    let Some((_, first)) = frames.first() else {
        return Ok(Vec::new());
    };
    let transport = Transport::new(eigen, order)?;
    let phi_box = phi_on_box(eigen, first.grid())?;
    let mut shift = None;
    let mut out = Vec::with_capacity(frames.len());
    for (t, u) in frames {
        let frame = rescale(u, &transport, &phi_box, *t, ygrid, front_guard)?;
        let s = match shift {
            Some(s) => s,
            None => *shift.insert(calibrate_shift(&frame, &transport)?),
        };
        out.push(AttractorRecord {
            t: *t,
            shift: s,
            sup_dist: attractor_distance(&frame, &transport, s)?,
            neglected_norm: neglected_norm(u, eigen, &phi_box, &transport, *t, ygrid.half_width())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair() -> EigenPair {
        let g = PeriodicGrid::new(1, &[8], &[1.0], false).unwrap();
        EigenPair {
            lambda1: -1.0,
            phi1: ScalarField::constant(&g, 1.0),
            residual: 0.0,
            iterations: 1,
        }
    }

    fn ord() -> FracOrder {
        FracOrder::new(0.25, 1).unwrap()
    }

    #[test]
    fn exact_at_time_zero_is_the_datum() {
        let tr = Transport::new(&unit_pair(), ord()).unwrap();
        for y in [0.0, 0.3, -2.0, 4.5] {
            let want = 1.0 / (1.0 + f64::abs(y).powf(1.5));
            assert!((tr.exact(&[y], 0.0).unwrap() - want).abs() < 1e-15);
        }
        assert!(tr.exact(&[0.0], -1.0).is_err());
    }

    #[test]
    fn exact_long_time_limit_for_unit_mu() {
        let tr = Transport::new(&unit_pair(), ord()).unwrap();
        let y = 0.7f64;
        let want = 1.0 / (1.0 + y.powf(1.5));
        assert!((tr.exact(&[y], 60.0).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn eigenfunction_rescales_to_one() {
        let p = unit_pair();
        let box_grid = PeriodicGrid::cube(1, 512, 64.0, true).unwrap();
        let tr = Transport::new(&p, ord()).unwrap();
        let phi_box = phi_on_box(&p, &box_grid).unwrap();
        let yg = y_grid(1, 64, 2.0).unwrap();
        let f = rescale(&phi_box, &tr, &phi_box, 1.5, &yg, 0.9).unwrap();
        assert!(f.w.values().iter().all(|w| (w - 1.0).abs() < 1e-14));
        assert!(rescale(&phi_box, &tr, &phi_box, 10.0, &yg, 0.9).is_err());
    }

    #[test]
    fn distance_vanishes_on_the_exact_solution() {
        let p = unit_pair();
        let tr = Transport::new(&p, ord()).unwrap();
        let yg = y_grid(1, 64, 3.0).unwrap();
        let t = 2.0;
        let w = ScalarField::from_fn(&yg, |y| tr.exact(y, t).unwrap()).unwrap();
        let frame = RescaledFrame {
            t,
            r_t: tr.r(t),
            phi_yr: vec![1.0; yg.len()],
            w,
        };
        assert!(attractor_distance(&frame, &tr, 0.0).unwrap() < 1e-15);
        assert!(calibrate_shift(&frame, &tr).unwrap().abs() < 1e-6);
    }

    #[test]
    fn multilinear_reproduces_linear_functions() {
        let g = PeriodicGrid::cube(2, 16, 8.0, true).unwrap();
        let f = ScalarField::from_fn(&g, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]).unwrap();
        let v = multilinear(&f, &[0.3, -1.7]);
        assert!((v - (1.0 + 0.6 + 0.85)).abs() < 1e-13);
    }
}
