// SPDX-License-Identifier: MIT OR Apache-2.0
//! Explicit algebraic sub- and supersolutions
//! `ũ(x, t) = a φ1(x) / (|λ1|^{−1} + b(t) |x|^{d+2α})`
//! and the checks that the evolution operator has the right sign on them.
//!
//! b solves b′ = −|λ1| b ± M b^{1+q} (+ for the subsolution), in closed form
//! `b(t) = (±M/|λ1| + B^{−q} e^{q|λ1|t})^{−1/q}` with q = 2α/(d+2α), or
//! q = (2α − γ)/(d+2α) when α ≥ 1/2.

use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::fracop::{multiplier_error_estimate, FracOrder, FractionalLaplacian};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::output::Record;
use crate::solver::tile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Sub,
    Super,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Sub => "sub",
            Kind::Super => "super",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub kind: Kind,
    pub alpha: f64,
    pub d: usize,
    pub lambda1: f64,
    pub a: f64,
    pub b_const: f64,
    pub m: f64,
    pub d_const: f64,
    /// Only used when α ≥ 1/2.
    pub gamma: Option<f64>,
    pub t0: f64,
}

/// γ = α − 1/4, moved to the middle of (2α − 1, 1) when that falls outside.
pub fn default_gamma(alpha: f64) -> f64 {
    let lo = (2.0 * alpha - 1.0).max(0.0);
    let g = alpha - 0.25;
    if g > lo && g < 1.0 {
        g
    } else {
        0.5 * (lo + 1.0)
    }
}

/// Exponent q of b^q in the operator bounds.
pub fn bound_exponent(order: FracOrder, gamma: Option<f64>) -> Result<f64> {
    let alpha = order.alpha();
    let p = order.decay_exponent();
    if alpha < 0.5 {
        return Ok(2.0 * alpha / p);
    }
    let g = gamma.unwrap_or_else(|| default_gamma(alpha));
    if !(g > (2.0 * alpha - 1.0).max(0.0) && g < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma {g} not in ({}, 1)",
            (2.0 * alpha - 1.0).max(0.0)
        )));
    }
    Ok((2.0 * alpha - g) / p)
}

impl BoundParams {
    pub fn order(&self) -> Result<FracOrder> {
        FracOrder::new(self.alpha, self.d)
    }

    pub fn decay(&self) -> f64 {
        self.d as f64 + 2.0 * self.alpha
    }

    pub fn exponent(&self) -> Result<f64> {
        bound_exponent(self.order()?, self.gamma)
    }

    fn sign(&self) -> f64 {
        match self.kind {
            Kind::Sub => 1.0,
            Kind::Super => -1.0,
        }
    }

    fn inner(&self, t: f64) -> Result<f64> {
        let q = self.exponent()?;
        let l = self.lambda1.abs();
        Ok(self.sign() * self.m / l + self.b_const.powf(-q) * (q * l * t).exp())
    }

    pub fn b_of_t(&self, t: f64) -> Result<f64> {
        match self.kind {
            Kind::Sub if t < 0.0 => {
                return Err(Error::InvalidArgument(format!("subsolution time {t} < 0")))
            }
            Kind::Super if t < self.t0 => {
                return Err(Error::InvalidArgument(format!(
                    "supersolution time {t} before t0 = {}",
                    self.t0
                )))
            }
            _ => {}
        }
        let inner = self.inner(t)?;
        if !(inner > 0.0) {
            return Err(Error::Numerical(format!("b(t) undefined at t = {t}")));
        }
        Ok(inner.powf(-1.0 / self.exponent()?))
    }

    /// b′(t) = −|λ1| b ± M b^{1+q}.
    pub fn b_prime(&self, t: f64) -> Result<f64> {
        let b = self.b_of_t(t)?;
        let q = self.exponent()?;
        Ok(-self.lambda1.abs() * b + self.sign() * self.m * b.powf(1.0 + q))
    }

    /// The λ-radius of the bound at time t: where the subsolution is surely
    /// above λ (using min φ1) or the supersolution surely below it (max φ1).
    pub fn level_radius(&self, level: f64, phi_min: f64, phi_max: f64, t: f64) -> Result<f64> {
        let b = self.b_of_t(t)?;
        let p = self.decay();
        let inv = 1.0 / self.lambda1.abs();
        let top = match self.kind {
            Kind::Sub => self.a * phi_min / level - inv,
            Kind::Super => self.a * phi_max / level,
        };
        Ok(if top > 0.0 { (top / b).powf(1.0 / p) } else { 0.0 })
    }

    pub fn record(&self) -> Record {
        Record::new()
            .text("kind", self.kind.name())
            .num("alpha", self.alpha)
            .int("d", self.d as i64)
            .num("lambda1", self.lambda1)
            .num("a", self.a)
            .num("B", self.b_const)
            .num("M", self.m)
            .num("D", self.d_const)
            .opt_num("gamma", self.gamma)
            .num("t0", self.t0)
    }
}

/// Margin applied to every admissibility constraint.
pub const MARGIN: f64 = 0.1;

/// Largest admissible B̲, (|λ1|/M)^{1/q}.
pub fn sub_b_ceiling(lambda1: f64, m: f64, q: f64) -> f64 {
    (lambda1.abs() / m).powf(1.0 / q)
}

/// B at which M B^q / |λ1| equals `ratio`.
pub fn b_for_ratio(lambda1: f64, m: f64, q: f64, ratio: f64) -> f64 {
    (ratio * lambda1.abs() / m).powf(1.0 / q)
}

/// Parameters saturating the admissibility constraints with a 10% margin.
///
/// Without an explicit `b`, B̲ is 0.9 of its ceiling and B̄ the value for
/// which t0 = 0.
pub fn admissible_params(
    kind: Kind,
    eigen: &EigenPair,
    order: FracOrder,
    d_const: f64,
    b: Option<f64>,
    gamma: Option<f64>,
) -> Result<BoundParams> {
    let lambda1 = eigen.lambda1;
    if lambda1 >= 0.0 {
        return Err(Error::Extinction(lambda1));
    }
    if !(d_const > 0.0 && d_const.is_finite()) {
        return Err(Error::InvalidArgument(format!("D = {d_const} must be positive")));
    }
    let l = lambda1.abs();
    let phi_min = eigen.phi1.min();
    let phi_max = eigen.phi1.max();
    let m = d_const * (1.0 / phi_min + 1.0);
    let q = bound_exponent(order, gamma)?;
    let gamma = if order.alpha() >= 0.5 {
        Some(gamma.unwrap_or_else(|| default_gamma(order.alpha())))
    } else {
        None
    };
    let (a, b_const, t0) = match kind {
        Kind::Sub => {
            let ceiling = sub_b_ceiling(lambda1, m, q);
            let b_const = b.unwrap_or((1.0 - MARGIN) * ceiling);
            if !(b_const > 0.0 && b_const < ceiling) {
                return Err(Error::InvalidArgument(format!(
                    "no admissible B for the subsolution: {b_const} not in (0, {ceiling})"
                )));
            }
            let a_ceiling = (1.0 - b_const.powf(q) * m / l) / phi_max;
            ((1.0 - MARGIN) * a_ceiling, b_const, 0.0)
        }
        Kind::Super => {
            let b_const = b.unwrap_or_else(|| b_for_ratio(lambda1, m, q, 0.5));
            if !(b_const > 0.0 && b_const.is_finite()) {
                return Err(Error::InvalidArgument(format!("B = {b_const} must be positive")));
            }
            let bq = b_const.powf(q);
            let a_floor = (1.0 + 2.0 * bq * m / l) / phi_min;
            let t0 = ((0.5 + m * bq / l).ln() / (q * l)).max(0.0);
            ((1.0 + MARGIN) * a_floor, b_const, t0)
        }
    };
    Ok(BoundParams {
        kind,
        alpha: order.alpha(),
        d: order.dim(),
        lambda1,
        a,
        b_const,
        m,
        d_const,
        gamma,
        t0,
    })
}

/// A bound evaluated on a propagation box, with φ1 and μ tiled onto it.
#[derive(Debug, Clone)]
pub struct BoundProfile {
    pub params: BoundParams,
    pub phi_box: ScalarField,
    pub mu_box: ScalarField,
    pub phi_min: f64,
    pub phi_max: f64,
    /// |x|^{d+2α} at every grid point
    radial: Vec<f64>,
}

impl BoundProfile {
    pub fn new(params: BoundParams, eigen: &EigenPair, mu_cell: &ScalarField, grid: &PeriodicGrid) -> Result<Self> {
        if !grid.is_centered() {
            return Err(Error::InvalidGrid("bounds need an origin-centered grid".into()));
        }
        let p = params.decay();
        let radial = (0..grid.len())
            .map(|flat| {
                let x = grid.point(flat);
                x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt().powf(p)
            })
            .collect();
        Ok(Self {
            params,
            phi_box: tile(&eigen.phi1, grid)?,
            mu_box: tile(mu_cell, grid)?,
            phi_min: eigen.phi1.min(),
            phi_max: eigen.phi1.max(),
            radial,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.phi_box.grid()
    }

    pub fn with_a(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.params.a = a;
        out
    }

    /// a φ1(x) / (|λ1|^{−1} + b(t)|x|^{d+2α})
    pub fn evaluate(&self, t: f64) -> Result<ScalarField> {
        let b = self.params.b_of_t(t)?;
        let inv = 1.0 / self.params.lambda1.abs();
        let a = self.params.a;
        let vals = self
            .phi_box
            .values()
            .iter()
            .zip(&self.radial)
            .map(|(phi, rp)| a * phi / (inv + b * rp))
            .collect();
        ScalarField::new(self.grid().clone(), vals)
    }

    /// N[ũ] = ũ_t + (−Δ)^α ũ − μ ũ + ũ², with ũ_t from b′(t) in closed form.
    pub fn residual(&self, t: f64, order: FracOrder) -> Result<(ScalarField, ScalarField)> {
        let u = self.evaluate(t)?;
        let b = self.params.b_of_t(t)?;
        let db = self.params.b_prime(t)?;
        let inv = 1.0 / self.params.lambda1.abs();
        let lap = FractionalLaplacian::new(self.grid(), order)?.apply(&u)?;
        let vals = (0..u.len())
            .map(|i| {
                let v = u.values()[i];
                let rp = self.radial[i];
                let ut = -v * db * rp / (inv + b * rp);
                ut + lap.values()[i] - self.mu_box.values()[i] * v + v * v
            })
            .collect();
        Ok((ScalarField::new(self.grid().clone(), vals)?, u))
    }

    /// Smallest a with a φ1(x)/(|λ1|^{−1} + b(t)|x|^{d+2α}) ≥ u(x) everywhere.
    pub fn a_to_cover(&self, u: &ScalarField, t: f64) -> Result<f64> {
        u.check_same_grid(&self.phi_box)?;
        let b = self.params.b_of_t(t)?;
        let inv = 1.0 / self.params.lambda1.abs();
        Ok((0..u.len()).fold(0.0f64, |m, i| {
            m.max(u.values()[i] * (inv + b * self.radial[i]) / self.phi_box.values()[i])
        }))
    }
}

/// Points with |x| ≤ L/4 (smallest box length).
pub fn interior_mask(grid: &PeriodicGrid) -> Vec<bool> {
    let limit = grid.half_width() / 2.0;
    (0..grid.len())
        .map(|flat| {
            let x = grid.point(flat);
            x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt() <= limit
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub kind: Kind,
    pub t: f64,
    /// fraction of interior points violating the sign by more than eps_grid
    pub viol_frac: f64,
    /// largest signed violation (N for sub, −N for super); negative is a margin
    pub max_viol: f64,
    pub eps_grid: f64,
}

impl ResidualSummary {
    pub fn record(&self) -> Record {
        Record::new()
            .text("kind", self.kind.name())
            .num("t", self.t)
            .num("viol_frac", self.viol_frac)
            .num("max_viol", self.max_viol)
            .num("eps_grid", self.eps_grid)
    }

    pub fn pass(&self) -> bool {
        self.viol_frac == 0.0
    }
}

/// Sign check of the residual on the interior |x| ≤ L/4. The tolerance is
/// the multiplier's own discretization error estimate on ũ.
pub fn residual_summary(profile: &BoundProfile, t: f64, order: FracOrder) -> Result<ResidualSummary> {
    let (n, u) = profile.residual(t, order)?;
    let eps_grid = multiplier_error_estimate(&u, order)?;
    let mask = interior_mask(profile.grid());
    let sign = match profile.params.kind {
        Kind::Sub => 1.0,
        Kind::Super => -1.0,
    };
    let mut count = 0usize;
    let mut bad = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for (v, &inside) in n.values().iter().zip(&mask) {
        if !inside {
            continue;
        }
        count += 1;
        let s = sign * v;
        worst = worst.max(s);
        if s > eps_grid {
            bad += 1;
        }
    }
    Ok(ResidualSummary {
        kind: profile.params.kind,
        t,
        viol_frac: bad as f64 / count.max(1) as f64,
        max_viol: worst,
        eps_grid,
    })
}

/// Step 3 initialization: the largest c < 1 with
/// u(x, t1) ≥ c t1 / (t1^{d/2α+1} + |x|^{d+2α}) on the interior.
pub fn measure_c(u_t1: &ScalarField, t1: f64, order: FracOrder) -> Result<f64> {
    let grid = u_t1.grid();
    let p = order.decay_exponent();
    let e = order.dim() as f64 / (2.0 * order.alpha()) + 1.0;
    let mask = interior_mask(grid);
    let mut c: f64 = 1.0 - 1e-6;
    for flat in 0..grid.len() {
        if !mask[flat] {
            continue;
        }
        let x = grid.point(flat);
        let rp = x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt().powf(p);
        c = c.min(u_t1.values()[flat] * (t1.powf(e) + rp) / t1);
    }
    if !(c > 0.0) {
        return Err(Error::Numerical(format!("no positive Step 3 constant at t1 = {t1}")));
    }
    Ok(c)
}

/// Subsolution constants a̲ = c/(2 t1^{d/2α}|λ1| max φ1), B̲ = 2^{1/q}/(|λ1| t1^{d/2α+1}).
pub fn step3_sub_params(
    c: f64,
    t1: f64,
    eigen: &EigenPair,
    order: FracOrder,
    d_const: f64,
    gamma: Option<f64>,
) -> Result<BoundParams> {
    let l = eigen.lambda1.abs();
    let q = bound_exponent(order, gamma)?;
    let e = order.dim() as f64 / (2.0 * order.alpha());
    let b_const = 2f64.powf(1.0 / q) / (l * t1.powf(e + 1.0));
    let mut params = admissible_params(Kind::Sub, eigen, order, d_const, Some(b_const), gamma)?;
    let a = c / (2.0 * t1.powf(e) * l * eigen.phi1.max());
    let a_ceiling = params.a / (1.0 - MARGIN);
    if a > a_ceiling {
        return Err(Error::InvalidArgument(format!(
            "Step 3 a = {a} exceeds its ceiling {a_ceiling}"
        )));
    }
    params.a = a;
    Ok(params)
}

/// Smallest t1 for which the Step 3 B̲ is admissible.
pub fn step3_min_t1(eigen: &EigenPair, order: FracOrder, d_const: f64, gamma: Option<f64>) -> Result<f64> {
    let l = eigen.lambda1.abs();
    let m = d_const * (1.0 / eigen.phi1.min() + 1.0);
    let q = bound_exponent(order, gamma)?;
    let e = order.dim() as f64 / (2.0 * order.alpha()) + 1.0;
    let ceiling = sub_b_ceiling(eigen.lambda1, m, q);
    Ok((2f64.powf(1.0 / q) / (l * ceiling)).powf(1.0 / e))
}
