// SPDX-License-Identifier: MIT OR Apache-2.0
//! Principal periodic eigenpair of (−Δ)^α − μ(x) on the unit cell.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fracop::{FracOrder, FractionalLaplacian};
use crate::grid::ScalarField;
use crate::snapshot;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Positive, normalized to max φ1 = 1.
    pub phi1: ScalarField,
    /// ‖((−Δ)^α − μ)φ1 − λ1 φ1‖∞
    pub residual: f64,
    pub iterations: usize,
}

/// (−Δ)^α − μ + s with s = max μ + 1, so the potential part is ≥ 1.
struct Shifted {
    lap: FractionalLaplacian,
    potential: Vec<f64>,
    /// 1 / (|k|^{2α} + s − mean μ)
    precond: Vec<f64>,
}

impl Shifted {
    fn new(mu: &ScalarField, order: FracOrder, shift: f64) -> Result<Self> {
        let lap = FractionalLaplacian::new(mu.grid(), order)?;
        let mean = mu.values().iter().sum::<f64>() / mu.len() as f64;
        let precond = lap.symbol().iter().map(|s| 1.0 / (s + shift - mean)).collect();
        let potential = mu.values().iter().map(|m| shift - m).collect();
        Ok(Self {
            lap,
            potential,
            precond,
        })
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let f = ScalarField::new(self.lap.grid().clone(), v.to_vec())?;
        let mut out = self.lap.apply(&f)?.into_values();
        for ((o, p), x) in out.iter_mut().zip(&self.potential).zip(v) {
            *o += p * x;
        }
        Ok(out)
    }

    fn precondition(&self, r: &[f64]) -> Result<Vec<f64>> {
        let four = self.lap.fourier();
        let mut spec: Vec<Complex64> = four.forward(r)?;
        for (c, p) in spec.iter_mut().zip(&self.precond) {
            *c *= p;
        }
        four.inverse(spec)
    }

    /// Preconditioned conjugate gradients for the shifted system.
    fn solve(&self, b: &[f64], x0: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x = x0.to_vec();
        let ax = self.apply(&x)?;
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let target = rel_tol * dot(b, b).sqrt();
        let mut z = self.precondition(&r)?;
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let max_inner = 10 * b.len().max(50);
        for _ in 0..max_inner {
            if dot(&r, &r).sqrt() <= target {
                return Ok(x);
            }
            let ap = self.apply(&p)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Numerical("shifted operator lost positivity".into()));
            }
            let step = rz / pap;
            for i in 0..x.len() {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            z = self.precondition(&r)?;
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence {
            iterations: max_inner,
            residual: dot(&r, &r).sqrt(),
        })
    }
}

fn check_mu(mu: &ScalarField) -> Result<()> {
    if mu.min() <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "mu must be positive on the cell (min {})",
            mu.min()
        )));
    }
    Ok(())
}

/// ⟨((−Δ)^α − μ)φ, φ⟩ / ⟨φ, φ⟩.
pub fn rayleigh_quotient(phi: &ScalarField, mu: &ScalarField, order: FracOrder) -> Result<f64> {
    phi.check_same_grid(mu)?;
    let norm = phi.inner(phi)?;
    if norm <= 0.0 {
        return Err(Error::InvalidArgument("zero-norm input".into()));
    }
    let lap = FractionalLaplacian::new(phi.grid(), order)?.apply(phi)?;
    let num: f64 = lap
        .values()
        .iter()
        .zip(phi.values())
        .zip(mu.values())
        .map(|((l, p), m)| (l - m * p) * p)
        .sum::<f64>()
        * phi.grid().cell_volume();
    Ok(num / norm)
}

/// ‖((−Δ)^α − μ)φ − λφ‖∞
pub fn eigen_residual(phi: &ScalarField, mu: &ScalarField, order: FracOrder, lambda: f64) -> Result<f64> {
    phi.check_same_grid(mu)?;
    let lap = FractionalLaplacian::new(phi.grid(), order)?.apply(phi)?;
    Ok(lap
        .values()
        .iter()
        .zip(phi.values())
        .zip(mu.values())
        .fold(0.0f64, |m, ((l, p), mu)| m.max((l - mu * p - lambda * p).abs())))
}

/// Inverse power iteration on (−Δ)^α − μ + (max μ + 1), started from the
/// constant field, with a Rayleigh-quotient eigenvalue estimate each sweep.
pub fn principal_eigenpair(
    mu: &ScalarField,
    order: FracOrder,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    check_mu(mu)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let shift = mu.max() + 1.0;
    let op = Shifted::new(mu, order, shift)?;
    let inner_tol = (1e-3 * tol).max(1e-14);
    let grid = mu.grid().clone();
    let mut phi = vec![1.0; grid.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = op.solve(&phi, &phi, inner_tol)?;
        let top = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(top > 0.0) {
            return Err(Error::Numerical("inverse iterate has no positive entry".into()));
        }
        phi = next.into_iter().map(|v| v / top).collect();
        let field = ScalarField::new(grid.clone(), phi.clone())?;
        let lambda = rayleigh_quotient(&field, mu, order)?;
        residual = eigen_residual(&field, mu, order, lambda)?;
        if residual <= tol {
            if field.min() <= 0.0 {
                return Err(Error::Numerical(format!(
                    "eigenvector not positive (min {:.3e}): discretization too coarse",
                    field.min()
                )));
            }
            if lambda < -mu.max() - tol || lambda > -mu.min() + tol {
                return Err(Error::Numerical(format!(
                    "lambda1 = {lambda} outside [-max mu, -min mu]"
                )));
            }
            return Ok(EigenPair {
                lambda1: lambda,
                phi1: field,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

impl EigenPair {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            lambda1: self.lambda1,
            residual: self.residual,
            iterations: self.iterations as u32,
        }
    }

    /// Writes φ1 as a snapshot at `path` and the sidecar record next to it
    /// (same name, extension `.txt`).
    pub fn export(&self, path: &Path) -> Result<()> {
        snapshot::write(path, &self.phi1, 0.0)?;
        std::fs::write(path.with_extension("txt"), format!("{}\n", self.sidecar()))?;
        Ok(())
    }
}

/// `lambda1=<f64> residual=<f64> iterations=<u32>`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sidecar {
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: u32,
}

impl fmt::Display for Sidecar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lambda1={:?} residual={:?} iterations={}",
            self.lambda1, self.residual, self.iterations
        )
    }
}

impl FromStr for Sidecar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad eigen sidecar: {s:?}"));
        let mut fields = s.split_whitespace();
        let mut take = |key: &str| -> Result<&str> {
            fields
                .next()
                .and_then(|f| f.strip_prefix(key))
                .and_then(|f| f.strip_prefix('='))
                .ok_or_else(bad)
        };
        let lambda1 = take("lambda1")?.parse().map_err(|_| bad())?;
        let residual = take("residual")?.parse().map_err(|_| bad())?;
        let iterations = take("iterations")?.parse().map_err(|_| bad())?;
        Ok(Self {
            lambda1,
            residual,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::PI;

    fn cell(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, &[n], &[1.0], false).unwrap()
    }

    #[test]
    fn constant_mu_gives_constant_eigenfunction() {
        for (c, alpha) in [(1.0, 0.25), (2.5, 0.6)] {
            let ord = FracOrder::new(alpha, 1).unwrap();
            let mu = ScalarField::constant(&cell(32), c);
            let e = principal_eigenpair(&mu, ord, 1e-12, 50).unwrap();
            assert!((e.lambda1 + c).abs() < 1e-10);
            assert!(e.phi1.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn rayleigh_of_constant() {
        let ord = FracOrder::new(0.3, 1).unwrap();
        let g = cell(16);
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(rayleigh_quotient(&one, &one, ord).unwrap(), -1.0);
        assert!(rayleigh_quotient(&ScalarField::zeros(&g), &one, ord).is_err());
    }

    #[test]
    fn rejects_nonpositive_mu() {
        let ord = FracOrder::new(0.3, 1).unwrap();
        let mu = ScalarField::from_fn(&cell(16), |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(principal_eigenpair(&mu, ord, 1e-10, 10).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let s = Sidecar {
            lambda1: -1.234_567_890_123_456_7,
            residual: 3.2e-11,
            iterations: 17,
        };
        let text = s.to_string();
        assert!(text.starts_with("lambda1=-1.23456789012345"));
        assert_eq!(text.parse::<Sidecar>().unwrap(), s);
        assert!("lambda1=x residual=1 iterations=2".parse::<Sidecar>().is_err());
    }
}
