// SPDX-License-Identifier: MIT OR Apache-2.0
//! Trigonometric interpolation of periodic cell fields.
//!
//! A field sampled on the periodicity cell is band-limited by construction, so
//! its trigonometric interpolant reproduces it exactly at the samples and
//! extends it periodically to every point of R^d. This is how μ and φ1 are
//! tiled onto the large propagation boxes and evaluated at rescaled points.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::spectral::Fourier;

#[derive(Debug, Clone)]
pub struct PeriodicInterpolant {
    cell: PeriodicGrid,
    /// Fourier coefficients divided by N, storage order of `cell`.
    coeffs: Vec<Complex64>,
    /// Wavenumbers per axis.
    k: Vec<Vec<f64>>,
}

impl PeriodicInterpolant {
    pub fn new(field: &ScalarField) -> Result<Self> {
        let cell = field.grid().clone();
        if cell.is_centered() {
            return Err(Error::InvalidGrid(
                "cell fields must live on a non-centered grid".into(),
            ));
        }
        let scale = 1.0 / cell.len() as f64;
        let coeffs = Fourier::new(&cell)
            .forward(field.values())?
            .into_iter()
            .map(|c| c * scale)
            .collect();
        let k = (0..cell.dim()).map(|a| cell.axis_wavenumbers(a)).collect();
        Ok(Self { cell, coeffs, k })
    }

    pub fn cell(&self) -> &PeriodicGrid {
        &self.cell
    }

    /// Zero Fourier mode, the cell average.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Interpolant of the partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = self.clone();
        let mut idx = [0usize; crate::grid::MAX_DIM];
        for (flat, c) in out.coeffs.iter_mut().enumerate() {
            self.cell.unravel_into(flat, &mut idx);
            let m = idx[axis];
            // the Nyquist mode has no real derivative
            let k = if 2 * m == self.cell.shape()[axis] { 0.0 } else { self.k[axis][m] };
            *c *= Complex64::new(0.0, k);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.cell.dim();
        let mut idx = [0usize; crate::grid::MAX_DIM];
        let mut acc = 0.0;
        for (flat, c) in self.coeffs.iter().enumerate() {
            self.cell.unravel_into(flat, &mut idx);
            let phase: f64 = (0..d).map(|a| self.k[a][idx[a]] * x[a]).sum();
            acc += c.re * phase.cos() - c.im * phase.sin();
        }
        acc
    }

    /// Values at the tensor-product points `coords[0] x coords[1] x ...`,
    /// row-major, via one axis contraction at a time.
    pub fn eval_tensor(&self, coords: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.cell.dim();
        if coords.len() != d {
            return Err(Error::InvalidArgument(format!(
                "expected {d} coordinate axes, got {}",
                coords.len()
            )));
        }
        let mut shape: Vec<usize> = self.cell.shape().to_vec();
        let mut data = self.coeffs.clone();
        for axis in 0..d {
            let n = shape[axis];
            let m = coords[axis].len();
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let phases: Vec<Complex64> = coords[axis]
                .iter()
                .flat_map(|&x| self.k[axis].iter().map(move |&k| Complex64::from_polar(1.0, k * x)))
                .collect();
            let mut next = vec![Complex64::default(); outer * m * inner];
            for o in 0..outer {
                for i in 0..m {
                    let row = &phases[i * n..(i + 1) * n];
                    let dst = &mut next[(o * m + i) * inner..(o * m + i + 1) * inner];
                    for (kk, ph) in row.iter().enumerate() {
                        let src = &data[(o * n + kk) * inner..(o * n + kk + 1) * inner];
                        for (dv, sv) in dst.iter_mut().zip(src) {
                            *dv += ph * sv;
                        }
                    }
                }
            }
            data = next;
            shape[axis] = m;
        }
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Samples the periodic extension at `scale * x` for every point x of `grid`.
    pub fn sample_on(&self, grid: &PeriodicGrid, scale: f64) -> Result<ScalarField> {
        if grid.dim() != self.cell.dim() {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let coords: Vec<Vec<f64>> = (0..grid.dim())
            .map(|a| grid.axis_coords(a).into_iter().map(|x| x * scale).collect())
            .collect();
        ScalarField::new(grid.clone(), self.eval_tensor(&coords)?)
    }
}
