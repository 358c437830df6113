// SPDX-License-Identifier: MIT OR Apache-2.0
//! Multi-dimensional FFTs on a [`PeriodicGrid`] and real Fourier multipliers.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};

/// Imaginary residue tolerated after an inverse transform, relative to the
/// largest output magnitude.
pub const IMAG_TOL: f64 = 1e-12;

/// Forward/inverse transforms for one grid, planned once.
pub struct Fourier {
    grid: PeriodicGrid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: &PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.shape().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.shape().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let shape = self.grid.shape();
        for (axis, plan) in plans.iter().enumerate() {
            let n = shape[axis];
            let inner = self.grid.strides()[axis];
            if inner == 1 {
                data.par_chunks_mut(n).for_each(|line| plan.process(line));
                continue;
            }
            // gather the strided lines of each outer block, transform, scatter back
            let block = n * inner;
            data.par_chunks_mut(block).for_each(|chunk| {
                let mut lines = vec![Complex64::default(); block];
                for k in 0..n {
                    for j in 0..inner {
                        lines[j * n + k] = chunk[k * inner + j];
                    }
                }
                plan.process(&mut lines);
                for k in 0..n {
                    for j in 0..inner {
                        chunk[k * inner + j] = lines[j * n + k];
                    }
                }
            });
        }
    }

    pub fn forward(&self, values: &[f64]) -> Result<Vec<Complex64>> {
        if values.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: values.len(),
            });
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        Ok(data)
    }

    /// Inverse transform with 1/N normalization; rejects outputs that are not real.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Result<Vec<f64>> {
        if spectrum.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: spectrum.len(),
            });
        }
        self.transform(&mut spectrum, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        let out: Vec<f64> = spectrum
            .iter()
            .map(|c| {
                max_re = max_re.max(c.re.abs());
                max_im = max_im.max(c.im.abs());
                c.re * scale
            })
            .collect();
        if max_im > IMAG_TOL * max_re.max(f64::MIN_POSITIVE) && max_im * scale > 1e-300 {
            return Err(Error::Numerical(format!(
                "inverse transform left imaginary residue {:.3e} (max real {:.3e})",
                max_im * scale,
                max_re * scale
            )));
        }
        Ok(out)
    }

    /// Multiplies the spectrum of `f` by a real symbol given per flat Fourier index.
    pub fn apply_symbol(&self, f: &ScalarField, symbol: &[f64]) -> Result<ScalarField> {
        if f.grid() != &self.grid {
            return Err(Error::InvalidArgument("field grid differs from transform grid".into()));
        }
        if symbol.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                got: symbol.len(),
            });
        }
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multiplier input"));
        }
        let mut spec = self.forward(f.values())?;
        spec.par_iter_mut().zip(symbol.par_iter()).for_each(|(c, &s)| *c *= s);
        ScalarField::new(self.grid.clone(), self.inverse(spec)?)
    }
}
