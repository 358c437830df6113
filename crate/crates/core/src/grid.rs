// SPDX-License-Identifier: MIT OR Apache-2.0
//! Uniform lattices on a d-dimensional torus and real fields living on them.
//!
//! The same [`PeriodicGrid`] type serves two roles: the periodicity cell of the
//! medium (`origin_centered = false`, coordinates start at 0) and a large box
//! standing in for R^d (`origin_centered = true`, x = 0 is a lattice point).
//! Storage is row-major with the last axis fastest.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform periodic lattice with physical box lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    n: Vec<usize>,
    lengths: Vec<f64>,
    origin_centered: bool,
    strides: Vec<usize>,
}

impl PeriodicGrid {
    pub fn new(d: usize, n: &[usize], lengths: &[f64], origin_centered: bool) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n.len() != d || lengths.len() != d {
            return Err(Error::InvalidGrid(format!(
                "expected {d} axis sizes and lengths, got {} and {}",
                n.len(),
                lengths.len()
            )));
        }
        for (&ni, &li) in n.iter().zip(lengths) {
            if ni < 8 || !ni.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "axis size {ni} must be a power of two >= 8"
                )));
            }
            if !(li.is_finite() && li > 0.0) {
                return Err(Error::InvalidGrid(format!("axis length {li} must be positive")));
            }
            let h = li / ni as f64;
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidGrid(format!("degenerate spacing {h}")));
            }
        }
        let mut strides = vec![1; d];
        for axis in (0..d.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * n[axis + 1];
        }
        Ok(Self {
            n: n.to_vec(),
            lengths: lengths.to_vec(),
            origin_centered,
            strides,
        })
    }

    /// Same size and length along every axis.
    pub fn cube(d: usize, n: usize, length: f64, origin_centered: bool) -> Result<Self> {
        Self::new(d, &vec![n; d], &vec![length; d], origin_centered)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn is_centered(&self) -> bool {
        self.origin_centered
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of one lattice cell, the quadrature weight of every point.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Index shift that maps lattice index 0 to the first coordinate.
    fn offset(&self, axis: usize) -> isize {
        if self.origin_centered {
            (self.n[axis] / 2) as isize
        } else {
            0
        }
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        (j as isize - self.offset(axis)) as f64 * self.spacing(axis)
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|j| self.coord(axis, j)).collect()
    }

    /// Signed alias of Fourier index `m`: `m` below n/2, `m - n` from n/2 on.
    pub fn signed_mode(&self, axis: usize, m: usize) -> isize {
        let n = self.n[axis];
        if m < n / 2 {
            m as isize
        } else {
            m as isize - n as isize
        }
    }

    pub fn wavenumber(&self, axis: usize, m: usize) -> f64 {
        2.0 * PI * self.signed_mode(axis, m) as f64 / self.lengths[axis]
    }

    pub fn axis_wavenumbers(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|m| self.wavenumber(axis, m)).collect()
    }

    /// |k|^2 for every flat Fourier index, in storage order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_wavenumbers(a)).collect();
        let mut out = vec![0.0; self.len()];
        let mut idx = [0usize; MAX_DIM];
        for (flat, v) in out.iter_mut().enumerate() {
            self.unravel_into(flat, &mut idx);
            *v = (0..self.dim()).map(|a| per_axis[a][idx[a]].powi(2)).sum();
        }
        out
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    pub fn unravel_into(&self, mut flat: usize, index: &mut [usize]) {
        for axis in 0..self.dim() {
            index[axis] = flat / self.strides[axis];
            flat %= self.strides[axis];
        }
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        self.unravel_into(flat, &mut idx);
        idx
    }

    /// Physical coordinates of a flat index; unused trailing slots are zero.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        self.unravel_into(flat, &mut idx);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            x[axis] = self.coord(axis, idx[axis]);
        }
        x
    }

    /// Flat index of x = 0 on a centered grid.
    pub fn origin_index(&self) -> Option<usize> {
        if !self.origin_centered {
            return None;
        }
        let idx: Vec<usize> = self.n.iter().map(|&n| n / 2).collect();
        Some(self.ravel(&idx))
    }

    /// Euclidean |x| of a lattice point of a centered grid.
    pub fn radial_distance(&self, index: &[usize]) -> Result<f64> {
        if !self.origin_centered {
            return Err(Error::InvalidGrid(
                "radial distance needs an origin-centered grid".into(),
            ));
        }
        if index.len() != self.dim() || index.iter().zip(&self.n).any(|(&i, &n)| i >= n) {
            return Err(Error::InvalidArgument(format!("index {index:?} out of range")));
        }
        Ok(index
            .iter()
            .enumerate()
            .map(|(a, &j)| self.coord(a, j).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Half of the shortest box length; the radius of the largest ball inside the box.
    pub fn half_width(&self) -> f64 {
        0.5 * self.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Real values on a [`PeriodicGrid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field data"));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &PeriodicGrid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let data = (0..grid.len())
            .map(|flat| f(&grid.point(flat)[..d]))
            .collect();
        Self::new(grid.clone(), data)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann-sum integral over the box.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Grid inner product sum f g h^d.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.grid.ravel(index)]
    }
}
