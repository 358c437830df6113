// SPDX-License-Identifier: MIT OR Apache-2.0
//! Fractional Fisher-KPP propagation in periodic media.
//!
//! Simulates `u_t + (−Δ)^α u = μ(x) u − u²` on large periodic boxes and checks
//! that level sets spread like `exp(|λ1| t / (d + 2α))` in every direction,
//! trapped between explicit algebraic sub- and supersolutions.

pub mod attractor;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod eigen;
pub mod error;
pub mod fracop;
pub mod fronts;
pub mod grid;
pub mod interp;
pub mod output;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use fracop::FracOrder;
pub use grid::{PeriodicGrid, ScalarField};
