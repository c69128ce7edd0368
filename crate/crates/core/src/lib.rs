//! Normed-space geometry and numerical checks of the following extension
//! property: an isometry defined on a star-shaped open subset of
//! a finite-dimensional normed space, with open image, is the restriction of
//! a surjective real-linear isometry plus a translation.
//!
//! The crate is organised bottom-up:
//!
//! - [`spaces`]: vectors, norms, metrics, reflections and segments.
//! - [`domains`]: set models with membership oracles and sampled probes.
//! - [`maps`]: evaluable maps, isometry defects and affine fitting.
//! - [`midpoint`]: midpoint preservation and dyadic chains.
//! - [`extension`]: the radial extension pipeline and its defect report.
//! - [`fixtures`]: built-in positive fixtures and the two counterexamples.
//! - [`harness`]: run configuration, suites and JSON reports.

pub mod domains;
pub mod error;
pub mod extension;
pub mod fixtures;
pub mod harness;
pub mod maps;
pub mod midpoint;
pub mod sampling;
pub mod serde_util;
pub mod spaces;

pub use error::{GeomError, Result};
pub use spaces::{Matrix, NormedSpace, Vector};

use serde::{Deserialize, Serialize};

/// Absolute and relative tolerances for defect comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs: 1e-9,
            rel: 1e-9,
        }
    }
}

impl Tolerances {
    /// `|a - b| <= abs + rel * max(|a|, |b|)`.
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs + self.rel * a.abs().max(b.abs())
    }
}
