//! Least-squares affine fitting: the numerical witness for whether sampled
//! map data is affine.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::serde_util;
use crate::spaces::{Matrix, NormedSpace, Vector};

/// Relative singular-value cutoff below which a source direction counts as
/// unexplored.
const RANK_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineFit {
    #[serde(with = "serde_util::matrix")]
    pub matrix: Matrix,
    #[serde(with = "serde_util::vector")]
    pub translation: Vector,
    /// `max ||A x + u - y||` over the samples, in the target norm.
    pub residual: f64,
    /// Sample attaining the residual.
    #[serde(with = "serde_util::option_vector")]
    pub worst: Option<Vector>,
}

impl AffineFit {
    /// Recomputes the residual on a sample set.
    pub fn residual_on(&self, samples: &[(Vector, Vector)], target: &NormedSpace) -> f64 {
        samples
            .iter()
            .map(|(x, y)| target.dist_of(&(&self.matrix * x + &self.translation), y))
            .fold(0.0, f64::max)
    }
}

/// Euclidean least-squares fit of `y ≈ A x + u`; the residual is reported
/// in the target norm.
pub fn affine_fit(samples: &[(Vector, Vector)], target: &NormedSpace) -> Result<AffineFit> {
    let Some((x0, y0)) = samples.first() else {
        return Err(GeomError::RankDeficient {
            directions: Vec::new(),
        });
    };
    let (n, m) = (x0.len(), y0.len());
    if m != target.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: target.dim(),
            got: m,
        });
    }
    for (x, y) in samples {
        if x.len() != n || y.len() != m {
            return Err(GeomError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
    }
    let count = samples.len() as f64;
    let x_mean = samples.iter().fold(Vector::zeros(n), |acc, (x, _)| acc + x) / count;
    let y_mean = samples.iter().fold(Vector::zeros(m), |acc, (_, y)| acc + y) / count;

    // centred design: rows are (x - x_mean)^T, targets (y - y_mean)^T
    // zero rows pad short designs so the SVD exposes all n directions
    let rows = samples.len().max(n);
    let design = Matrix::from_fn(rows, n, |i, j| {
        samples.get(i).map_or(0.0, |(x, _)| x[j] - x_mean[j])
    });
    let rhs = Matrix::from_fn(rows, m, |i, j| {
        samples.get(i).map_or(0.0, |(_, y)| y[j] - y_mean[j])
    });

    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut deficient = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= RANK_CUTOFF * s_max.max(f64::MIN_POSITIVE) {
            deficient.push(v_t.row(k).iter().copied().collect::<Vec<_>>());
        }
    }
    if !deficient.is_empty() {
        return Err(GeomError::RankDeficient {
            directions: deficient,
        });
    }
    let coeffs = svd
        .solve(&rhs, RANK_CUTOFF * s_max)
        .map_err(|e| GeomError::Invalid(e.to_string()))?;
    let matrix = coeffs.transpose();
    let translation = &y_mean - &matrix * &x_mean;

    let mut residual = 0.0;
    let mut worst = None;
    for (x, y) in samples {
        let r = target.dist_of(&(&matrix * x + &translation), y);
        if r > residual || worst.is_none() {
            residual = r;
            worst = Some(x.clone());
        }
    }
    Ok(AffineFit {
        matrix,
        translation,
        residual,
        worst,
    })
}
