//! Finite-dimensional real normed spaces: norms, distances, point
//! reflections and segments.
//!
//! Every other module works with [`Vector`] values living in a
//! [`NormedSpace`]. Norms are plain data ([`Norm`]) so that spaces can be
//! written to and read from fixture files.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::serde_util;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// The norms shipped with the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Linf,
    /// `(sum |x_i|^p)^(1/p)` for a finite `p >= 1`.
    Lp {
        p: f64,
    },
    /// `max_i w_i |x_i|` with strictly positive weights.
    WeightedLinf {
        weights: Vec<f64>,
    },
    /// `max_i |<a_i, x>|` over a spanning family of functionals.
    Polyhedral {
        #[serde(with = "serde_util::vectors")]
        functionals: Vec<Vector>,
    },
}

impl Norm {
    /// Raw evaluation without dimension or finiteness checks.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Norm::L1 => x.iter().map(|v| v.abs()).sum(),
            Norm::L2 => {
                // scaled to avoid overflow for large entries
                let m = max_abs(x);
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
            }
            Norm::Linf => max_abs(x),
            Norm::Lp { p } => {
                let m = max_abs(x);
                if m == 0.0 {
                    return 0.0;
                }
                m * x
                    .iter()
                    .map(|v| (v.abs() / m).powf(*p))
                    .sum::<f64>()
                    .powf(1.0 / p)
            }
            Norm::WeightedLinf { weights } => x
                .iter()
                .zip(weights)
                .map(|(v, w)| w * v.abs())
                .fold(0.0, f64::max),
            Norm::Polyhedral { functionals } => functionals
                .iter()
                .map(|a| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>().abs())
                .fold(0.0, f64::max),
        }
    }

    /// Dual norm `sup { <y, x> : ||x|| <= 1 }`, when it has a closed form.
    ///
    /// The distance from `x` to the hyperplane `<a, z> = b` measured in this
    /// norm is `|b - <a, x>| / dual(a)`.
    pub fn dual(&self, y: &[f64]) -> Option<f64> {
        match self {
            Norm::L1 => Some(Norm::Linf.eval(y)),
            Norm::L2 => Some(Norm::L2.eval(y)),
            Norm::Linf => Some(Norm::L1.eval(y)),
            Norm::Lp { p } => {
                let q = p / (p - 1.0);
                if q.is_finite() {
                    Some(Norm::Lp { p: q }.eval(y))
                } else {
                    Some(Norm::Linf.eval(y))
                }
            }
            Norm::WeightedLinf { weights } => {
                Some(y.iter().zip(weights).map(|(v, w)| v.abs() / w).sum())
            }
            Norm::Polyhedral { .. } => None,
        }
    }

    pub fn short_name(&self) -> String {
        match self {
            Norm::L1 => "l1".into(),
            Norm::L2 => "l2".into(),
            Norm::Linf => "linf".into(),
            Norm::Lp { p } => format!("l{p}"),
            Norm::WeightedLinf { .. } => "wlinf".into(),
            Norm::Polyhedral { functionals } => format!("poly{}", functionals.len()),
        }
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// A coordinate space `R^dim` equipped with a norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct NormedSpace {
    dim: usize,
    norm: Norm,
    #[serde(default)]
    label: String,
}

#[derive(Deserialize)]
struct RawSpace {
    dim: usize,
    norm: Norm,
    #[serde(default)]
    label: String,
}

impl TryFrom<RawSpace> for NormedSpace {
    type Error = GeomError;

    fn try_from(raw: RawSpace) -> Result<Self> {
        if raw.label.is_empty() {
            NormedSpace::new(raw.dim, raw.norm)
        } else {
            NormedSpace::with_label(raw.dim, raw.norm, raw.label)
        }
    }
}

impl NormedSpace {
    pub fn new(dim: usize, norm: Norm) -> Result<Self> {
        let label = format!("{}^{}", norm.short_name(), dim);
        Self::with_label(dim, norm, label)
    }

    pub fn with_label(dim: usize, norm: Norm, label: impl Into<String>) -> Result<Self> {
        let space = NormedSpace {
            dim,
            norm,
            label: label.into(),
        };
        space.validate()?;
        Ok(space)
    }

    pub fn l1(dim: usize) -> Self {
        Self::new(dim, Norm::L1).expect("dimension must be positive")
    }

    pub fn l2(dim: usize) -> Self {
        Self::new(dim, Norm::L2).expect("dimension must be positive")
    }

    pub fn linf(dim: usize) -> Self {
        Self::new(dim, Norm::Linf).expect("dimension must be positive")
    }

    /// Checks the norm parameters. Called by constructors and after
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(GeomError::Invalid(
                "space dimension must be positive".into(),
            ));
        }
        match &self.norm {
            Norm::Lp { p } if !(p.is_finite() && *p >= 1.0) => Err(GeomError::OutOfRange {
                name: "p",
                value: *p,
            }),
            Norm::WeightedLinf { weights } => {
                if weights.len() != self.dim {
                    return Err(GeomError::DimensionMismatch {
                        expected: self.dim,
                        got: weights.len(),
                    });
                }
                match weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    Some(w) => Err(GeomError::OutOfRange {
                        name: "weight",
                        value: *w,
                    }),
                    None => Ok(()),
                }
            }
            Norm::Polyhedral { functionals } => {
                if let Some(a) = functionals.iter().find(|a| a.len() != self.dim) {
                    return Err(GeomError::DimensionMismatch {
                        expected: self.dim,
                        got: a.len(),
                    });
                }
                // positive definiteness needs the functionals to span the dual space
                let m = DMatrix::from_fn(functionals.len(), self.dim, |i, j| functionals[i][j]);
                if functionals.len() < self.dim || m.rank(1e-10) < self.dim {
                    return Err(GeomError::Invalid(
                        "polyhedral functionals do not span the space".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Equal dimension and norm, ignoring labels.
    pub fn same_geometry(&self, other: &NormedSpace) -> bool {
        self.dim == other.dim && self.norm == other.norm
    }

    pub fn norm_kind(&self) -> &Norm {
        &self.norm
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        check_finite(x)
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        self.check(x)?;
        Ok(self.norm.eval(x.as_slice()))
    }

    pub fn distance(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.norm.eval((x - y).as_slice()))
    }

    /// Unchecked norm for inner loops where inputs were already validated.
    pub(crate) fn norm_of(&self, x: &Vector) -> f64 {
        self.norm.eval(x.as_slice())
    }

    pub(crate) fn dist_of(&self, x: &Vector, y: &Vector) -> f64 {
        self.norm.eval((x - y).as_slice())
    }

    pub fn dual_norm(&self, y: &Vector) -> Option<f64> {
        self.norm.dual(y.as_slice())
    }

    pub fn zero(&self) -> Vector {
        Vector::zeros(self.dim)
    }
}

pub(crate) fn check_finite(x: &Vector) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(GeomError::NonFinite { index }),
        None => Ok(()),
    }
}

fn same_dim(a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(GeomError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// A distance function on a vector space.
///
/// Norm-induced metrics come from [`NormedSpace`]; anything else can be
/// supplied through [`FnMetric`].
pub trait Metric {
    fn dist(&self, a: &Vector, b: &Vector) -> Result<f64>;

    /// Whether `d(a + u, b + u) = d(a, b)` holds for all `a, b, u`.
    fn translation_invariant(&self) -> bool;
}

impl Metric for NormedSpace {
    fn dist(&self, a: &Vector, b: &Vector) -> Result<f64> {
        self.distance(a, b)
    }

    fn translation_invariant(&self) -> bool {
        true
    }
}

/// A metric given by a closure.
pub struct FnMetric<F> {
    eval: F,
    translation_invariant: bool,
}

impl<F> FnMetric<F>
where
    F: Fn(&Vector, &Vector) -> f64,
{
    pub fn new(eval: F, translation_invariant: bool) -> Self {
        FnMetric {
            eval,
            translation_invariant,
        }
    }
}

impl<F> Metric for FnMetric<F>
where
    F: Fn(&Vector, &Vector) -> f64,
{
    fn dist(&self, a: &Vector, b: &Vector) -> Result<f64> {
        same_dim(a, b)?;
        Ok((self.eval)(a, b))
    }

    fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }
}

/// Point reflection through `c`: `z -> 2c - z`.
pub fn reflect(c: &Vector, z: &Vector) -> Result<Vector> {
    same_dim(c, z)?;
    Ok(c * 2.0 - z)
}

/// The point `t a + (1 - t) b` of the segment `[a, b]`.
pub fn segment_point(a: &Vector, b: &Vector, t: f64) -> Result<Vector> {
    same_dim(a, b)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(GeomError::OutOfRange {
            name: "t",
            value: t,
        });
    }
    Ok(lerp(a, b, t))
}

/// `t a + (1 - t) b` without range checks. Exact at `t = 0` and `t = 1`.
pub(crate) fn lerp(a: &Vector, b: &Vector, t: f64) -> Vector {
    if t == 1.0 {
        return a.clone();
    }
    if t == 0.0 {
        return b.clone();
    }
    a * t + b * (1.0 - t)
}

/// The closed segment `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "serde_util::vector")]
    pub a: Vector,
    #[serde(with = "serde_util::vector")]
    pub b: Vector,
}

impl Segment {
    pub fn new(a: Vector, b: Vector) -> Result<Self> {
        same_dim(&a, &b)?;
        Ok(Segment { a, b })
    }

    pub fn point(&self, t: f64) -> Result<Vector> {
        segment_point(&self.a, &self.b, t)
    }

    pub fn midpoint(&self) -> Vector {
        (&self.a + &self.b) * 0.5
    }

    /// Euclidean distance from `x` to the segment.
    pub(crate) fn euclidean_gap(&self, x: &Vector) -> f64 {
        let d = &self.b - &self.a;
        let dd = d.dot(&d);
        let s = if dd == 0.0 {
            0.0
        } else {
            ((x - &self.a).dot(&d) / dd).clamp(0.0, 1.0)
        };
        (x - (&self.a + d * s)).norm()
    }
}
