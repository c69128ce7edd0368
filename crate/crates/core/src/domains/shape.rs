//! Concrete set descriptions backing [`Domain`](super::Domain) membership.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::sampling::{self, SeededRng};
use crate::serde_util;
use crate::spaces::{lerp, Matrix, Norm, NormedSpace, Segment, Vector};

/// Slack granted to closed sets so that points computed on the boundary
/// are not rejected by rounding.
pub(crate) const CLOSED_SLACK: f64 = 1e-12;

const MAX_REJECTION_ATTEMPTS: usize = 100_000;

/// Geometric description of a subset of `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// `{x : ||x - center|| < radius}` (or `<=` when closed), in the space norm.
    Ball {
        #[serde(with = "serde_util::vector")]
        center: Vector,
        radius: f64,
        #[serde(default)]
        closed: bool,
    },
    /// `{x : <normal_i, x> < offset_i for all i}` (or `<=` when closed),
    /// contained in the coordinate box `[lower, upper]`.
    Polytope {
        #[serde(with = "serde_util::vectors")]
        normals: Vec<Vector>,
        offsets: Vec<f64>,
        #[serde(default)]
        closed: bool,
        #[serde(with = "serde_util::vector")]
        lower: Vector,
        #[serde(with = "serde_util::vector")]
        upper: Vector,
    },
    /// The closed segment `[a, b]`.
    Segment(Segment),
    Union {
        parts: Vec<Shape>,
    },
    /// `{x : x + offset in inner}`.
    Translated {
        inner: Box<Shape>,
        #[serde(with = "serde_util::vector")]
        offset: Vector,
    },
    /// `{A y + u : y in inner}` for invertible `A`.
    AffineImage {
        inner: Box<Shape>,
        #[serde(with = "serde_util::matrix")]
        matrix: Matrix,
        #[serde(with = "serde_util::vector")]
        translation: Vector,
    },
    /// `union of [apex, y] over y in base`, minus the apex.
    Cone {
        #[serde(with = "serde_util::vector")]
        apex: Vector,
        base: Box<Shape>,
    },
}

/// How a point was found to belong (or not) to a cone without apex.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeMembership {
    Apex,
    /// `y = apex + s (x - apex)` lies in the base with `s >= 1`.
    Witness {
        s: f64,
        y: Vector,
    },
    /// No `s` in `[1, s_max]` was found. `grid` is true when the search was
    /// a sampled grid, in which case the cutoff may have been binding.
    NoWitness {
        s_max: f64,
        grid: bool,
    },
}

impl Shape {
    pub fn open_ball(center: Vector, radius: f64) -> Shape {
        Shape::Ball {
            center,
            radius,
            closed: false,
        }
    }

    pub fn closed_ball(center: Vector, radius: f64) -> Shape {
        Shape::Ball {
            center,
            radius,
            closed: true,
        }
    }

    /// Axis-aligned box `prod (lower_i, upper_i)`.
    pub fn axis_box(lower: Vector, upper: Vector, closed: bool) -> Shape {
        let dim = lower.len();
        let mut normals = Vec::with_capacity(2 * dim);
        let mut offsets = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = Vector::zeros(dim);
            e[i] = 1.0;
            normals.push(e.clone());
            offsets.push(upper[i]);
            normals.push(-e);
            offsets.push(-lower[i]);
        }
        Shape::Polytope {
            normals,
            offsets,
            closed,
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } => center.len(),
            Shape::Polytope { lower, .. } => lower.len(),
            Shape::Segment(s) => s.a.len(),
            Shape::Union { parts } => parts.first().map_or(0, Shape::dim),
            Shape::Translated { offset, .. } => offset.len(),
            Shape::AffineImage { translation, .. } => translation.len(),
            Shape::Cone { apex, .. } => apex.len(),
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        let want = |n: usize| -> Result<()> {
            if n != dim {
                Err(GeomError::DimensionMismatch {
                    expected: dim,
                    got: n,
                })
            } else {
                Ok(())
            }
        };
        match self {
            Shape::Ball { center, radius, .. } => {
                want(center.len())?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeomError::OutOfRange {
                        name: "radius",
                        value: *radius,
                    });
                }
            }
            Shape::Polytope {
                normals,
                offsets,
                lower,
                upper,
                ..
            } => {
                want(lower.len())?;
                want(upper.len())?;
                if normals.len() != offsets.len() {
                    return Err(GeomError::Invalid(
                        "polytope needs one offset per normal".into(),
                    ));
                }
                for n in normals {
                    want(n.len())?;
                }
                if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
                    return Err(GeomError::Invalid("polytope box has lower > upper".into()));
                }
            }
            Shape::Segment(s) => {
                want(s.a.len())?;
                want(s.b.len())?;
            }
            Shape::Union { parts } => {
                if parts.is_empty() {
                    return Err(GeomError::Invalid("empty union".into()));
                }
                for p in parts {
                    p.validate(dim)?;
                }
            }
            Shape::Translated { inner, offset } => {
                want(offset.len())?;
                inner.validate(dim)?;
            }
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => {
                want(translation.len())?;
                want(matrix.nrows())?;
                want(matrix.ncols())?;
                if matrix.clone().lu().determinant().abs() < 1e-12 {
                    return Err(GeomError::Singular);
                }
                inner.validate(dim)?;
            }
            Shape::Cone { apex, base } => {
                want(apex.len())?;
                base.validate(dim)?;
            }
        }
        Ok(())
    }

    pub fn contains(&self, space: &NormedSpace, x: &Vector) -> bool {
        match self {
            Shape::Ball {
                center,
                radius,
                closed,
            } => {
                let d = space.dist_of(x, center);
                if *closed {
                    d <= radius + CLOSED_SLACK * radius.max(1.0)
                } else {
                    d < *radius
                }
            }
            Shape::Polytope {
                normals,
                offsets,
                closed,
                ..
            } => normals.iter().zip(offsets).all(|(n, b)| {
                let v = n.dot(x);
                if *closed {
                    v <= b + CLOSED_SLACK * b.abs().max(1.0)
                } else {
                    v < *b
                }
            }),
            Shape::Segment(s) => {
                let scale = s.a.amax().max(s.b.amax()).max(1.0);
                s.euclidean_gap(x) <= CLOSED_SLACK * scale
            }
            Shape::Union { parts } => parts.iter().any(|p| p.contains(space, x)),
            Shape::Translated { inner, offset } => inner.contains(space, &(x + offset)),
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => match matrix.clone().lu().solve(&(x - translation)) {
                Some(y) => inner.contains(space, &y),
                None => false,
            },
            Shape::Cone { .. } => matches!(
                self.cone_membership(space, x),
                Some(ConeMembership::Witness { .. })
            ),
        }
    }

    /// Membership details for cone shapes; `None` for other shapes.
    pub fn cone_membership(&self, space: &NormedSpace, x: &Vector) -> Option<ConeMembership> {
        let Shape::Cone { apex, base } = self else {
            return None;
        };
        let dir = x - apex;
        let dist = space.norm_of(&dir);
        if dist == 0.0 {
            return Some(ConeMembership::Apex);
        }
        if let Shape::Ball {
            center,
            radius,
            closed: false,
        } = base.as_ref()
        {
            let offset = apex - center;
            let phi = |s: f64| space.norm_of(&(&offset + &dir * s));
            let s = match space.norm_kind() {
                Norm::L2 => (-offset.dot(&dir) / dir.dot(&dir)).max(1.0),
                _ => {
                    // phi is convex; beyond s_hi it exceeds the radius
                    let s_hi = 1.0 + 2.0 * (space.norm_of(&offset) + radius) / dist;
                    golden_section_min(phi, 1.0, s_hi)
                }
            };
            return Some(if phi(s) < *radius {
                ConeMembership::Witness {
                    s,
                    y: apex + &dir * s,
                }
            } else {
                ConeMembership::NoWitness {
                    s_max: s,
                    grid: false,
                }
            });
        }
        let reach = base.bounding_radius(space) + space.norm_of(apex);
        let s_max = (4.0 * reach / dist).max(1.0);
        const GRID: usize = 256;
        for k in 0..GRID {
            let s = s_max.powf(k as f64 / (GRID - 1) as f64);
            let y = apex + &dir * s;
            if base.contains(space, &y) {
                return Some(ConeMembership::Witness { s, y });
            }
        }
        Some(ConeMembership::NoWitness { s_max, grid: true })
    }

    /// A lower bound on the distance from `x` to the complement, when one is
    /// available in closed form. Exact for balls, and for polytopes under
    /// norms with a closed-form dual.
    pub fn analytic_inradius(&self, space: &NormedSpace, x: &Vector) -> Option<f64> {
        match self {
            Shape::Ball { center, radius, .. } => {
                Some((radius - space.dist_of(x, center)).max(0.0))
            }
            Shape::Polytope {
                normals, offsets, ..
            } => {
                let mut best = f64::INFINITY;
                for (n, b) in normals.iter().zip(offsets) {
                    let dual = space.dual_norm(n)?;
                    if dual == 0.0 {
                        continue;
                    }
                    best = best.min((b - n.dot(x)) / dual);
                }
                Some(best.max(0.0))
            }
            Shape::Segment(_) if space.dim() >= 2 => Some(0.0),
            Shape::Segment(_) => None,
            Shape::Union { parts } => parts
                .iter()
                .filter(|p| p.contains(space, x))
                .filter_map(|p| p.analytic_inradius(space, x))
                .reduce(f64::max)
                .or(if self.contains(space, x) {
                    None
                } else {
                    Some(0.0)
                }),
            Shape::Translated { inner, offset } => inner.analytic_inradius(space, &(x + offset)),
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } if is_linear_isometry(space, matrix) => {
                let y = matrix.clone().lu().solve(&(x - translation))?;
                inner.analytic_inradius(space, &y)
            }
            Shape::AffineImage { .. } | Shape::Cone { .. } => None,
        }
    }

    /// Coordinate box `[lo, hi]` containing the shape.
    pub fn coord_box(&self, space: &NormedSpace) -> (Vector, Vector) {
        match self {
            Shape::Ball { center, radius, .. } => {
                let ext = coord_extent(space) * *radius;
                (center - &ext, center + &ext)
            }
            Shape::Polytope { lower, upper, .. } => (lower.clone(), upper.clone()),
            Shape::Segment(s) => (s.a.inf(&s.b), s.a.sup(&s.b)),
            Shape::Union { parts } => parts
                .iter()
                .map(|p| p.coord_box(space))
                .reduce(|(l1, u1), (l2, u2)| (l1.inf(&l2), u1.sup(&u2)))
                .expect("validated union is non-empty"),
            Shape::Translated { inner, offset } => {
                let (l, u) = inner.coord_box(space);
                (l - offset, u - offset)
            }
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => {
                let (l, u) = inner.coord_box(space);
                let mid = (&l + &u) * 0.5;
                let half = (&u - &l) * 0.5;
                let c = matrix * mid + translation;
                let h = matrix.abs() * half;
                (&c - &h, &c + &h)
            }
            Shape::Cone { apex, base } => {
                let (l, u) = base.coord_box(space);
                (l.inf(apex), u.sup(apex))
            }
        }
    }

    /// Radius `R` with the shape inside the closed ball `B_R(0)`.
    pub fn bounding_radius(&self, space: &NormedSpace) -> f64 {
        match self {
            Shape::Ball { center, radius, .. } => space.norm_of(center) + radius,
            Shape::Segment(s) => space.norm_of(&s.a).max(space.norm_of(&s.b)),
            Shape::Union { parts } => parts
                .iter()
                .map(|p| p.bounding_radius(space))
                .fold(0.0, f64::max),
            Shape::Translated { inner, offset } => {
                inner.bounding_radius(space) + space.norm_of(offset)
            }
            _ => {
                let (l, u) = self.coord_box(space);
                box_norm_bound(space, &l, &u)
            }
        }
    }

    /// Draws a point of the shape.
    pub fn sample(&self, space: &NormedSpace, rng: &mut SeededRng) -> Result<Vector> {
        match self {
            Shape::Ball {
                center,
                radius,
                closed,
            } => Ok(if *closed {
                sampling::point_in_closed_ball(rng, space, center, *radius)
            } else {
                sampling::point_in_ball(rng, space, center, *radius)
            }),
            Shape::Polytope { lower, upper, .. } => {
                for _ in 0..MAX_REJECTION_ATTEMPTS {
                    let x = Vector::from_fn(lower.len(), |i, _| {
                        if lower[i] == upper[i] {
                            lower[i]
                        } else {
                            rng.random_range(lower[i]..upper[i])
                        }
                    });
                    if self.contains(space, &x) {
                        return Ok(x);
                    }
                }
                Err(GeomError::Sampling {
                    attempts: MAX_REJECTION_ATTEMPTS,
                    reason: "polytope rejection sampling found no member".into(),
                })
            }
            Shape::Segment(s) => Ok(lerp(&s.a, &s.b, rng.random::<f64>())),
            Shape::Union { parts } => {
                let i = rng.random_range(0..parts.len());
                parts[i].sample(space, rng)
            }
            Shape::Translated { inner, offset } => Ok(inner.sample(space, rng)? - offset),
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => Ok(matrix * inner.sample(space, rng)? + translation),
            Shape::Cone { apex, base } => {
                for _ in 0..MAX_REJECTION_ATTEMPTS {
                    let y = base.sample(space, rng)?;
                    let t: f64 = rng.random();
                    let x = lerp(apex, &y, t);
                    if x != *apex {
                        return Ok(x);
                    }
                }
                Err(GeomError::Sampling {
                    attempts: MAX_REJECTION_ATTEMPTS,
                    reason: "cone samples collapsed onto the apex".into(),
                })
            }
        }
    }

    /// Draws a point on the boundary of a convex body.
    pub fn sample_boundary(&self, space: &NormedSpace, rng: &mut SeededRng) -> Result<Vector> {
        match self {
            Shape::Ball { center, radius, .. } => {
                Ok(center + sampling::unit_direction(rng, space) * *radius)
            }
            Shape::Polytope {
                normals, offsets, ..
            } => {
                let x = self.sample(space, rng)?;
                let d = sampling::gaussian(rng, x.len());
                let mut t = f64::INFINITY;
                for (n, b) in normals.iter().zip(offsets) {
                    let nd = n.dot(&d);
                    if nd > 0.0 {
                        t = t.min((b - n.dot(&x)) / nd);
                    }
                }
                if !t.is_finite() {
                    return Err(GeomError::Invalid("polytope is unbounded".into()));
                }
                Ok(x + d * t)
            }
            Shape::Translated { inner, offset } => Ok(inner.sample_boundary(space, rng)? - offset),
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => Ok(matrix * inner.sample_boundary(space, rng)? + translation),
            _ => Err(GeomError::Invalid(
                "boundary sampling is only available for balls and polytopes".into(),
            )),
        }
    }

    /// The interior of the shape, when it can be described exactly.
    pub fn interior(&self) -> Result<Shape> {
        Ok(match self {
            Shape::Ball { center, radius, .. } => Shape::open_ball(center.clone(), *radius),
            Shape::Polytope {
                normals,
                offsets,
                lower,
                upper,
                ..
            } => Shape::Polytope {
                normals: normals.clone(),
                offsets: offsets.clone(),
                closed: false,
                lower: lower.clone(),
                upper: upper.clone(),
            },
            Shape::Translated { inner, offset } => Shape::Translated {
                inner: Box::new(inner.interior()?),
                offset: offset.clone(),
            },
            Shape::AffineImage {
                inner,
                matrix,
                translation,
            } => Shape::AffineImage {
                inner: Box::new(inner.interior()?),
                matrix: matrix.clone(),
                translation: translation.clone(),
            },
            Shape::Cone { .. } => self.clone(),
            Shape::Segment(_) | Shape::Union { .. } => {
                return Err(GeomError::Invalid(
                    "interior is not representable for this shape".into(),
                ))
            }
        })
    }
}

/// Per-coordinate bound `max |z_i|` over the unit ball of the norm.
/// Whether `m` is a linear isometry of `space` that can be recognised
/// exactly: signed permutations under the 1- and max-norms, orthogonal
/// matrices under the Euclidean norm.
fn is_linear_isometry(space: &NormedSpace, m: &Matrix) -> bool {
    if !m.is_square() || m.nrows() != space.dim() {
        return false;
    }
    match space.norm_kind() {
        Norm::L1 | Norm::Linf => {
            let unit = |line: Vec<f64>| {
                let nonzero: Vec<f64> = line.into_iter().filter(|v| *v != 0.0).collect();
                nonzero.len() == 1 && nonzero[0].abs() == 1.0
            };
            m.row_iter().all(|r| unit(r.iter().copied().collect()))
                && m.column_iter().all(|c| unit(c.iter().copied().collect()))
        }
        Norm::L2 => {
            let n = m.nrows();
            (m.transpose() * m - Matrix::identity(n, n)).amax() <= 1e-12
        }
        _ => false,
    }
}

fn coord_extent(space: &NormedSpace) -> Vector {
    let dim = space.dim();
    match space.norm_kind() {
        Norm::WeightedLinf { weights } => Vector::from_fn(dim, |i, _| 1.0 / weights[i]),
        Norm::Polyhedral { functionals } => {
            // pick a basis M among the functionals: ||z|| <= 1 implies
            // |Mz|_inf <= 1, hence |z_i| <= sum_j |M^-1_ij|
            let mut rows: Vec<&Vector> = Vec::new();
            for a in functionals {
                let mut trial = rows.clone();
                trial.push(a);
                let m = Matrix::from_fn(trial.len(), dim, |i, j| trial[i][j]);
                if m.rank(1e-10) == trial.len() {
                    rows = trial;
                }
                if rows.len() == dim {
                    break;
                }
            }
            let m = Matrix::from_fn(dim, dim, |i, j| rows[i][j]);
            let inv = m
                .try_inverse()
                .expect("validated functionals span the space");
            Vector::from_fn(dim, |i, _| inv.row(i).iter().map(|v| v.abs()).sum())
        }
        _ => Vector::from_element(dim, 1.0),
    }
}

/// Maximum of the norm over a coordinate box; attained at a corner.
fn box_norm_bound(space: &NormedSpace, lo: &Vector, hi: &Vector) -> f64 {
    let dim = lo.len();
    if dim <= 12 {
        (0..1usize << dim)
            .map(|mask| {
                let corner =
                    Vector::from_fn(dim, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] });
                space.norm_of(&corner)
            })
            .fold(0.0, f64::max)
    } else {
        (0..dim)
            .map(|i| {
                let mut e = Vector::zeros(dim);
                e[i] = lo[i].abs().max(hi[i].abs());
                space.norm_of(&e)
            })
            .sum()
    }
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let start = a;
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d);
        }
    }
    // the left endpoint is often the minimizer
    let best = if fc <= fd { c } else { d };
    if f(start) <= f(best) {
        start
    } else {
        best
    }
}
