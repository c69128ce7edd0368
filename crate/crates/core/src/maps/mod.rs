//! Evaluable maps between normed spaces.
//!
//! A [`MapModel`] is data: affine maps, piecewise maps guarded by domains,
//! registered closed-form rules, compositions, and the radial extension
//! built by the extension pipeline. Everything serializes to JSON.

mod counterexamples;
mod fit;

use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::error::{GeomError, Result};
use crate::sampling;
use crate::serde_util;
use crate::spaces::{Matrix, Metric, NormedSpace, Vector};

pub(crate) use counterexamples::closed_triangle;
pub use counterexamples::{build_example_star_closed, build_example_two_balls};
pub use fit::{affine_fit, AffineFit};

/// Number of probe points used to reject overlapping piecewise guards.
const GUARD_PROBES: usize = 1000;

/// Closed-form rules addressable by name in fixture files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticRule {
    /// `(x, y) -> (x, sin x)` on `R^2`.
    SinGraph,
}

impl AnalyticRule {
    fn apply(self, x: &Vector) -> Result<Vector> {
        match self {
            AnalyticRule::SinGraph => {
                if x.len() != 2 {
                    return Err(GeomError::DimensionMismatch {
                        expected: 2,
                        got: x.len(),
                    });
                }
                Ok(Vector::from_column_slice(&[x[0], x[0].sin()]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub guard: Domain,
    pub map: MapModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MapBody {
    /// `x -> A x + u`.
    Affine {
        #[serde(with = "serde_util::matrix")]
        matrix: Matrix,
        #[serde(with = "serde_util::vector")]
        translation: Vector,
    },
    /// Evaluates the branch of the first guard containing the point.
    Piecewise {
        pieces: Vec<Piece>,
    },
    Analytic {
        rule: AnalyticRule,
    },
    /// Applied in order: `maps[0]` first.
    Composite {
        maps: Vec<MapModel>,
    },
    /// `x -> (||x|| / r) T0(r x / ||x||)`, and `0 -> 0`.
    RadialExtension {
        inner: Box<MapModel>,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapModel {
    pub source: NormedSpace,
    pub target: NormedSpace,
    pub body: MapBody,
}

impl MapModel {
    pub fn affine(
        source: &NormedSpace,
        target: &NormedSpace,
        matrix: Matrix,
        translation: Vector,
    ) -> Result<Self> {
        if matrix.nrows() != target.dim() || translation.len() != target.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: target.dim(),
                got: matrix.nrows(),
            });
        }
        if matrix.ncols() != source.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: source.dim(),
                got: matrix.ncols(),
            });
        }
        Ok(MapModel {
            source: source.clone(),
            target: target.clone(),
            body: MapBody::Affine {
                matrix,
                translation,
            },
        })
    }

    pub fn linear(space: &NormedSpace, matrix: Matrix) -> Result<Self> {
        Self::affine(space, space, matrix, space.zero())
    }

    pub fn identity(space: &NormedSpace) -> Self {
        Self::linear(space, Matrix::identity(space.dim(), space.dim())).expect("square identity")
    }

    /// `x -> x + v`.
    pub fn translation(space: &NormedSpace, v: Vector) -> Result<Self> {
        Self::affine(space, space, Matrix::identity(space.dim(), space.dim()), v)
    }

    /// Point reflection `z -> 2c - z`.
    pub fn reflection(space: &NormedSpace, c: &Vector) -> Result<Self> {
        let n = space.dim();
        Self::affine(space, space, -Matrix::identity(n, n), c * 2.0)
    }

    pub fn analytic(space: &NormedSpace, rule: AnalyticRule) -> Self {
        MapModel {
            source: space.clone(),
            target: space.clone(),
            body: MapBody::Analytic { rule },
        }
    }

    /// Piecewise map; rejects guards that overlap on sampled points.
    pub fn piecewise(
        source: &NormedSpace,
        target: &NormedSpace,
        pieces: Vec<Piece>,
    ) -> Result<Self> {
        if pieces.is_empty() {
            return Err(GeomError::Invalid(
                "piecewise map needs at least one piece".into(),
            ));
        }
        for p in &pieces {
            if !p.guard.space().same_geometry(source) || p.map.source.dim() != source.dim() {
                return Err(GeomError::Invalid(
                    "guard space differs from map source".into(),
                ));
            }
            if p.map.target.dim() != target.dim() {
                return Err(GeomError::DimensionMismatch {
                    expected: target.dim(),
                    got: p.map.target.dim(),
                });
            }
        }
        let mut rng = sampling::rng(0x9a4d);
        let per_guard = GUARD_PROBES.div_ceil(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            for _ in 0..per_guard {
                let x = p.guard.sample(&mut rng)?;
                if let Some(j) = (0..pieces.len()).find(|&j| j != i && pieces[j].guard.has(&x)) {
                    return Err(GeomError::Precondition {
                        reason: format!("guards {i} and {j} overlap"),
                        witness: Some(x.as_slice().to_vec()),
                    });
                }
            }
        }
        Ok(MapModel {
            source: source.clone(),
            target: target.clone(),
            body: MapBody::Piecewise { pieces },
        })
    }

    /// Restriction of `map` to `domain`: evaluation outside fails.
    pub fn restricted(map: MapModel, domain: Domain) -> Result<Self> {
        let (source, target) = (map.source.clone(), map.target.clone());
        Self::piecewise(&source, &target, vec![Piece { guard: domain, map }])
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &MapModel, inner: &MapModel) -> Result<Self> {
        if inner.target.dim() != outer.source.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: outer.source.dim(),
                got: inner.target.dim(),
            });
        }
        let mut maps = Vec::new();
        for m in [inner, outer] {
            match &m.body {
                MapBody::Composite { maps: inner_maps } => maps.extend(inner_maps.iter().cloned()),
                _ => maps.push(m.clone()),
            }
        }
        Ok(MapModel {
            source: inner.source.clone(),
            target: outer.target.clone(),
            body: MapBody::Composite { maps },
        })
    }

    /// Inverse of an affine map with invertible linear part.
    pub fn invert(&self) -> Result<Self> {
        let MapBody::Affine {
            matrix,
            translation,
        } = &self.body
        else {
            return Err(GeomError::Invalid(
                "only affine maps can be inverted".into(),
            ));
        };
        if !matrix.is_square() {
            return Err(GeomError::Singular);
        }
        let inv = matrix.clone().try_inverse().ok_or(GeomError::Singular)?;
        if !inv.iter().all(|v| v.is_finite()) {
            return Err(GeomError::Singular);
        }
        let u = -(&inv * translation);
        Self::affine(&self.target, &self.source, inv, u)
    }

    pub fn radial_extension(inner: MapModel, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeomError::OutOfRange {
                name: "radius",
                value: radius,
            });
        }
        Ok(MapModel {
            source: inner.source.clone(),
            target: inner.target.clone(),
            body: MapBody::RadialExtension {
                inner: Box::new(inner),
                radius,
            },
        })
    }

    /// Linear part and translation, for affine bodies.
    pub fn as_affine(&self) -> Option<(&Matrix, &Vector)> {
        match &self.body {
            MapBody::Affine {
                matrix,
                translation,
            } => Some((matrix, translation)),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        self.source.check(x)?;
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &Vector) -> Result<Vector> {
        match &self.body {
            MapBody::Affine {
                matrix,
                translation,
            } => Ok(matrix * x + translation),
            MapBody::Piecewise { pieces } => pieces
                .iter()
                .find(|p| p.guard.has(x))
                .ok_or_else(|| GeomError::OutsideDomain {
                    point: x.as_slice().to_vec(),
                })
                .and_then(|p| p.map.eval_unchecked(x)),
            MapBody::Analytic { rule } => rule.apply(x),
            MapBody::Composite { maps } => maps
                .iter()
                .try_fold(x.clone(), |acc, m| m.eval_unchecked(&acc)),
            MapBody::RadialExtension { inner, radius } => {
                let n = self.source.norm_of(x);
                if n == 0.0 {
                    return Ok(self.target.zero());
                }
                let on_sphere = x * (radius / n);
                Ok(inner.eval_unchecked(&on_sphere)? * (n / radius))
            }
        }
    }

    /// Whether `x` lies in the set where the map is defined.
    pub fn defined_at(&self, x: &Vector) -> bool {
        self.evaluate(x).is_ok()
    }
}

/// Worst-case distance distortion over sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryDefect {
    pub defect: f64,
    /// Pair attaining the maximum.
    #[serde(with = "serde_util::vectors")]
    pub worst: Vec<Vector>,
    pub pairs: usize,
}

/// `max |d(M a, M b) - ||a - b||` over `n_pairs` pairs sampled from `domain`.
pub fn isometry_defect(
    map: &MapModel,
    domain: &Domain,
    metric: &dyn Metric,
    n_pairs: usize,
    seed: u64,
) -> Result<IsometryDefect> {
    let mut rng = sampling::rng(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let a = domain.sample(&mut rng)?;
        let b = domain.sample(&mut rng)?;
        pairs.push((a, b));
    }
    isometry_defect_on_pairs(map, &pairs, metric)
}

/// Isometry defect over every pair of the given points.
pub fn isometry_defect_on_points(
    map: &MapModel,
    points: &[Vector],
    metric: &dyn Metric,
) -> Result<IsometryDefect> {
    let images = points
        .iter()
        .map(|p| map.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    let mut out = IsometryDefect {
        defect: 0.0,
        worst: Vec::new(),
        pairs: 0,
    };
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let src = map.source.dist_of(&points[i], &points[j]);
            let d = (metric.dist(&images[i], &images[j])? - src).abs();
            out.pairs += 1;
            if d > out.defect || out.worst.is_empty() {
                out.defect = d;
                out.worst = vec![points[i].clone(), points[j].clone()];
            }
        }
    }
    Ok(out)
}

pub fn isometry_defect_on_pairs(
    map: &MapModel,
    pairs: &[(Vector, Vector)],
    metric: &dyn Metric,
) -> Result<IsometryDefect> {
    let mut out = IsometryDefect {
        defect: 0.0,
        worst: Vec::new(),
        pairs: pairs.len(),
    };
    for (a, b) in pairs {
        let d =
            (metric.dist(&map.evaluate(a)?, &map.evaluate(b)?)? - map.source.dist_of(a, b)).abs();
        if d > out.defect || out.worst.is_empty() {
            out.defect = d;
            out.worst = vec![a.clone(), b.clone()];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn identity_and_affine_evaluation() {
        let s = NormedSpace::l2(2);
        let x = v(&[0.3, -1.7]);
        assert_eq!(MapModel::identity(&s).evaluate(&x).unwrap(), x);
        let m = MapModel::affine(&s, &s, Matrix::identity(2, 2) * 2.0, v(&[1.0, 1.0])).unwrap();
        assert_eq!(m.evaluate(&v(&[1.0, 1.0])).unwrap(), v(&[3.0, 3.0]));
        assert!(m.evaluate(&v(&[1.0])).is_err());
    }

    #[test]
    fn invert_examples() {
        let s = NormedSpace::l2(2);
        let id = MapModel::identity(&s).invert().unwrap();
        assert_eq!(id.as_affine().unwrap().0, &Matrix::identity(2, 2));
        let m = MapModel::affine(&s, &s, Matrix::identity(2, 2) * 2.0, v(&[1.0, 1.0])).unwrap();
        assert_eq!(
            m.invert().unwrap().evaluate(&v(&[3.0, 3.0])).unwrap(),
            v(&[1.0, 1.0])
        );
        let singular =
            MapModel::linear(&s, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])).unwrap();
        assert_eq!(singular.invert(), Err(GeomError::Singular));
        assert!(MapModel::analytic(&s, AnalyticRule::SinGraph)
            .invert()
            .is_err());
    }

    #[test]
    fn conjugated_reflection_is_reflection() {
        // g^-1 ∘ psi ∘ g with psi the reflection through 0 and g a sign flip
        let s = NormedSpace::linf(2);
        let g = MapModel::linear(&s, Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        let psi = MapModel::reflection(&s, &s.zero()).unwrap();
        let conj =
            MapModel::compose(&g.invert().unwrap(), &MapModel::compose(&psi, &g).unwrap()).unwrap();
        for x in [v(&[1.0, 2.0]), v(&[-0.3, 0.0]), v(&[5.0, -7.5])] {
            assert_eq!(conj.evaluate(&x).unwrap(), psi.evaluate(&x).unwrap());
        }
        let round = MapModel::compose(&g, &g.invert().unwrap()).unwrap();
        assert_eq!(round.evaluate(&v(&[0.25, 4.0])).unwrap(), v(&[0.25, 4.0]));
    }

    #[test]
    fn overlapping_guards_are_rejected() {
        let s = NormedSpace::l2(2);
        let a = Domain::open_ball(&s, v(&[0.0, 0.0]), 1.0).unwrap();
        let b = Domain::open_ball(&s, v(&[0.5, 0.0]), 1.0).unwrap();
        let pieces = vec![
            Piece {
                guard: a,
                map: MapModel::identity(&s),
            },
            Piece {
                guard: b,
                map: MapModel::identity(&s),
            },
        ];
        assert!(matches!(
            MapModel::piecewise(&s, &s, pieces),
            Err(GeomError::Precondition { .. })
        ));
    }

    #[test]
    fn restricted_map_fails_outside() {
        let s = NormedSpace::l2(2);
        let ball = Domain::open_ball(&s, s.zero(), 1.0).unwrap();
        let m = MapModel::restricted(MapModel::identity(&s), ball).unwrap();
        assert!(m.evaluate(&v(&[0.5, 0.0])).is_ok());
        assert!(matches!(
            m.evaluate(&v(&[2.0, 0.0])),
            Err(GeomError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn rotation_is_isometric_on_disc() {
        let s = NormedSpace::l2(2);
        let (c, sn) = (0.7f64.cos(), 0.7f64.sin());
        let rot = MapModel::linear(&s, Matrix::from_row_slice(2, 2, &[c, -sn, sn, c])).unwrap();
        let disc = Domain::open_ball(&s, s.zero(), 1.0).unwrap();
        let d = isometry_defect(&rot, &disc, &s, 2000, 5).unwrap();
        assert!(d.defect <= 1e-9, "{}", d.defect);
        assert_eq!(d.worst.len(), 2);
    }

    #[test]
    fn map_json_roundtrip() {
        let s = NormedSpace::linf(2);
        let m = MapModel::affine(
            &s,
            &s,
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            v(&[1.0, 2.0]),
        )
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("[[0.0,1.0],[-1.0,0.0]]"));
        let back: MapModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
