//! Midpoint preservation for isometries on open sets.
//!
//! An isometry between open sets sends the midpoint of any segment lying in
//! its domain to the midpoint of the images. The local step works on short
//! segments whose equidistant sets stay inside both domains; a dyadic chain
//! `h_k = (k / 2^n)(g - f) + f` then carries the local relation
//! `T(h_k) + T(h_{k+2}) - 2 T(h_{k+1}) = 0` to the whole segment, because
//! the relations at spacing `2^j` sum (with weights 1, 2, 1) to the relation
//! at spacing `2^(j+1)`.
//!
//! The local step rests on the fact that a surjective self-isometry of a
//! bounded set symmetric about `c` fixes `c`; [`fixed_center_check`]
//! measures that consequence on constructed maps.

use serde::Serialize;

use crate::domains::{Domain, ProbeSettings};
use crate::error::{GeomError, Result};
use crate::maps::MapModel;
use crate::sampling::{self, SeededRng};
use crate::serde_util;
use crate::spaces::{lerp, reflect, Metric, NormedSpace, Vector};

/// Smallest `n >= 0` with `||f - g|| / 2^n < eps`.
pub fn choose_subdivision(space: &NormedSpace, f: &Vector, g: &Vector, eps: f64) -> Result<u32> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(GeomError::OutOfRange {
            name: "eps",
            value: eps,
        });
    }
    let len = space.distance(f, g)?;
    let mut n = 0u32;
    let mut step = len;
    while step >= eps {
        n += 1;
        step = len / 2f64.powi(n as i32);
    }
    Ok(n)
}

/// The points `h_0 = f, ..., h_{2^n} = g` of a dyadic subdivision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicChain {
    #[serde(with = "serde_util::vector")]
    pub f: Vector,
    #[serde(with = "serde_util::vector")]
    pub g: Vector,
    pub depth: u32,
    #[serde(with = "serde_util::vectors")]
    pub points: Vec<Vector>,
}

impl DyadicChain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn dyadic_chain(f: &Vector, g: &Vector, depth: u32) -> Result<DyadicChain> {
    if f.len() != g.len() {
        return Err(GeomError::DimensionMismatch {
            expected: f.len(),
            got: g.len(),
        });
    }
    if depth == 0 {
        return Err(GeomError::OutOfRange {
            name: "depth",
            value: 0.0,
        });
    }
    if depth > 30 {
        return Err(GeomError::OutOfRange {
            name: "depth",
            value: depth as f64,
        });
    }
    let m = 1usize << depth;
    let diff = g - f;
    let mut points: Vec<Vector> = (0..=m).map(|k| &diff * (k as f64 / m as f64) + f).collect();
    points[0] = f.clone();
    points[m] = g.clone();
    Ok(DyadicChain {
        f: f.clone(),
        g: g.clone(),
        depth,
        points,
    })
}

fn chain_images(map: &MapModel, chain: &DyadicChain) -> Result<Vec<Vector>> {
    chain
        .points
        .iter()
        .enumerate()
        .map(|(index, h)| {
            map.evaluate(h).map_err(|e| match e {
                GeomError::OutsideDomain { .. } => GeomError::ChainPointOutside { index },
                other => other,
            })
        })
        .collect()
}

/// `d(T a + T b, 2 T m)`, which is `||T a + T b - 2 T m||` for norm metrics.
fn second_difference(metric: &dyn Metric, a: &Vector, b: &Vector, m: &Vector) -> Result<f64> {
    metric.dist(&(a + b), &(m * 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDefect {
    /// `delta_k = ||T(h_k) + T(h_{k+2}) - 2 T(h_{k+1})||` for `0 <= k <= 2^n - 2`.
    pub per_k: Vec<f64>,
    pub max: f64,
    pub argmax: usize,
}

pub fn chain_midpoint_defect(
    map: &MapModel,
    chain: &DyadicChain,
    metric: &dyn Metric,
) -> Result<ChainDefect> {
    let images = chain_images(map, chain)?;
    let mut per_k = Vec::with_capacity(images.len().saturating_sub(2));
    for k in 0..images.len().saturating_sub(2) {
        per_k.push(second_difference(
            metric,
            &images[k],
            &images[k + 2],
            &images[k + 1],
        )?);
    }
    let (argmax, max) =
        per_k.iter().copied().enumerate().fold(
            (0, 0.0),
            |best, (k, d)| if d > best.1 { (k, d) } else { best },
        );
    Ok(ChainDefect { per_k, max, argmax })
}

/// Second differences at every dyadic spacing level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingLevels {
    /// Entry `j - 1` is `max_k ||T(h_k) + T(h_{k+2^j}) - 2 T(h_{k+2^(j-1)})||`.
    pub defects: Vec<f64>,
    /// `4^(j-1)` times the level-1 defect: the bound implied by summing
    /// adjacent relations with weights 1, 2, 1.
    pub bounds: Vec<f64>,
    /// Whether every level respects its bound (up to rounding).
    pub within_bounds: bool,
}

pub fn spacing_collapse_check(
    map: &MapModel,
    chain: &DyadicChain,
    metric: &dyn Metric,
) -> Result<SpacingLevels> {
    if chain.depth < 2 {
        return Err(GeomError::OutOfRange {
            name: "depth",
            value: chain.depth as f64,
        });
    }
    let images = chain_images(map, chain)?;
    let m = images.len() - 1;
    let mut defects = Vec::with_capacity(chain.depth as usize);
    for j in 1..=chain.depth {
        let span = 1usize << j;
        let half = span / 2;
        let mut worst: f64 = 0.0;
        for k in 0..=(m - span) {
            worst = worst.max(second_difference(
                metric,
                &images[k],
                &images[k + span],
                &images[k + half],
            )?);
        }
        defects.push(worst);
    }
    let bounds: Vec<f64> = (0..defects.len())
        .map(|i| 4f64.powi(i as i32) * defects[0])
        .collect();
    let scale = images.iter().map(|y| y.amax()).fold(1.0, f64::max);
    let within_bounds = defects
        .iter()
        .zip(&bounds)
        .all(|(d, b)| *d <= b * (1.0 + 1e-12) + 64.0 * f64::EPSILON * scale);
    Ok(SpacingLevels {
        defects,
        bounds,
        within_bounds,
    })
}

/// Checks that the closed segment `[f, g]` stays in `domain` on a grid.
fn segment_in_domain(domain: &Domain, f: &Vector, g: &Vector, grid: usize) -> Result<()> {
    for i in 0..grid {
        let r = i as f64 / (grid - 1) as f64;
        let point = lerp(g, f, r);
        if !domain.contains(&point)? {
            return Err(GeomError::SegmentEscapes {
                r,
                point: point.as_slice().to_vec(),
            });
        }
    }
    Ok(())
}

/// `d(T((f + g) / 2), (T f + T g) / 2)` for a segment inside `domain`.
pub fn midpoint_defect(
    map: &MapModel,
    domain: &Domain,
    f: &Vector,
    g: &Vector,
    metric: &dyn Metric,
) -> Result<f64> {
    segment_in_domain(domain, f, g, 257)?;
    let mid = (f + g) * 0.5;
    let image_mid = map.evaluate(&mid)?;
    let avg = (map.evaluate(f)? + map.evaluate(g)?) * 0.5;
    metric.dist(&image_mid, &avg)
}

/// Outcome of the full midpoint procedure on one segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MidpointCertificate {
    /// Smallest inradius of the domain along the segment.
    pub source_margin: f64,
    /// Smallest inradius of the image domain along the image, when declared.
    pub image_margin: Option<f64>,
    pub eps: f64,
    pub depth: u32,
    pub chain: ChainDefect,
    pub levels: Option<SpacingLevels>,
    pub midpoint_defect: f64,
}

/// Runs the margin guard, builds a dyadic chain fine enough for the margin,
/// and measures chain, level and midpoint defects. Refuses when the segment
/// (or its image) touches the boundary, since the local step needs a
/// positive margin.
pub fn certify_midpoint(
    map: &MapModel,
    domain: &Domain,
    image: Option<&Domain>,
    f: &Vector,
    g: &Vector,
    metric: &dyn Metric,
) -> Result<MidpointCertificate> {
    const MARGIN_GRID: usize = 65;
    segment_in_domain(domain, f, g, MARGIN_GRID)?;
    let probe = ProbeSettings::default();
    let mut source_margin = f64::INFINITY;
    let mut image_margin: Option<f64> = image.map(|_| f64::INFINITY);
    for i in 0..MARGIN_GRID {
        let h = lerp(g, f, i as f64 / (MARGIN_GRID - 1) as f64);
        source_margin = source_margin.min(domain.inradius_with(&h, &probe)?);
        if let (Some(img), Some(m)) = (image, image_margin.as_mut()) {
            let th = map.evaluate(&h)?;
            let r = if img.contains(&th)? {
                img.inradius_with(&th, &probe)?
            } else {
                0.0
            };
            *m = m.min(r);
        }
    }
    let margin = image_margin.map_or(source_margin, |m| m.min(source_margin));
    if margin <= 0.0 {
        return Err(GeomError::Refused {
            reason: format!(
                "segment has no positive margin (source {source_margin:e}, image {image_margin:?})"
            ),
        });
    }
    let eps = 0.5 * margin;
    let depth = choose_subdivision(&map.source, f, g, eps)?.max(1);
    let chain = dyadic_chain(f, g, depth)?;
    let chain_defect = chain_midpoint_defect(map, &chain, metric)?;
    let levels = if depth >= 2 {
        Some(spacing_collapse_check(map, &chain, metric)?)
    } else {
        None
    };
    let midpoint_defect = midpoint_defect(map, domain, f, g, metric)?;
    Ok(MidpointCertificate {
        source_margin,
        image_margin,
        eps,
        depth,
        chain: chain_defect,
        levels,
        midpoint_defect,
    })
}

/// The equidistant set `{a : ||a - h|| = r = ||a - h'||}`, thickened by
/// `thickness` so that it can be sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereSet {
    pub space: NormedSpace,
    #[serde(with = "serde_util::vector")]
    pub h: Vector,
    #[serde(with = "serde_util::vector")]
    pub h_prime: Vector,
    pub r: f64,
    pub thickness: f64,
}

impl SphereSet {
    /// The set used by the local midpoint step: `r = ||h - h'|| / 2`.
    pub fn midpoint_set(space: &NormedSpace, h: Vector, h_prime: Vector) -> Result<Self> {
        let r = space.distance(&h, &h_prime)? / 2.0;
        Self::new(space, h, h_prime, r)
    }

    pub fn new(space: &NormedSpace, h: Vector, h_prime: Vector, r: f64) -> Result<Self> {
        space.check(&h)?;
        space.check(&h_prime)?;
        if !(r.is_finite() && r > 0.0) {
            return Err(GeomError::OutOfRange {
                name: "r",
                value: r,
            });
        }
        Ok(SphereSet {
            space: space.clone(),
            h,
            h_prime,
            r,
            thickness: 1e-9,
        })
    }

    pub fn center(&self) -> Vector {
        (&self.h + &self.h_prime) * 0.5
    }
}

/// A sampled point set: membership plus a sampler.
pub trait PointSet {
    fn space(&self) -> &NormedSpace;
    fn contains_point(&self, x: &Vector) -> bool;
    fn sample_point(&self, rng: &mut SeededRng) -> Result<Vector>;
}

impl PointSet for Domain {
    fn space(&self) -> &NormedSpace {
        Domain::space(self)
    }

    fn contains_point(&self, x: &Vector) -> bool {
        self.contains(x).unwrap_or(false)
    }

    fn sample_point(&self, rng: &mut SeededRng) -> Result<Vector> {
        self.sample(rng)
    }
}

impl PointSet for SphereSet {
    fn space(&self) -> &NormedSpace {
        &self.space
    }

    fn contains_point(&self, x: &Vector) -> bool {
        x.len() == self.h.len()
            && (self.space.dist_of(x, &self.h) - self.r).abs() <= self.thickness
            && (self.space.dist_of(x, &self.h_prime) - self.r).abs() <= self.thickness
    }

    fn sample_point(&self, rng: &mut SeededRng) -> Result<Vector> {
        if let crate::spaces::Norm::L2 = self.space.norm_kind() {
            // intersection of two Euclidean spheres: a sphere in the
            // bisecting hyperplane
            let w = &self.h_prime - &self.h;
            let m = self.center();
            let rho = (self.r * self.r - w.dot(&w) / 4.0).max(0.0).sqrt();
            if rho == 0.0 {
                return Ok(m);
            }
            for _ in 0..1000 {
                let g = sampling::gaussian(rng, w.len());
                let perp = if w.norm() > 0.0 {
                    &g - &w * (g.dot(&w) / w.dot(&w))
                } else {
                    g
                };
                let n = perp.norm();
                if n > 1e-12 {
                    return Ok(m + perp * (rho / n));
                }
            }
            return Err(GeomError::Sampling {
                attempts: 1000,
                reason: "degenerate bisecting hyperplane".into(),
            });
        }
        const ATTEMPTS: usize = 200_000;
        for _ in 0..ATTEMPTS {
            let a = &self.h + sampling::unit_direction(rng, &self.space) * self.r;
            if self.contains_point(&a) {
                return Ok(a);
            }
        }
        Err(GeomError::Sampling {
            attempts: ATTEMPTS,
            reason: "thickened sphere intersection not hit".into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedCenterReport {
    /// `||T(c) - c||`.
    pub defect: f64,
    pub samples: usize,
}

/// Measures `||T(c) - c||` for a map `T` of a bounded set `L` onto itself,
/// where `L` is symmetric about `c`. Invariance of `L` under `T` and under
/// the reflection through `c` is checked on samples; surjectivity is a
/// property of how the map was constructed.
pub fn fixed_center_check(
    set: &dyn PointSet,
    c: &Vector,
    map: &MapModel,
    n_samples: usize,
    seed: u64,
) -> Result<FixedCenterReport> {
    let space = set.space();
    space.check(c)?;
    if !set.contains_point(c) {
        return Err(GeomError::precondition_at(
            "center is not in the set",
            c.as_slice(),
        ));
    }
    let mut rng = sampling::rng(seed);
    for _ in 0..n_samples {
        let a = set.sample_point(&mut rng)?;
        if !set.contains_point(&map.evaluate(&a)?) {
            return Err(GeomError::precondition_at(
                "map does not keep the set invariant",
                a.as_slice(),
            ));
        }
        if !set.contains_point(&reflect(c, &a)?) {
            return Err(GeomError::precondition_at(
                "set is not symmetric about the center",
                a.as_slice(),
            ));
        }
    }
    let tc = map.evaluate(c)?;
    Ok(FixedCenterReport {
        defect: space.dist_of(&tc, c),
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::build_example_two_balls;
    use crate::spaces::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn subdivision_examples() {
        let s = NormedSpace::l2(1);
        assert_eq!(
            choose_subdivision(&s, &v(&[0.0]), &v(&[1.0]), 0.3).unwrap(),
            2
        );
        assert_eq!(
            choose_subdivision(&s, &v(&[2.0]), &v(&[2.0]), 1e-6).unwrap(),
            0
        );
        assert_eq!(
            choose_subdivision(&s, &v(&[0.0]), &v(&[10.0]), 0.1).unwrap(),
            7
        );
        assert!(choose_subdivision(&s, &v(&[0.0]), &v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn chain_examples() {
        let f = v(&[0.0, 0.0]);
        let g = v(&[4.0, 0.0]);
        let c1 = dyadic_chain(&f, &g, 1).unwrap();
        assert_eq!(c1.points, vec![f.clone(), v(&[2.0, 0.0]), g.clone()]);
        let c2 = dyadic_chain(&f, &g, 2).unwrap();
        let xs: Vec<f64> = c2.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let odd = dyadic_chain(&v(&[0.1, 0.7]), &v(&[0.3, -0.9]), 5).unwrap();
        assert_eq!(odd.points[0], v(&[0.1, 0.7]));
        assert_eq!(odd.points[32], v(&[0.3, -0.9]));
        assert!(dyadic_chain(&f, &v(&[1.0]), 2).is_err());
    }

    #[test]
    fn affine_chain_has_no_defect() {
        let s = NormedSpace::l2(2);
        let m = MapModel::affine(
            &s,
            &s,
            Matrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]),
            v(&[0.5, 0.5]),
        )
        .unwrap();
        let chain = dyadic_chain(&v(&[-1.0, 2.0]), &v(&[3.0, 0.5]), 6).unwrap();
        let d = chain_midpoint_defect(&m, &chain, &s).unwrap();
        assert_eq!(d.per_k.len(), 63);
        assert!(d.max <= 1e-9);
        let levels = spacing_collapse_check(&m, &chain, &s).unwrap();
        assert_eq!(levels.defects.len(), 6);
        assert!(levels.defects.iter().all(|d| *d <= 1e-9));
    }

    #[test]
    fn top_level_is_the_midpoint_relation() {
        let s = NormedSpace::l2(2);
        let m = MapModel::analytic(&s, crate::maps::AnalyticRule::SinGraph);
        let (f, g) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        let chain = dyadic_chain(&f, &g, 3).unwrap();
        let levels = spacing_collapse_check(&m, &chain, &s).unwrap();
        let direct = s
            .norm(
                &(m.evaluate(&f).unwrap() + m.evaluate(&g).unwrap()
                    - m.evaluate(&v(&[0.5, 0.0])).unwrap() * 2.0),
            )
            .unwrap();
        assert!((levels.defects[2] - direct).abs() < 1e-15);
        assert!(levels.within_bounds);
        assert!(levels.defects[0] > 0.0);
    }

    #[test]
    fn chain_point_outside_is_named() {
        let (_, t) = build_example_two_balls().unwrap();
        let chain = dyadic_chain(&v(&[0.0, 0.0]), &v(&[0.0, 10.0]), 2).unwrap();
        assert_eq!(
            chain_midpoint_defect(&t, &chain, &NormedSpace::linf(2)),
            Err(GeomError::ChainPointOutside { index: 1 })
        );
    }

    #[test]
    fn midpoint_defect_rejects_escaping_segments() {
        let (u, t) = build_example_two_balls().unwrap();
        let s = NormedSpace::linf(2);
        let inside = midpoint_defect(&t, &u, &v(&[0.2, 9.5]), &v(&[-0.7, 10.4]), &s).unwrap();
        assert!(inside <= 1e-12);
        assert!(matches!(
            midpoint_defect(&t, &u, &v(&[0.0, 0.0]), &v(&[0.0, 10.0]), &s),
            Err(GeomError::SegmentEscapes { .. })
        ));
    }

    #[test]
    fn fixed_center_on_max_norm_sphere_set() {
        let s = NormedSpace::linf(2);
        let l = SphereSet::midpoint_set(&s, v(&[-1.0, 0.0]), v(&[1.0, 0.0])).unwrap();
        let c = l.center();
        let flip =
            MapModel::linear(&s, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        assert_eq!(
            fixed_center_check(&l, &c, &flip, 200, 1).unwrap().defect,
            0.0
        );
        let id = MapModel::identity(&s);
        assert_eq!(fixed_center_check(&l, &c, &id, 200, 1).unwrap().defect, 0.0);
        let psi = MapModel::reflection(&s, &c).unwrap();
        assert_eq!(
            fixed_center_check(&l, &c, &psi, 200, 1).unwrap().defect,
            0.0
        );
        // a shear leaves the set
        let shear =
            MapModel::linear(&s, Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).unwrap();
        assert!(matches!(
            fixed_center_check(&l, &c, &shear, 200, 1),
            Err(GeomError::Precondition { .. })
        ));
    }
}
