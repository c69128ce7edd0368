//! Sampled geometric probes on domains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{GeomError, Result};
use crate::sampling::{self, SeededRng};
use crate::serde_util;
use crate::spaces::{lerp, Vector};

const BISECTION_BACKOFF: f64 = 0.9;

/// Probe densities. The directional count is `dirs_per_dim * dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub dirs_per_dim: usize,
    pub seed: u64,
    /// Smallest radius in the openness schedule, relative to
    /// `max(1, bounding_radius)`.
    pub min_radius: f64,
    /// Number of grid points for `t` in `[0, 1]` in segment scans.
    pub t_grid: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            dirs_per_dim: 64,
            seed: 0x5eed,
            min_radius: 1e-9,
            t_grid: 33,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedCheck {
    pub radius: f64,
    pub pass: bool,
    /// First sampled point of `B_radius(x)` found outside the domain.
    #[serde(with = "serde_util::option_vector")]
    pub escape: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpennessWitness {
    /// Largest schedule radius whose sampled ball lies in the domain.
    pub radius: Option<f64>,
    pub predicted: Option<PredictedCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarWitness {
    #[serde(with = "serde_util::vector")]
    pub x: Vector,
    pub t: f64,
    #[serde(with = "serde_util::vector")]
    pub point: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarReport {
    /// 0 when every scanned segment stays inside, 1 otherwise.
    pub defect: f64,
    pub witness: Option<StarWitness>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproachTerm {
    pub n: usize,
    #[serde(with = "serde_util::vector")]
    pub point: Vector,
    pub interior: bool,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityFailure {
    /// A segment between two members leaves the set.
    Set,
    /// A segment between two interior points leaves the interior.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityWitness {
    #[serde(with = "serde_util::vector")]
    pub a: Vector,
    #[serde(with = "serde_util::vector")]
    pub b: Vector,
    pub t: f64,
    #[serde(with = "serde_util::vector")]
    pub point: Vector,
    pub failure: ConvexityFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub defect: f64,
    pub witness: Option<ConvexityWitness>,
    pub interior_samples: usize,
}

impl Domain {
    /// Distance from `x` to the complement: the closed form when the shape
    /// has one, else a directional bisection estimate.
    pub fn inradius_at(&self, x: &Vector) -> Result<f64> {
        self.inradius_with(x, &ProbeSettings::default())
    }

    pub fn inradius_with(&self, x: &Vector, probe: &ProbeSettings) -> Result<f64> {
        self.require(x)?;
        if let Some(r) = self.analytic_inradius(x) {
            return Ok(r);
        }
        Ok(self.bisection_inradius(x, probe))
    }

    /// Lower estimate of the inradius by bisecting the first exit along
    /// sampled directions, then shrinking until a sampled ball fits.
    fn bisection_inradius(&self, x: &Vector, probe: &ProbeSettings) -> f64 {
        let mut rng = sampling::rng(probe.seed);
        let n_dir = probe.dirs_per_dim * self.dim();
        let reach = 2.0 * (self.bounding_radius + self.space.norm_of(x)).max(1e-12);
        const SCAN: usize = 64;
        let mut rho = f64::INFINITY;
        for _ in 0..n_dir {
            let u = sampling::unit_direction(&mut rng, &self.space);
            let inside = |s: f64| self.has(&(x + &u * s));
            let mut lo = 0.0;
            let mut hi = reach;
            for k in 1..=SCAN {
                let s = reach * k as f64 / SCAN as f64;
                if !inside(s) {
                    hi = s;
                    break;
                }
                lo = s;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            rho = rho.min(lo);
            if rho == 0.0 {
                return 0.0;
            }
        }
        // finitely many directions overshoot the true minimum; back off
        rho *= BISECTION_BACKOFF;
        for _ in 0..60 {
            if self.sampled_ball_escape(x, rho, n_dir, &mut rng).is_none() {
                return rho;
            }
            rho *= 0.5;
        }
        0.0
    }

    /// Samples `B_rho(x)`: half the points near the sphere, half at random
    /// radii. Returns the first sampled point outside the domain.
    fn sampled_ball_escape(
        &self,
        x: &Vector,
        rho: f64,
        count: usize,
        rng: &mut SeededRng,
    ) -> Option<Vector> {
        for k in 0..count {
            let u = sampling::unit_direction(rng, &self.space);
            let frac = if k % 2 == 0 {
                1.0 - 1e-6
            } else {
                rng.random::<f64>()
            };
            let y = x + u * (rho * frac);
            if !self.has(&y) {
                return Some(y);
            }
        }
        None
    }

    /// Largest radius of a halving schedule whose sampled ball around `x`
    /// stays in the domain; optionally verifies a predicted radius directly.
    pub fn openness_witness(
        &self,
        x: &Vector,
        predicted_radius: Option<f64>,
    ) -> Result<OpennessWitness> {
        self.openness_witness_with(x, predicted_radius, &ProbeSettings::default())
    }

    pub fn openness_witness_with(
        &self,
        x: &Vector,
        predicted_radius: Option<f64>,
        probe: &ProbeSettings,
    ) -> Result<OpennessWitness> {
        self.require(x)?;
        let mut rng = sampling::rng(probe.seed);
        let n_dir = probe.dirs_per_dim * self.dim();
        let scale = self.bounding_radius.max(1.0);
        let floor = probe.min_radius * scale;

        let mut radius = None;
        let mut rho = 2.0 * scale;
        while rho >= floor {
            if self.sampled_ball_escape(x, rho, n_dir, &mut rng).is_none() {
                radius = Some(rho);
                break;
            }
            rho *= 0.5;
        }

        let predicted = match predicted_radius {
            Some(r) if !(r.is_finite() && r > 0.0) => {
                return Err(GeomError::OutOfRange {
                    name: "predicted_radius",
                    value: r,
                })
            }
            Some(r) => {
                let escape = self.sampled_ball_escape(x, r, 4 * n_dir, &mut rng);
                Some(PredictedCheck {
                    radius: r,
                    pass: escape.is_none(),
                    escape,
                })
            }
            None => None,
        };
        Ok(OpennessWitness { radius, predicted })
    }

    /// Checks that segments from `center` to sampled members stay inside.
    pub fn star_defect(&self, center: &Vector, n_samples: usize, seed: u64) -> Result<StarReport> {
        self.star_defect_with(center, n_samples, seed, &ProbeSettings::default())
    }

    pub fn star_defect_with(
        &self,
        center: &Vector,
        n_samples: usize,
        seed: u64,
        probe: &ProbeSettings,
    ) -> Result<StarReport> {
        if !self.contains(center)? {
            return Err(GeomError::precondition_at(
                "star center is not in the domain",
                center.as_slice(),
            ));
        }
        let mut rng = sampling::rng(seed);
        let grid = probe.t_grid.max(2);
        for _ in 0..n_samples {
            let x = self.sample(&mut rng)?;
            for i in 0..grid {
                let t = i as f64 / (grid - 1) as f64;
                let point = lerp(center, &x, t);
                if !self.has(&point) {
                    return Ok(StarReport {
                        defect: 1.0,
                        witness: Some(StarWitness { x, t, point }),
                        samples: n_samples,
                    });
                }
            }
        }
        Ok(StarReport {
            defect: 0.0,
            witness: None,
            samples: n_samples,
        })
    }

    /// Interiority by positive inradius.
    pub(crate) fn is_interior(&self, x: &Vector, probe: &ProbeSettings) -> bool {
        self.has(x) && self.inradius_with(x, probe).is_ok_and(|r| r > 0.0)
    }

    /// The sequence `x_n = (1 - 1/n) p + (1/n) a` approaching a point `p` of
    /// a convex set from an interior point `a`.
    pub fn interior_approach(
        &self,
        p: &Vector,
        a: &Vector,
        n_max: usize,
    ) -> Result<Vec<ApproachTerm>> {
        if !self.convex {
            return Err(GeomError::precondition("domain is not declared convex"));
        }
        if !self.contains(p)? {
            return Err(GeomError::precondition_at(
                "p is not in the domain",
                p.as_slice(),
            ));
        }
        let probe = ProbeSettings::default();
        if !self.contains(a)? || self.openness_witness(a, None)?.radius.is_none() {
            return Err(GeomError::precondition_at(
                "a is not an interior point",
                a.as_slice(),
            ));
        }
        let gap = self.space.dist_of(a, p);
        let mut terms = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let w = 1.0 / n as f64;
            let point = lerp(a, p, w);
            let distance = self.space.dist_of(&point, p);
            let interior = self.is_interior(&point, &probe);
            terms.push(ApproachTerm {
                n,
                point,
                interior,
                distance,
            });
        }
        if gap > 0.0 && terms.windows(2).any(|w| w[1].distance >= w[0].distance) {
            return Err(GeomError::Invalid(
                "approach distances are not strictly decreasing".into(),
            ));
        }
        Ok(terms)
    }

    /// Sampled convexity scan of the set and of its interior.
    ///
    /// The first scan checks segments between arbitrary members (the
    /// convexity declaration itself); the second checks segments between
    /// interior points for interiority.
    pub fn interior_convexity_defect(&self, n_pairs: usize, seed: u64) -> Result<ConvexityReport> {
        if !self.convex {
            return Err(GeomError::precondition("domain is not declared convex"));
        }
        let probe = ProbeSettings::default();
        let mut rng = sampling::rng(seed);
        let mut members = Vec::with_capacity(2 * n_pairs);
        for _ in 0..2 * n_pairs {
            members.push(self.sample(&mut rng)?);
        }
        let interior: Vec<Vector> = members
            .iter()
            .filter(|x| self.is_interior(x, &probe))
            .cloned()
            .collect();
        if interior.is_empty() {
            return Err(GeomError::precondition("no sampled point is interior"));
        }
        let grid = probe.t_grid.max(2);
        let scan = |a: &Vector, b: &Vector, interior_only: bool| -> Option<ConvexityWitness> {
            (1..grid - 1).find_map(|i| {
                let t = i as f64 / (grid - 1) as f64;
                let point = lerp(a, b, t);
                let ok = if interior_only {
                    self.is_interior(&point, &probe)
                } else {
                    self.has(&point)
                };
                (!ok).then(|| ConvexityWitness {
                    a: a.clone(),
                    b: b.clone(),
                    t,
                    point,
                    failure: if interior_only {
                        ConvexityFailure::Interior
                    } else {
                        ConvexityFailure::Set
                    },
                })
            })
        };
        let pick =
            |rng: &mut SeededRng, pool: &[Vector]| pool[rng.random_range(0..pool.len())].clone();
        for _ in 0..n_pairs {
            let (a, b) = (pick(&mut rng, &members), pick(&mut rng, &members));
            if let Some(w) = scan(&a, &b, false) {
                return Ok(ConvexityReport {
                    defect: 1.0,
                    witness: Some(w),
                    interior_samples: interior.len(),
                });
            }
            let (a, b) = (pick(&mut rng, &interior), pick(&mut rng, &interior));
            if let Some(w) = scan(&a, &b, true) {
                return Ok(ConvexityReport {
                    defect: 1.0,
                    witness: Some(w),
                    interior_samples: interior.len(),
                });
            }
        }
        Ok(ConvexityReport {
            defect: 0.0,
            witness: None,
            interior_samples: interior.len(),
        })
    }
}
