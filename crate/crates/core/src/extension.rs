//! Extension of an isometry on a star-shaped open set to an affine isometry.
//!
//! The pipeline recentres `T` at a star center `a0`, picks a radius `r`
//! with `B_{3r}(0)` inside the recentred domain, extends the centred map
//! radially by `x -> (||x|| / r) T0(r x / ||x||)`, and reads off the matrix
//! from the images of the basis vectors. Linearity of the extension is never
//! assumed: [`verify_extension`] measures every identity the argument relies
//! on and the caller decides what counts as a pass.

use serde::Serialize;

use crate::domains::{Domain, ProbeSettings, StarReport};
use crate::error::{GeomError, Result};
use crate::maps::MapModel;
use crate::sampling::{self, SeededRng};
use crate::serde_util;
use crate::spaces::{Matrix, Vector};

/// Fraction of the origin inradius used for `3r`.
pub const SAFE_FACTOR: f64 = 0.9;
/// Largest condition number accepted as invertible.
pub const CONDITION_LIMIT: f64 = 1e12;

/// How `recentre` checks that `a0` is a star center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarCheck {
    Sampled { n_samples: usize, seed: u64 },
    Skip,
}

impl Default for StarCheck {
    fn default() -> Self {
        StarCheck::Sampled {
            n_samples: 2000,
            seed: 0x57a2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recentred {
    /// `U1 - a0`.
    pub domain: Domain,
    /// `x -> T(x + a0) - T(a0)`.
    pub map: MapModel,
    pub star: Option<StarReport>,
}

pub fn recentre(
    map: &MapModel,
    domain: &Domain,
    a0: &Vector,
    check: StarCheck,
) -> Result<Recentred> {
    domain.require(a0)?;
    let star = match check {
        StarCheck::Sampled { n_samples, seed } => {
            let report = domain.star_defect(a0, n_samples, seed)?;
            if let Some(w) = &report.witness {
                return Err(GeomError::precondition_at(
                    "a0 is not a star center of the domain",
                    w.point.as_slice(),
                ));
            }
            Some(report)
        }
        StarCheck::Skip => None,
    };
    let shift_in = MapModel::translation(&map.source, a0.clone())?;
    let shift_out = MapModel::translation(&map.target, -map.evaluate(a0)?)?;
    let centred = MapModel::compose(&shift_out, &MapModel::compose(map, &shift_in)?)?;
    Ok(Recentred {
        domain: domain.translated(a0)?,
        map: centred,
        star,
    })
}

/// `r = 0.9 * inradius(V1, 0) / 3`, after checking a sampled `B_{3r}(0)`.
pub fn safe_radius(domain: &Domain) -> Result<f64> {
    let origin = domain.space().zero();
    if !domain.contains(&origin)? {
        return Err(GeomError::Refused {
            reason: "origin is not in the recentred domain".into(),
        });
    }
    let rho = domain.inradius_at(&origin)?;
    if rho <= 0.0 {
        return Err(GeomError::Refused {
            reason: "origin has zero inradius in the recentred domain".into(),
        });
    }
    let r = SAFE_FACTOR * rho / 3.0;
    let witness = domain.openness_witness(&origin, Some(3.0 * r))?;
    match witness.predicted {
        Some(check) if check.pass => Ok(r),
        Some(check) => Err(GeomError::Refused {
            reason: format!(
                "sampled ball of radius {:e} escapes at {:?}",
                3.0 * r,
                check.escape.map(|p| p.as_slice().to_vec())
            ),
        }),
        None => unreachable!("predicted radius was supplied"),
    }
}

/// The radial extension of a centred map; checks that the map is defined on
/// the sphere of radius `r` along every axis.
pub fn extend(centred: &MapModel, r: f64) -> Result<MapModel> {
    let n = centred.source.dim();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[i] = sign;
            let x = &e * (r / centred.source.norm(&e)?);
            centred.evaluate(&x)?;
        }
    }
    MapModel::radial_extension(centred.clone(), r)
}

/// Matrix whose columns are the images of the standard basis.
pub fn materialize(map: &MapModel, dim: usize) -> Result<Matrix> {
    let mut columns = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        columns.push(map.evaluate(&e)?);
    }
    Ok(Matrix::from_columns(&columns))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleCounts {
    pub radial_scaling: usize,
    pub small_ball_additivity: usize,
    pub homogeneity: usize,
    pub additivity: usize,
    pub agreement: usize,
    pub isometry: usize,
    /// Samples skipped because a recentred point left the domain.
    pub skipped: usize,
}

/// Evidence that the image of the domain is open.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageOpenness {
    pub probes: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    /// `||T0(t a) - t T0(a)||` over `a` in `V1`, `t` in `[0, 1]`.
    pub radial_scaling: f64,
    /// `||T0(a + b) - T0(a) - T0(b)||` over `a, b` in the closed `r`-ball.
    pub small_ball_additivity: f64,
    /// `||T0(-a) + T0(a)||` over the closed `r`-ball.
    pub negation: f64,
    /// `||E(s x) - s E(x)||` for the radial extension `E`, `s` negative,
    /// zero and beyond 1.
    pub homogeneity: f64,
    /// `||E(x + y) - E(x) - E(y)||`, including `y = -x`.
    pub additivity: f64,
    /// `||A x + u - T(x)||` over the domain.
    pub agreement: f64,
    #[serde(with = "serde_util::option_vector")]
    pub agreement_witness: Option<Vector>,
    /// Agreement restricted to boundary samples (convex path only).
    pub boundary_agreement: Option<f64>,
    /// `| ||A x|| - ||x|| |`.
    pub isometry: f64,
    pub condition_number: f64,
    pub invertibility_ok: bool,
    pub image_openness: Option<ImageOpenness>,
    pub sample_counts: SampleCounts,
    pub seed: u64,
}

impl DefectReport {
    /// The numeric defects by name, in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("radial_scaling", self.radial_scaling),
            ("small_ball_additivity", self.small_ball_additivity),
            ("negation", self.negation),
            ("homogeneity", self.homogeneity),
            ("additivity", self.additivity),
            ("agreement", self.agreement),
            ("isometry", self.isometry),
        ];
        if let Some(b) = self.boundary_agreement {
            out.push(("boundary_agreement", b));
        }
        out
    }

    pub fn max_defect(&self) -> f64 {
        self.named().into_iter().map(|(_, d)| d).fold(0.0, f64::max)
    }
}

/// What the verification step is measuring.
#[derive(Debug, Clone, Copy)]
pub struct ExtensionInput<'a> {
    pub map: &'a MapModel,
    pub domain: &'a Domain,
    pub a0: &'a Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub n_samples: usize,
    pub seed: u64,
    /// Points always included in the agreement scan.
    pub probes: Vec<Vector>,
}

impl SampleSpec {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        SampleSpec {
            n_samples,
            seed,
            probes: Vec::new(),
        }
    }
}

fn condition_number(a: &Matrix) -> f64 {
    if !a.is_square() || a.nrows() == 0 {
        return f64::INFINITY;
    }
    let s = a.clone().singular_values();
    let (lo, hi) = (s.min(), s.max());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn verify_extension(
    input: &ExtensionInput,
    a: &Matrix,
    u: &Vector,
    r: f64,
    spec: &SampleSpec,
) -> Result<DefectReport> {
    let ExtensionInput { map, domain, a0 } = *input;
    let source = &map.source;
    let target = &map.target;
    let n = source.dim();
    let recentred = recentre(map, domain, a0, StarCheck::Skip)?;
    let t0 = &recentred.map;
    let v1 = &recentred.domain;
    let ext = MapModel::radial_extension(t0.clone(), r)?;
    let mut counts = SampleCounts::default();
    let stream = |k: u64| -> SeededRng { sampling::rng(sampling::derive_seed(spec.seed, k)) };
    let m = spec.n_samples.max(1);

    // radial scaling on V1
    let mut radial_scaling: f64 = 0.0;
    let mut rng = stream(1);
    const T_GRID: usize = 9;
    for _ in 0..m {
        let x = v1.sample(&mut rng)?;
        let Ok(tx) = t0.evaluate(&x) else {
            counts.skipped += 1;
            continue;
        };
        for i in 0..T_GRID {
            let t = i as f64 / (T_GRID - 1) as f64;
            match t0.evaluate(&(&x * t)) {
                Ok(y) => {
                    radial_scaling = radial_scaling.max(target.dist_of(&y, &(&tx * t)));
                    counts.radial_scaling += 1;
                }
                Err(_) => counts.skipped += 1,
            }
        }
    }

    // additivity and negation on the closed r-ball
    let mut small_ball_additivity: f64 = 0.0;
    let mut negation: f64 = 0.0;
    let mut rng = stream(2);
    for _ in 0..m {
        let p = sampling::point_in_closed_ball(&mut rng, source, &source.zero(), r);
        let q = sampling::point_in_closed_ball(&mut rng, source, &source.zero(), r);
        let eval = |x: &Vector| t0.evaluate(x);
        match (eval(&p), eval(&q), eval(&(&p + &q)), eval(&(-&p))) {
            (Ok(tp), Ok(tq), Ok(tpq), Ok(tneg)) => {
                small_ball_additivity =
                    small_ball_additivity.max(target.dist_of(&tpq, &(&tp + &tq)));
                negation = negation.max(target.norm_of(&(&tneg + &tp)));
                counts.small_ball_additivity += 1;
            }
            _ => counts.skipped += 1,
        }
    }

    // global homogeneity and additivity of the radial extension
    let scale = domain.bounding_radius().max(1.0);
    const S_VALUES: [f64; 7] = [-3.5, -1.0, -0.25, 0.0, 0.5, 1.0, 7.25];
    let mut homogeneity: f64 = 0.0;
    let mut additivity: f64 = 0.0;
    let mut rng = stream(3);
    for i in 0..m {
        let x = sampling::point_in_ball(&mut rng, source, &source.zero(), 2.0 * scale);
        let y = if i % 8 == 0 {
            -&x
        } else {
            sampling::point_in_ball(&mut rng, source, &source.zero(), 2.0 * scale)
        };
        let ex = ext.evaluate(&x)?;
        for s in S_VALUES {
            homogeneity = homogeneity.max(target.dist_of(&ext.evaluate(&(&x * s))?, &(&ex * s)));
            counts.homogeneity += 1;
        }
        let sum = ext.evaluate(&(&x + &y))?;
        additivity = additivity.max(target.dist_of(&sum, &(ex + ext.evaluate(&y)?)));
        counts.additivity += 1;
    }

    // agreement with T on U1
    let mut agreement: f64 = 0.0;
    let mut agreement_witness = None;
    let mut rng = stream(4);
    let mut points = spec.probes.clone();
    for _ in 0..m {
        points.push(domain.sample(&mut rng)?);
    }
    for x in &points {
        let Ok(tx) = map.evaluate(x) else {
            counts.skipped += 1;
            continue;
        };
        let d = target.dist_of(&(a * x + u), &tx);
        counts.agreement += 1;
        if d > agreement || agreement_witness.is_none() {
            agreement = agreement.max(d);
            agreement_witness = Some(x.clone());
        }
    }

    // isometry of the materialized matrix
    let mut isometry: f64 = 0.0;
    let mut rng = stream(5);
    for _ in 0..m {
        let x = sampling::point_in_ball(&mut rng, source, &source.zero(), 2.0 * scale);
        isometry = isometry.max((target.norm_of(&(a * &x)) - source.norm_of(&x)).abs());
        counts.isometry += 1;
    }

    let condition_number = condition_number(a);
    Ok(DefectReport {
        radial_scaling,
        small_ball_additivity,
        negation,
        homogeneity,
        additivity,
        agreement,
        agreement_witness,
        boundary_agreement: None,
        isometry,
        condition_number,
        invertibility_ok: a.nrows() == n && condition_number < CONDITION_LIMIT,
        image_openness: None,
        sample_counts: counts,
        seed: spec.seed,
    })
}

/// Linear part, translation and measured defects of an extension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionResult {
    #[serde(rename = "A", with = "serde_util::matrix")]
    pub a: Matrix,
    #[serde(with = "serde_util::vector")]
    pub u: Vector,
    pub r: f64,
    /// Center actually used for recentring.
    #[serde(with = "serde_util::vector")]
    pub a0: Vector,
    pub forced: bool,
    pub defects: DefectReport,
    pub seed: u64,
    pub sample_counts: SampleCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub samples: SampleSpec,
    /// Skip precondition checks instead of failing on them.
    pub force: bool,
    /// Center to fall back on when a forced run has no safe radius at `a0`.
    pub rebase: Option<Vector>,
    /// Declared image domain, probed for openness.
    pub image: Option<Domain>,
}

impl PipelineOptions {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        PipelineOptions {
            samples: SampleSpec::new(n_samples, seed),
            force: false,
            rebase: None,
            image: None,
        }
    }
}

fn image_openness(
    map: &MapModel,
    domain: &Domain,
    image: &Domain,
    n_probes: usize,
    seed: u64,
) -> Result<ImageOpenness> {
    let probe = ProbeSettings {
        dirs_per_dim: 16,
        ..ProbeSettings::default()
    };
    let mut rng = sampling::rng(sampling::derive_seed(seed, 6));
    let mut passed = 0;
    for _ in 0..n_probes {
        let x = domain.sample(&mut rng)?;
        let Ok(y) = map.evaluate(&x) else { continue };
        if image.contains(&y)?
            && image
                .openness_witness_with(&y, None, &probe)?
                .radius
                .is_some()
        {
            passed += 1;
        }
    }
    Ok(ImageOpenness {
        probes: n_probes,
        passed,
    })
}

/// Recentre, choose `r`, extend radially, materialize and verify.
pub fn extend_isometry(
    map: &MapModel,
    domain: &Domain,
    a0: &Vector,
    opts: &PipelineOptions,
) -> Result<ExtensionResult> {
    let n = map.source.dim();
    if map.target.dim() != n {
        return Err(GeomError::DimensionMismatch {
            expected: n,
            got: map.target.dim(),
        });
    }
    if domain.dim() != n {
        return Err(GeomError::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    if !opts.force && !domain.is_open() {
        return Err(GeomError::precondition("domain is not declared open"));
    }
    let check = if opts.force {
        StarCheck::Skip
    } else {
        StarCheck::default()
    };
    let mut centre = a0.clone();
    let mut recentred = recentre(map, domain, &centre, check)?;
    let r = match safe_radius(&recentred.domain) {
        Ok(r) => r,
        Err(GeomError::Refused { reason }) => match (&opts.rebase, opts.force) {
            (Some(alt), true) => {
                centre = alt.clone();
                recentred = recentre(map, domain, &centre, StarCheck::Skip)?;
                safe_radius(&recentred.domain)?
            }
            _ => return Err(GeomError::Refused { reason }),
        },
        Err(e) => return Err(e),
    };
    let ext = extend(&recentred.map, r)?;
    let a = materialize(&ext, n)?;
    let u = map.evaluate(&centre)? - &a * &centre;
    let input = ExtensionInput {
        map,
        domain,
        a0: &centre,
    };
    let mut defects = verify_extension(&input, &a, &u, r, &opts.samples)?;
    if let Some(image) = &opts.image {
        let n_probes = (opts.samples.n_samples / 50).clamp(4, 64);
        defects.image_openness = Some(image_openness(
            map,
            domain,
            image,
            n_probes,
            opts.samples.seed,
        )?);
    }
    Ok(ExtensionResult {
        a,
        u,
        r,
        a0: centre,
        forced: opts.force,
        seed: defects.seed,
        sample_counts: defects.sample_counts.clone(),
        defects,
    })
}

/// The convex-body path: extend from the interior, then check agreement on
/// the whole set, boundary included.
pub fn extend_convex(
    map: &MapModel,
    set: &Domain,
    n_samples: usize,
    seed: u64,
) -> Result<ExtensionResult> {
    if !set.is_convex() {
        return Err(GeomError::precondition("domain is not declared convex"));
    }
    let scan = set.interior_convexity_defect(n_samples.clamp(64, 2000), seed)?;
    if let Some(w) = &scan.witness {
        return Err(GeomError::Precondition {
            reason: format!("convexity scan failed: {:?}", w.failure),
            witness: Some(w.point.as_slice().to_vec()),
        });
    }
    let interior = set.interior()?;
    let mut rng = sampling::rng(sampling::derive_seed(seed, 7));
    let mut best: Option<(f64, Vector)> = None;
    for _ in 0..64 {
        let x = set.sample(&mut rng)?;
        let rho = if interior.has(&x) {
            interior.inradius_at(&x)?
        } else {
            0.0
        };
        if best.as_ref().is_none_or(|(b, _)| rho > *b) {
            best = Some((rho, x));
        }
    }
    let (rho, a0) = best.expect("at least one sample");
    if rho <= 0.0 || interior.openness_witness(&a0, None)?.radius.is_none() {
        return Err(GeomError::precondition("no interior point found"));
    }
    let opts = PipelineOptions::new(n_samples, seed);
    let mut result = extend_isometry(map, &interior, &a0, &opts)?;

    let mut rng = sampling::rng(sampling::derive_seed(seed, 8));
    let mut boundary: f64 = 0.0;
    let mut count = 0;
    for i in 0..n_samples.max(1) {
        let x = if i % 2 == 0 {
            set.sample_boundary(&mut rng)?
        } else {
            set.sample(&mut rng)?
        };
        let d = map
            .target
            .dist_of(&(&result.a * &x + &result.u), &map.evaluate(&x)?);
        if d > boundary {
            boundary = d;
            if d > result.defects.agreement {
                result.defects.agreement_witness = Some(x.clone());
            }
        }
        count += 1;
    }
    result.defects.boundary_agreement = Some(boundary);
    result.defects.agreement = result.defects.agreement.max(boundary);
    result.defects.sample_counts.agreement += count;
    result.sample_counts = result.defects.sample_counts.clone();
    Ok(result)
}
