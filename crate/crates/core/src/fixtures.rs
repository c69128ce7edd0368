//! Built-in fixtures and random isometry generators.
//!
//! A fixture bundles a domain, a map on it, and the metadata the harness
//! needs: a star center, an interior fallback for forced runs, probe points
//! that must appear in agreement scans, and whether the fixture is expected
//! to extend.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain, DomainKind, Shape};
use crate::error::{GeomError, Result};
use crate::maps::{build_example_star_closed, build_example_two_balls, MapModel};
use crate::sampling::{self, SeededRng};
use crate::serde_util;
use crate::spaces::{Matrix, NormedSpace, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// The map is the restriction of an affine isometry.
    Extends,
    /// The map is an isometry that does not extend.
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub domain: Domain,
    pub map: MapModel,
    /// Declared image `T(domain)`, probed for openness.
    #[serde(default)]
    pub image: Option<Domain>,
    #[serde(default, with = "serde_util::option_vector")]
    pub center: Option<Vector>,
    /// Fallback center for forced runs whose center has no safe radius.
    #[serde(default, with = "serde_util::option_vector")]
    pub interior_hint: Option<Vector>,
    #[serde(default, with = "serde_util::vectors")]
    pub probes: Vec<Vector>,
    /// Use the convex-body path instead of the star-shaped one.
    #[serde(default)]
    pub convex: bool,
    pub expectation: Expectation,
    /// Generating affine isometry, when known.
    #[serde(default)]
    pub generator: Option<Generator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(with = "serde_util::matrix")]
    pub matrix: Matrix,
    #[serde(with = "serde_util::vector")]
    pub translation: Vector,
}

impl Fixture {
    pub fn space(&self) -> &NormedSpace {
        self.domain.space()
    }

    /// The star center, or the origin.
    pub fn center_or_origin(&self) -> Vector {
        self.center.clone().unwrap_or_else(|| self.space().zero())
    }
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "ex-two-balls",
    "ex-star-closed",
    "signed-perm-star",
    "rotation-disc",
    "convex-maxball",
];

pub fn builtin(name: &str) -> Result<Fixture> {
    match name {
        "ex-two-balls" => two_balls(),
        "ex-star-closed" => star_closed(),
        "signed-perm-star" => signed_perm_star(),
        "rotation-disc" => rotation_disc(),
        "convex-maxball" => convex_maxball(),
        _ => Err(GeomError::Invalid(format!(
            "unknown fixture '{name}'; available: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn two_balls() -> Result<Fixture> {
    let (domain, map) = build_example_two_balls()?;
    Ok(Fixture {
        name: "ex-two-balls".into(),
        description: "two unit max-norm balls at distance 10; sign flip on the far ball".into(),
        image: Some(domain.clone()),
        domain,
        map,
        center: Some(v(&[0.0, 0.0])),
        interior_hint: None,
        probes: vec![v(&[0.5, 10.0])],
        convex: false,
        expectation: Expectation::Counterexample,
        generator: None,
    })
}

fn star_closed() -> Result<Fixture> {
    let (domain, map) = build_example_star_closed()?;
    Ok(Fixture {
        name: "ex-star-closed".into(),
        description: "closed triangle plus a spike carried onto the sine graph".into(),
        image: None,
        domain,
        map,
        center: Some(v(&[0.0, 0.0])),
        interior_hint: Some(v(&[-0.5, 0.0])),
        probes: vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0])],
        convex: false,
        expectation: Expectation::Counterexample,
        generator: None,
    })
}

/// Open union of axis boxes through `center`: box `i` has half-width `arm`
/// along axis `i` and `width` along the others. Star-shaped about `center`,
/// not convex when `arm > width`.
pub fn star_cross(space: &NormedSpace, center: &Vector, arm: f64, width: f64) -> Result<Domain> {
    let n = space.dim();
    let parts = (0..n)
        .map(|i| {
            let mut half = Vector::from_element(n, width);
            half[i] = arm;
            Shape::axis_box(center - &half, center + &half, false)
        })
        .collect();
    Domain::new(
        space.clone(),
        Shape::Union { parts },
        DomainKind::StarShaped,
        true,
        false,
    )
}

/// Affine isometry restricted to `domain`, with its image declared.
pub fn affine_fixture(
    name: &str,
    domain: Domain,
    center: Vector,
    matrix: Matrix,
    translation: Vector,
    convex: bool,
) -> Result<Fixture> {
    let space = domain.space().clone();
    let full = MapModel::affine(&space, &space, matrix.clone(), translation.clone())?;
    let image = domain.affine_image(&space, &matrix, &translation)?;
    let image = if domain.is_open() { Some(image) } else { None };
    Ok(Fixture {
        name: name.into(),
        description: format!(
            "affine isometry on a {} domain",
            space.norm_kind().short_name()
        ),
        map: MapModel::restricted(full, domain.clone())?,
        domain,
        image,
        center: Some(center),
        interior_hint: None,
        probes: Vec::new(),
        convex,
        expectation: Expectation::Extends,
        generator: Some(Generator {
            matrix,
            translation,
        }),
    })
}

fn signed_perm_star() -> Result<Fixture> {
    let space = NormedSpace::linf(3);
    let center = v(&[1.0, -2.0, 0.5]);
    let domain = star_cross(&space, &center, 2.0, 0.75)?;
    // (x, y, z) -> (z, -x, y)
    let a = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    affine_fixture(
        "signed-perm-star",
        domain,
        center,
        a,
        v(&[0.5, 1.0, -1.5]),
        false,
    )
}

fn rotation_disc() -> Result<Fixture> {
    let space = NormedSpace::l2(2);
    let center = v(&[0.5, -1.0]);
    let domain = Domain::open_ball(&space, center.clone(), 2.0)?;
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let a = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
    affine_fixture("rotation-disc", domain, center, a, v(&[1.5, -0.25]), false)
}

fn convex_maxball() -> Result<Fixture> {
    let space = NormedSpace::linf(2);
    let domain = Domain::closed_ball(&space, space.zero(), 1.0)?;
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let mut f = affine_fixture(
        "convex-maxball",
        domain,
        space.zero(),
        a,
        v(&[0.25, -0.75]),
        true,
    )?;
    f.probes = vec![
        v(&[1.0, 1.0]),
        v(&[-1.0, 1.0]),
        v(&[1.0, -1.0]),
        v(&[-1.0, -1.0]),
    ];
    Ok(f)
}

/// Uniformly random signed permutation matrix.
pub fn random_signed_permutation(rng: &mut SeededRng, n: usize) -> Matrix {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut m = Matrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        m[(i, j)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    m
}

/// Haar-random orthogonal matrix from the QR factorization of a Gaussian
/// matrix, with signs fixed by the diagonal of `R`.
pub fn random_orthogonal(rng: &mut SeededRng, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| sampling::gaussian(rng, 1)[0]);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Signed permutations under the max norm.
    SignedPermutation,
    /// Orthogonal matrices under the Euclidean norm.
    Orthogonal,
}

impl GeneratorKind {
    fn space(self, n: usize) -> NormedSpace {
        match self {
            GeneratorKind::SignedPermutation => NormedSpace::linf(n),
            GeneratorKind::Orthogonal => NormedSpace::l2(n),
        }
    }

    fn matrix(self, rng: &mut SeededRng, n: usize) -> Matrix {
        match self {
            GeneratorKind::SignedPermutation => random_signed_permutation(rng, n),
            GeneratorKind::Orthogonal => random_orthogonal(rng, n),
        }
    }
}

/// Random affine isometry on a star-shaped open cross around a random center.
pub fn random_star_fixture(kind: GeneratorKind, n: usize, seed: u64) -> Result<Fixture> {
    let mut rng = sampling::rng(seed);
    let space = kind.space(n);
    let center = sampling::uniform_box(&mut rng, n, 3.0);
    let domain = star_cross(&space, &center, 2.0, 0.75)?;
    let a = kind.matrix(&mut rng, n);
    let u = sampling::uniform_box(&mut rng, n, 5.0);
    affine_fixture(
        &format!("random-star-{n}-{seed}"),
        domain,
        center,
        a,
        u,
        false,
    )
}

/// Random affine isometry on a closed ball (a closed convex body).
pub fn random_convex_fixture(kind: GeneratorKind, n: usize, seed: u64) -> Result<Fixture> {
    let mut rng = sampling::rng(seed);
    let space = kind.space(n);
    let center = sampling::uniform_box(&mut rng, n, 3.0);
    let domain = Domain::closed_ball(&space, center.clone(), 1.5)?;
    let a = kind.matrix(&mut rng, n);
    let u = sampling::uniform_box(&mut rng, n, 5.0);
    affine_fixture(
        &format!("random-convex-{n}-{seed}"),
        domain,
        center,
        a,
        u,
        true,
    )
}

/// `per_side^2` cell midpoints on each ball of the two-ball domain.
pub fn two_ball_grid(per_side: usize) -> Vec<Vector> {
    let step = 2.0 / per_side as f64;
    let mut out = Vec::with_capacity(2 * per_side * per_side);
    for y0 in [0.0, 10.0] {
        for i in 0..per_side {
            for j in 0..per_side {
                let x = -1.0 + (i as f64 + 0.5) * step;
                let y = y0 - 1.0 + (j as f64 + 0.5) * step;
                out.push(v(&[x, y]));
            }
        }
    }
    out
}

/// 200 points of the closed star-shaped example: 150 on the triangle
/// (vertices and the point (-1, 0) included) and 50 on the spike.
pub fn star_closed_grid() -> Vec<Vector> {
    let space = NormedSpace::linf(2);
    let triangle = crate::maps::closed_triangle(&space).expect("valid triangle");
    let mut lattice = Vec::new();
    for i in 0..=20 {
        for j in 0..=40 {
            let p = v(&[-1.0 + i as f64 / 20.0, -1.0 + j as f64 / 20.0]);
            if triangle.has(&p) {
                lattice.push(p);
            }
        }
    }
    let mut out = vec![v(&[-1.0, 0.0]), v(&[-1.0, 1.0]), v(&[-1.0, -1.0])];
    let extra = 150 - out.len();
    for k in 0..extra {
        let p = lattice[k * lattice.len() / extra].clone();
        out.push(p);
    }
    for k in 0..50 {
        out.push(v(&[k as f64 / 49.0, 0.0]));
    }
    out
}
