//! Set models: open and closed balls, unions, polytopes, cones without apex,
//! and the sampled probes (inradius, openness, star shape, convexity) used to
//! pick the margins the extension machinery needs.
//!
//! Topology is declared, not inferred: a [`Domain`] says whether it is open
//! and whether it is convex, and operations with topological preconditions
//! check the declaration.

mod probes;
mod shape;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::sampling::SeededRng;
use crate::spaces::{NormedSpace, Vector};

pub use probes::{
    ApproachTerm, ConvexityFailure, ConvexityReport, ConvexityWitness, OpennessWitness,
    PredictedCheck, ProbeSettings, StarReport, StarWitness,
};
pub use shape::{ConeMembership, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    OpenBall,
    BallUnion,
    StarShaped,
    ConvexPolytope,
    ConeWithoutApex,
    ClosedSet,
    Custom,
}

/// A subset of a normed space with declared topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct Domain {
    space: NormedSpace,
    shape: Shape,
    kind: DomainKind,
    open: bool,
    convex: bool,
    bounding_radius: f64,
}

/// Serialized form of a [`Domain`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub space: NormedSpace,
    pub shape: Shape,
    pub open: bool,
    #[serde(default)]
    pub convex: bool,
}

impl TryFrom<DomainSpec> for Domain {
    type Error = GeomError;

    fn try_from(spec: DomainSpec) -> Result<Self> {
        spec.space.validate()?;
        Domain::new(spec.space, spec.shape, spec.kind, spec.open, spec.convex)
    }
}

impl From<Domain> for DomainSpec {
    fn from(d: Domain) -> Self {
        DomainSpec {
            kind: d.kind,
            space: d.space,
            shape: d.shape,
            open: d.open,
            convex: d.convex,
        }
    }
}

impl Domain {
    pub fn new(
        space: NormedSpace,
        shape: Shape,
        kind: DomainKind,
        open: bool,
        convex: bool,
    ) -> Result<Self> {
        shape.validate(space.dim())?;
        let bounding_radius = shape.bounding_radius(&space);
        Ok(Domain {
            space,
            shape,
            kind,
            open,
            convex,
            bounding_radius,
        })
    }

    pub fn open_ball(space: &NormedSpace, center: Vector, radius: f64) -> Result<Self> {
        Self::new(
            space.clone(),
            Shape::open_ball(center, radius),
            DomainKind::OpenBall,
            true,
            true,
        )
    }

    pub fn closed_ball(space: &NormedSpace, center: Vector, radius: f64) -> Result<Self> {
        Self::new(
            space.clone(),
            Shape::closed_ball(center, radius),
            DomainKind::ClosedSet,
            false,
            true,
        )
    }

    /// Union of open balls.
    pub fn ball_union(space: &NormedSpace, balls: Vec<(Vector, f64)>) -> Result<Self> {
        let parts = balls
            .into_iter()
            .map(|(c, r)| Shape::open_ball(c, r))
            .collect();
        Self::new(
            space.clone(),
            Shape::Union { parts },
            DomainKind::BallUnion,
            true,
            false,
        )
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Same set with a different convexity declaration.
    pub fn declared_convex(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        self.space.check(x)?;
        Ok(self.shape.contains(&self.space, x))
    }

    pub(crate) fn has(&self, x: &Vector) -> bool {
        self.shape.contains(&self.space, x)
    }

    pub(crate) fn require(&self, x: &Vector) -> Result<()> {
        if self.contains(x)? {
            Ok(())
        } else {
            Err(GeomError::OutsideDomain {
                point: x.as_slice().to_vec(),
            })
        }
    }

    /// Closed-form lower bound on the distance to the complement.
    pub fn analytic_inradius(&self, x: &Vector) -> Option<f64> {
        self.shape.analytic_inradius(&self.space, x)
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<Vector> {
        self.shape.sample(&self.space, rng)
    }

    pub fn sample_boundary(&self, rng: &mut SeededRng) -> Result<Vector> {
        self.shape.sample_boundary(&self.space, rng)
    }

    /// `{x : x + offset in self}`.
    pub fn translated(&self, offset: &Vector) -> Result<Domain> {
        Domain::new(
            self.space.clone(),
            Shape::Translated {
                inner: Box::new(self.shape.clone()),
                offset: offset.clone(),
            },
            self.kind,
            self.open,
            self.convex,
        )
    }

    /// Image of the domain under `y -> A y + u`, placed in `target`.
    pub fn affine_image(
        &self,
        target: &NormedSpace,
        matrix: &crate::spaces::Matrix,
        translation: &Vector,
    ) -> Result<Domain> {
        Domain::new(
            target.clone(),
            Shape::AffineImage {
                inner: Box::new(self.shape.clone()),
                matrix: matrix.clone(),
                translation: translation.clone(),
            },
            DomainKind::Custom,
            self.open,
            self.convex,
        )
    }

    /// The interior, for shapes where it has an exact description.
    pub fn interior(&self) -> Result<Domain> {
        Domain::new(
            self.space.clone(),
            self.shape.interior()?,
            self.kind,
            true,
            self.convex,
        )
    }

    /// The cone `union over x in U of [p, x]`, minus `p`. Requires `U` open
    /// and `p` outside `U`.
    pub fn cone_without_apex(p: &Vector, base: &Domain) -> Result<Domain> {
        if !base.is_open() {
            return Err(GeomError::precondition("cone base must be an open domain"));
        }
        if base.contains(p)? {
            return Err(GeomError::precondition_at(
                "apex lies inside the base",
                p.as_slice(),
            ));
        }
        Domain::new(
            base.space.clone(),
            Shape::Cone {
                apex: p.clone(),
                base: Box::new(base.shape.clone()),
            },
            DomainKind::ConeWithoutApex,
            true,
            false,
        )
    }

    /// Membership witness for cone domains.
    pub fn cone_membership(&self, x: &Vector) -> Result<ConeMembership> {
        self.space.check(x)?;
        self.shape
            .cone_membership(&self.space, x)
            .ok_or_else(|| GeomError::precondition("domain is not a cone"))
    }
}
