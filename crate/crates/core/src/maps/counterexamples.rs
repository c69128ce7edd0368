//! The two sharpness fixtures: an isometry between open sets that is not
//! star-shaped, and an isometry on a star-shaped closed set. Neither extends
//! to an affine isometry.

use super::{AnalyticRule, MapModel, Piece};
use crate::domains::{Domain, DomainKind, Shape};
use crate::error::Result;
use crate::spaces::{Matrix, NormedSpace, Segment, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// Continuous functions on a two-point space, realised as `R^2` with the
/// sup norm. The domain is the union of the unit balls around `0` and
/// `f0 = (0, 10)`; the map is the identity on the first ball and flips the
/// sign of the first coordinate on the second.
pub fn build_example_two_balls() -> Result<(Domain, MapModel)> {
    let space = NormedSpace::linf(2);
    let f0 = v(&[0.0, 10.0]);
    let near = Domain::open_ball(&space, space.zero(), 1.0)?;
    let far = Domain::open_ball(&space, f0.clone(), 1.0)?;
    let union = Domain::ball_union(&space, vec![(space.zero(), 1.0), (f0, 1.0)])?;
    let flip = MapModel::linear(&space, Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]))?;
    let map = MapModel::piecewise(
        &space,
        &space,
        vec![
            Piece {
                guard: near,
                map: MapModel::identity(&space),
            },
            Piece {
                guard: far,
                map: flip,
            },
        ],
    )?;
    Ok((union, map))
}

/// The closed triangle `X1 = {-1 <= x <= 0, |y| <= -x}` in the max-norm
/// plane, together with its bounding normals.
pub(crate) fn closed_triangle(space: &NormedSpace) -> Result<Domain> {
    let shape = Shape::Polytope {
        normals: vec![
            v(&[-1.0, 0.0]),
            v(&[1.0, 0.0]),
            v(&[1.0, 1.0]),
            v(&[1.0, -1.0]),
        ],
        offsets: vec![1.0, 0.0, 0.0, 0.0],
        closed: true,
        lower: v(&[-1.0, -1.0]),
        upper: v(&[0.0, 1.0]),
    };
    Domain::new(
        space.clone(),
        shape,
        DomainKind::ConvexPolytope,
        false,
        true,
    )
}

/// `X = X1 ∪ X2` with `X2 = [(0,0), (1,0)]`; the map is the identity on
/// `X1` and `(x, 0) -> (x, sin x)` on `X2`. Star-shaped about the origin.
pub fn build_example_star_closed() -> Result<(Domain, MapModel)> {
    let space = NormedSpace::linf(2);
    let triangle = closed_triangle(&space)?;
    let spike = Segment::new(v(&[0.0, 0.0]), v(&[1.0, 0.0]))?;
    let spike_domain = Domain::new(
        space.clone(),
        Shape::Segment(spike),
        DomainKind::ClosedSet,
        false,
        true,
    )?;
    let union = Domain::new(
        space.clone(),
        Shape::Union {
            parts: vec![triangle.shape().clone(), spike_domain.shape().clone()],
        },
        DomainKind::ClosedSet,
        false,
        false,
    )?;
    let map = MapModel::piecewise(
        &space,
        &space,
        vec![
            Piece {
                guard: triangle,
                map: MapModel::identity(&space),
            },
            Piece {
                guard: spike_domain,
                map: MapModel::analytic(&space, AnalyticRule::SinGraph),
            },
        ],
    )?;
    Ok((union, map))
}
