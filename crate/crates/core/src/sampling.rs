//! Seeded random sampling helpers. Every probe in the crate draws from a
//! [`ChaCha8Rng`] created here so that runs are reproducible from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::spaces::{NormedSpace, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a run seed and a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut SeededRng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn uniform_box(rng: &mut SeededRng, dim: usize, half_width: f64) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-half_width..half_width))
}

/// A random direction of unit length in the space's norm.
pub fn unit_direction(rng: &mut SeededRng, space: &NormedSpace) -> Vector {
    loop {
        let g = gaussian(rng, space.dim());
        let n = space.norm_of(&g);
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// A random point of the open ball `B_radius(center)`.
pub fn point_in_ball(
    rng: &mut SeededRng,
    space: &NormedSpace,
    center: &Vector,
    radius: f64,
) -> Vector {
    let u = unit_direction(rng, space);
    let s: f64 = rng.random::<f64>().powf(1.0 / space.dim() as f64);
    center + u * (radius * s)
}

/// A random point of the closed ball, occasionally exactly on the sphere.
pub fn point_in_closed_ball(
    rng: &mut SeededRng,
    space: &NormedSpace,
    center: &Vector,
    radius: f64,
) -> Vector {
    if rng.random_bool(0.1) {
        center + unit_direction(rng, space) * radius
    } else {
        point_in_ball(rng, space, center, radius)
    }
}
