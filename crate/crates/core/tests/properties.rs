use isoext::fixtures;
use isoext::maps::{affine_fit, isometry_defect_on_points, MapModel};
use isoext::midpoint::{choose_subdivision, dyadic_chain};
use isoext::sampling;
use isoext::spaces::{reflect, segment_point, Norm};
use isoext::{Matrix, NormedSpace, Vector};
use proptest::prelude::*;

fn vec_of(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-100.0f64..100.0, n).prop_map(Vector::from_vec)
}

fn norm_strategy(n: usize) -> impl Strategy<Value = NormedSpace> {
    prop_oneof![
        Just(Norm::L1),
        Just(Norm::L2),
        Just(Norm::Linf),
        (1.0f64..6.0).prop_map(|p| Norm::Lp { p }),
        prop::collection::vec(0.1f64..5.0, n).prop_map(|weights| Norm::WeightedLinf { weights }),
    ]
    .prop_map(move |norm| NormedSpace::new(n, norm).unwrap())
}

fn setup() -> impl Strategy<Value = (NormedSpace, Vector, Vector, Vector)> {
    (1usize..=6).prop_flat_map(|n| (norm_strategy(n), vec_of(n), vec_of(n), vec_of(n)))
}

proptest! {
    #[test]
    fn norm_axioms((space, x, y, _) in setup(), s in -10.0f64..10.0) {
        let nx = space.norm(&x).unwrap();
        let ny = space.norm(&y).unwrap();
        prop_assert!(nx >= 0.0);
        prop_assert_eq!(space.norm(&space.zero()).unwrap(), 0.0);
        let scaled = space.norm(&(&x * s)).unwrap();
        prop_assert!((scaled - s.abs() * nx).abs() <= 1e-12 * (1.0 + s.abs() * nx));
        let sum = space.norm(&(&x + &y)).unwrap();
        prop_assert!(sum <= (nx + ny) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn reflection_is_an_isometric_involution((space, c, x, y) in setup()) {
        let rx = reflect(&c, &x).unwrap();
        let ry = reflect(&c, &y).unwrap();
        let back = reflect(&c, &rx).unwrap();
        let scale = c.amax().max(x.amax()).max(1.0);
        prop_assert!((back - &x).amax() <= 4.0 * f64::EPSILON * scale);
        let d = space.distance(&x, &y).unwrap();
        let dr = space.distance(&rx, &ry).unwrap();
        prop_assert!((d - dr).abs() <= 1e-12 * (d + 4.0 * scale));
        prop_assert!(reflect(&c, &c).unwrap() == c);
    }

    #[test]
    fn segment_points_stay_on_the_segment((space, a, b, _) in setup(), t in 0.0f64..=1.0) {
        let p = segment_point(&a, &b, t).unwrap();
        let len = space.distance(&a, &b).unwrap();
        let sum = space.distance(&a, &p).unwrap() + space.distance(&p, &b).unwrap();
        prop_assert!((sum - len).abs() <= 1e-12 * (1.0 + len) * 10.0);
        prop_assert_eq!(segment_point(&a, &b, 1.0).unwrap(), a.clone());
        prop_assert_eq!(segment_point(&a, &b, 0.0).unwrap(), b.clone());
    }

    #[test]
    fn chain_invariants((_, f, g, _) in setup(), depth in 1u32..8) {
        let chain = dyadic_chain(&f, &g, depth).unwrap();
        let m = 1usize << depth;
        prop_assert_eq!(chain.len(), m + 1);
        prop_assert_eq!(&chain.points[0], &f);
        prop_assert_eq!(&chain.points[m], &g);
        let step = (&g - &f) / m as f64;
        for w in chain.points.windows(2) {
            prop_assert!((&w[1] - &w[0] - &step).amax() <= 1e-12 * (1.0 + f.amax().max(g.amax())));
        }
    }

    #[test]
    fn subdivision_is_minimal((space, f, g, _) in setup(), eps in 1e-3f64..50.0) {
        let n = choose_subdivision(&space, &f, &g, eps).unwrap();
        let len = space.distance(&f, &g).unwrap();
        prop_assert!(len / 2f64.powi(n as i32) < eps);
        if n > 0 {
            prop_assert!(len / 2f64.powi(n as i32 - 1) >= eps);
        }
    }

    #[test]
    fn affine_fit_recovers_affine_maps(n in 1usize..5, m in 1usize..5, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let a = Matrix::from_fn(m, n, |_, _| sampling::gaussian(&mut rng, 1)[0]);
        let u = sampling::gaussian(&mut rng, m);
        let samples: Vec<_> = (0..3 * n + 4)
            .map(|_| {
                let x = sampling::uniform_box(&mut rng, n, 3.0);
                let y = &a * &x + &u;
                (x, y)
            })
            .collect();
        let fit = affine_fit(&samples, &NormedSpace::l2(m)).unwrap();
        prop_assert!((fit.matrix - a).amax() <= 1e-8);
        prop_assert!((fit.translation - u).amax() <= 1e-8);
        prop_assert!(fit.residual <= 1e-8);
    }

    #[test]
    fn signed_permutations_are_isometries(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let space = NormedSpace::linf(n);
        let a = fixtures::random_signed_permutation(&mut rng, n);
        let map = MapModel::affine(&space, &space, a, sampling::uniform_box(&mut rng, n, 5.0)).unwrap();
        let pts: Vec<_> = (0..12).map(|_| sampling::uniform_box(&mut rng, n, 4.0)).collect();
        prop_assert!(isometry_defect_on_points(&map, &pts, &space).unwrap().defect <= 1e-12);
    }
}
