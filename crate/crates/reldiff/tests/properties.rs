use proptest::prelude::*;
use reldiff::framebundle::gram_schmidt;
use reldiff::harness::report::canonical_json;
use reldiff::minkowski::*;
use reldiff::rng::{derive_seed, PathRng};

fn spatial(range: f64) -> impl Strategy<Value = SpatialVector> {
    prop::collection::vec(-range..range, SPATIAL_DIM).prop_map(|v| SpatialVector::from_fn(|i, _| v[i]))
}

fn velocity(range: f64) -> impl Strategy<Value = FourVector> {
    spatial(range).prop_map(|q| VelocityCoords::new(q).to_four_velocity())
}

/// Boost followed by rotations in every spatial plane.
fn lorentz() -> impl Strategy<Value = Matrix> {
    (spatial(2.0), prop::collection::vec(-3.2..3.2f64, SPATIAL_DIM * (SPATIAL_DIM - 1) / 2)).prop_map(|(chi, angles)| {
        let mut l = boost_from_rapidity(&chi);
        let mut k = 0;
        for i in 1..DIM {
            for j in i + 1..DIM {
                l *= plane_rotation(i, j, angles[k]);
                k += 1;
            }
        }
        l
    })
}

proptest! {
    #[test]
    fn quadratic_form_is_lorentz_invariant(l in lorentz(), u in velocity(3.0), v in velocity(3.0)) {
        let before = q_inner(&u, &v);
        let after = q_inner(&(l * u), &(l * v));
        prop_assert!((before - after).abs() <= 1e-10 * before.abs().max(1.0) * l.amax().powi(2));
    }

    #[test]
    fn hyperbolic_triangle_inequality(u in velocity(4.0), v in velocity(4.0), w in velocity(4.0)) {
        let d = |a: &FourVector, b: &FourVector| hyperbolic_distance(a, b).unwrap();
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-7);
    }

    #[test]
    fn hyperbolic_distance_is_invariant(l in lorentz(), u in velocity(3.0), v in velocity(3.0)) {
        let a = hyperbolic_distance(&u, &v).unwrap();
        let b = hyperbolic_distance(&(l * u), &(l * v)).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a));
    }

    #[test]
    fn velocity_coordinates_round_trip(q in spatial(50.0)) {
        let g0 = VelocityCoords::new(q).to_four_velocity();
        prop_assert!((q_inner(&g0, &g0) - 1.0).abs() <= 1e-12 * g0[0] * g0[0]);
        prop_assert!(g0[0] >= 1.0);
        let back = VelocityCoords::from_four_velocity(&g0).q;
        prop_assert!((back - q).amax() == 0.0);
    }

    #[test]
    fn boost_takes_rest_to_velocity(q in spatial(20.0)) {
        let v = VelocityCoords::new(q);
        let b = v.boost();
        prop_assert!((b * basis(0) - v.to_four_velocity()).amax() <= 1e-12 * v.gamma());
        prop_assert!(orthonormality_defect(&b) <= 1e-12 * v.gamma() * v.gamma());
    }

    #[test]
    fn exponential_of_algebra_is_orthonormal(chi in spatial(1.5), w in prop::collection::vec(-2.0..2.0f64, SPATIAL_DIM * (SPATIAL_DIM - 1) / 2)) {
        let mut x = boost_algebra(&chi);
        let mut k = 0;
        for i in 1..DIM {
            for j in i + 1..DIM {
                x += w[k] * rotation_generator(i, j);
                k += 1;
            }
        }
        prop_assert!(algebra_residual(&x) == 0.0);
        let g = group_exp(&x).unwrap();
        prop_assert!(orthonormality_defect(&g) <= 1e-10);
    }

    #[test]
    fn closed_form_boost_matches_exponential(chi in spatial(2.0)) {
        let a = boost_from_rapidity(&chi);
        let b = group_exp(&boost_algebra(&chi)).unwrap();
        prop_assert!((a - b).amax() <= 1e-11 * a.amax());
        let g = boost_exp(1, 0.3) * plane_rotation(1, 2, 0.4);
        prop_assert!((right_mul_boost(&g, &chi) - g * a).amax() <= 1e-11 * a.amax());
    }

    #[test]
    fn gram_schmidt_repairs_perturbed_frames(l in lorentz(), noise in prop::collection::vec(-1e-6..1e-6f64, DIM * DIM)) {
        let g = l + Matrix::from_fn(|i, j| noise[i * DIM + j]);
        let fixed = gram_schmidt(&g, &eta());
        prop_assert!(orthonormality_defect(&fixed) <= 1e-9 * l.amax().powi(2));
        prop_assert!((fixed - l).amax() <= 1e-3 * l.amax());
    }

    #[test]
    fn derived_seeds_separate_tags(master in any::<u64>(), a in "[a-z/_]{1,12}", b in "[a-z/_]{1,12}") {
        prop_assume!(a != b);
        prop_assert_eq!(derive_seed(master, &a), derive_seed(master, &a));
        prop_assert_ne!(derive_seed(master, &a), derive_seed(master, &b));
    }

    #[test]
    fn path_streams_are_reproducible(seed in any::<u64>(), id in any::<u64>()) {
        let mut a = PathRng::new(seed, id);
        let mut b = PathRng::new(seed, id);
        for _ in 0..8 {
            let u = a.uniform_open0();
            prop_assert!(u > 0.0 && u <= 1.0);
            prop_assert_eq!(u.to_bits(), b.uniform_open0().to_bits());
        }
    }

    #[test]
    fn report_floats_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let text = canonical_json(&serde_json::json!({ "x": x }));
        let raw = text.trim().trim_start_matches("{\"x\":").trim_end_matches('}');
        prop_assert_eq!(raw.parse::<f64>().unwrap(), x);
    }
}
