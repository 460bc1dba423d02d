use proptest::prelude::*;
use qnr_core::essential::{convex_combination_sequence, essential_bild, truncate, ModelOperator};
use qnr_core::jacobi::smallest_singular_value;
use qnr_core::lancaster::iconv;
use qnr_core::matrix::{delta, polarization};
use qnr_core::nr::{angle_grid, outer_polygon, upper_bild, upper_bild_support, BildConfig, Support};
use qnr_core::spectrum::{delta_sigma_min, s_spectrum, singularity_threshold};
use qnr_core::{csim, inner, ConvexPolygon, DirectSum, Point2, QMatrix, QVector, Quaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn quat() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-10.0f64..10.0).prop_map(Quaternion::from)
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|_| Point2::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0)))
        .collect()
}

proptest! {
    #[test]
    fn norm_is_multiplicative(p in quat(), q in quat()) {
        let lhs = (p * q).norm();
        prop_assert!((lhs - p.norm() * q.norm()).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn conjugation_reverses_products(p in quat(), q in quat()) {
        let diff = (p * q).conj().max_abs_diff(q.conj() * p.conj());
        prop_assert!(diff <= 1e-12 * (1.0 + p.norm() * q.norm()));
    }

    #[test]
    fn csim_is_invariant_on_orbits(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = Quaternion::random_gaussian(&mut r);
        let u = Quaternion::random_unit(&mut r);
        let (a, b) = (csim(q), csim(q.similar_by(u)));
        prop_assert!(a.distance(b) <= 1e-12);
    }

    #[test]
    fn products_are_right_linear(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let t = QMatrix::random_gaussian(n, &mut r);
        let x = QVector::random_unit(n, &mut r);
        let y = QVector::random_unit(n, &mut r);
        let q = Quaternion::random_gaussian(&mut r);
        let lhs = t.apply(&x.mul_right(q)).unwrap();
        let rhs = t.apply(&x).unwrap().mul_right(q);
        prop_assert!(lhs.sub(&rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        let ip = inner(&x.mul_right(q), &y).unwrap();
        prop_assert!(ip.max_abs_diff(inner(&x, &y).unwrap() * q) <= 1e-12 * (1.0 + q.norm()));
    }

    #[test]
    fn polarization_recovers_the_sesquilinear_form(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let t = QMatrix::random_gaussian(n, &mut r);
        let x = QVector::random_unit(n, &mut r);
        let y = QVector::random_unit(n, &mut r);
        let direct = inner(&t.apply(&x).unwrap(), &y).unwrap();
        prop_assert!(polarization(&t, &x, &y).unwrap().max_abs_diff(direct) <= 1e-10);
    }

    #[test]
    fn delta_depends_on_the_sphere_only(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let t = QMatrix::random_gaussian(n, &mut r);
        let q = Quaternion::random_gaussian(&mut r);
        let u = Quaternion::random_unit(&mut r);
        let d0 = delta(&t, q);
        let d1 = delta(&t, q.similar_by(u));
        prop_assert!(d0.max_abs_diff(&d1) <= 1e-10);
    }

    #[test]
    fn real_representation_is_multiplicative(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let a = QMatrix::random_gaussian(n, &mut r);
        let b = QMatrix::random_gaussian(n, &mut r);
        let lhs = a.matmul(&b).real_rep();
        let rhs = a.real_rep() * b.real_rep();
        prop_assert!((lhs - rhs).amax() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_spheres_make_delta_singular(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let t = QMatrix::random_gaussian(n, &mut r);
        let spheres = s_spectrum(&t).unwrap();
        prop_assert!(!spheres.is_empty() && spheres.len() <= n);
        for s in spheres.spheres() {
            prop_assert!(delta_sigma_min(&t, s.representative()).unwrap() <= singularity_threshold(&t));
        }
        // a point off the spectrum keeps Δ_q invertible
        let far = Quaternion::real(10.0 * (1.0 + t.frobenius_norm()));
        let sigma = smallest_singular_value(&delta(&t, far).real_rep()).unwrap();
        prop_assert!(sigma > singularity_threshold(&t));
    }

    #[test]
    fn supports_scale_and_shift(seed in any::<u64>(), n in 1usize..4, a in 0.1f64..3.0, b in -2.0f64..2.0) {
        let mut r = rng(seed);
        let op = DirectSum::from(QMatrix::random_gaussian(n, &mut r));
        let moved = op.affine(a, b);
        for theta in angle_grid(13) {
            let h = upper_bild_support(&op, theta).unwrap();
            let hm = upper_bild_support(&moved, theta).unwrap();
            prop_assert!((hm - (a * h + b * theta.cos())).abs() <= 1e-9 * (1.0 + hm.abs()));
        }
    }

    #[test]
    fn finer_angle_grids_shrink_the_outer_polygon(seed in any::<u64>(), n in 1usize..4, k in 3usize..40) {
        let mut r = rng(seed);
        let op = DirectSum::from(QMatrix::random_gaussian(n, &mut r));
        let radius = op.norm_bound();
        let fine: Vec<Support> = angle_grid(2 * k - 1)
            .into_iter()
            .map(|theta| Support { theta, value: upper_bild_support(&op, theta).unwrap() })
            .collect();
        // θ_t on the k-grid is θ_{2t} on the (2k − 1)-grid
        let coarse: Vec<Support> = fine.iter().step_by(2).copied().collect();
        let outer_fine = outer_polygon(&fine, radius).unwrap();
        let outer_coarse = outer_polygon(&coarse, radius).unwrap();
        for &v in outer_fine.vertices() {
            prop_assert!(outer_coarse.contains(v, 1e-9 * (1.0 + radius)));
        }
        prop_assert!(outer_fine.area() <= outer_coarse.area() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outer_polygon_contains_attained_points(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let op = DirectSum::from(QMatrix::random_gaussian(n, &mut r));
        let region = upper_bild(&op, &BildConfig { samples: 4000, angles: 48, seed, refine: true }).unwrap();
        let slack = 1e-9 * (1.0 + region.norm_bound);
        for &p in &region.inner_points {
            prop_assert!(region.outer_polygon.contains(p, slack));
        }
        prop_assert!(region.hausdorff_gap >= 0.0);
    }

    #[test]
    fn combination_sequences_reach_convex_combinations(seed in any::<u64>(), grid in 0usize..11) {
        let mut r = rng(seed);
        let model = ModelOperator::random_periodic(&mut r, 2, 3);
        let t = truncate(&model, 1000).unwrap();
        let values = match model.tail() {
            qnr_core::essential::Tail::Periodic { values } => values.clone(),
            _ => unreachable!(),
        };
        let alpha_sq = grid as f64 / 10.0;
        let depth = 50;
        let c = convex_combination_sequence(&t, values[0], values[1], alpha_sq, depth).unwrap();
        let target = values[0] * alpha_sq + values[1] * (1.0 - alpha_sq);
        let last = *c.sequence.values.last().unwrap();
        prop_assert!((last - target).norm() <= 5.0 * (2.0 + model.norm_bound()) / depth as f64);
        for s in &c.steps {
            prop_assert!(s.bounds.iter().all(|&b| b <= 1.0 / s.p as f64));
        }
    }
}

proptest! {
    #[test]
    fn essential_bild_ignores_the_block(seed in any::<u64>(), n in 0usize..4) {
        let mut r = rng(seed);
        let model = ModelOperator::random_periodic(&mut r, 2, 4);
        let other = model.with_block(QMatrix::random_gaussian(n, &mut r));
        prop_assert_eq!(essential_bild(&model).unwrap(), essential_bild(&other).unwrap());
    }

    #[test]
    fn essential_bild_is_adjoint_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = ModelOperator::random_periodic(&mut r, 2, 4);
        prop_assert_eq!(essential_bild(&model).unwrap(), essential_bild(&model.adjoint()).unwrap());
    }

    #[test]
    fn essential_bild_follows_real_affine_maps(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let model = ModelOperator::random_periodic(&mut r, 2, 4);
        let image = essential_bild(&model.affine(a, b)).unwrap();
        let mapped = essential_bild(&model).unwrap().map_affine(a, b, a.abs(), 0.0);
        prop_assert_eq!(image.sorted_vertices(), mapped.sorted_vertices());
    }

    #[test]
    fn constant_tails_are_essential(q in quat()) {
        let s = csim(q);
        let e = essential_bild(&ModelOperator::constant(q)).unwrap();
        prop_assert_eq!(e.distance(Point2::new(s.a, s.b)), 0.0);
    }

    #[test]
    fn periodic_symbols_are_essential(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = ModelOperator::random_periodic(&mut r, 1, 5);
        let e = essential_bild(&model).unwrap();
        for q in model.tail().symbols(5) {
            let s = csim(q);
            prop_assert_eq!(e.distance(Point2::new(s.a, s.b)), 0.0);
        }
    }

    #[test]
    fn iconv_with_one_satellite_is_the_hull(seed in any::<u64>(), m in 1usize..6) {
        let mut r = rng(seed);
        let pts = points(&mut r, m);
        let s = points(&mut r, 1)[0];
        let base = ConvexPolygon::hull(&pts).unwrap();
        let region = iconv(&base, &[s]).unwrap();
        let mut all = pts.clone();
        all.push(s);
        let hull = ConvexPolygon::hull(&all).unwrap();
        prop_assert!(region.hausdorff(&hull) <= 1e-12);
        prop_assert!(region.contains(s, 0.0));
    }

    #[test]
    fn iconv_is_monotone(seed in any::<u64>(), m in 1usize..5, k in 1usize..8) {
        let mut r = rng(seed);
        let base_pts = points(&mut r, m);
        let extra = points(&mut r, 2);
        let sats = points(&mut r, k + 2);
        let small_base = ConvexPolygon::hull(&base_pts).unwrap();
        let big_base = ConvexPolygon::hull(&[base_pts.clone(), extra].concat()).unwrap();
        let small = iconv(&small_base, &sats[..k]).unwrap();
        let more_sats = iconv(&small_base, &sats).unwrap();
        let bigger_base = iconv(&big_base, &sats[..k]).unwrap();
        for i in 0..=40 {
            for j in 0..=20 {
                let p = Point2::new(-2.0 + 0.1 * i as f64, 0.1 * j as f64);
                if small.contains(p, 0.0) {
                    prop_assert!(more_sats.contains(p, 1e-12));
                    prop_assert!(bigger_base.contains(p, 1e-12));
                }
            }
        }
        for &s in &sats {
            prop_assert!(more_sats.contains(s, 1e-12));
        }
        for &v in small_base.vertices() {
            prop_assert!(small.contains(v, 0.0));
        }
    }
}
