//! Type invariants as properties.

use std::sync::Arc;

use l1h_core::approx::{approximate_normalized, PipelineOptions};
use l1h_core::functions::{heaviside, normalize, Branch, HeavisideTypeFunction, Measure, Transform};
use l1h_core::hobbyrice::{oscillating_moment, solve_canonical_points, CanonicalPointSet, SignChangeFunction};
use l1h_core::poly::PiecewisePoly;
use l1h_core::spaces::{hermite_spline_space, polynomial_space, KnotVector, SpaceKind};
use l1h_core::verify::{verify, VerifyOptions};
use proptest::prelude::*;

fn increasing(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.999f64..0.999, len).prop_filter_map("needs distinct values", |mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        (!v.is_empty()).then_some(v)
    })
}

fn positive_points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 0..6).prop_filter_map("needs distinct values", |mut v| {
        v.sort_by(f64::total_cmp);
        let len = v.len();
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        (v.len() == len).then_some(v)
    })
}

fn symmetric_knots() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, 0..3).prop_map(|mut half| {
        half.sort_by(f64::total_cmp);
        half.dedup_by(|a, b| (*a - *b).abs() < 0.05);
        let mut knots: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        knots.push(0.0);
        knots.extend(half);
        knots.insert(0, -1.0);
        knots.push(1.0);
        knots
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_pins_endpoints_and_increases(
        a in -10.0f64..5.0,
        width in 0.1f64..10.0,
        frac in 0.05f64..0.95,
    ) {
        let b = a + width;
        let delta = a + frac * width;
        let t = Transform::for_jump(a, delta, b).unwrap();
        prop_assert!((t.to_normalized(a) + 1.0).abs() < 1e-12);
        prop_assert!(t.to_normalized(delta).abs() < 1e-12);
        prop_assert!((t.to_normalized(b) - 1.0).abs() < 1e-12);
        let mut last = f64::NEG_INFINITY;
        for i in 0..=200 {
            let x = a + width * i as f64 / 200.0;
            let y = t.to_normalized(x);
            prop_assert!(y > last);
            prop_assert!((t.to_original(y) - x).abs() <= 1e-10 * (1.0 + x.abs()));
            last = y;
        }
    }

    #[test]
    fn normalized_jump_sits_at_zero(
        a in -5.0f64..0.0,
        width in 0.5f64..6.0,
        frac in 0.1f64..0.9,
        low in -3.0f64..3.0,
        high in -3.0f64..3.0,
    ) {
        let b = a + width;
        let f = HeavisideTypeFunction::new((a, b), a + frac * width, Branch::Constant(low), Branch::Constant(high)).unwrap();
        let p = normalize(&f).unwrap();
        prop_assert_eq!(p.function().domain(), (-1.0, 1.0));
        prop_assert_eq!(p.function().jump_location(), 0.0);
        prop_assert_eq!(p.function().is_degenerate(), low == high);
        for i in 1..20 {
            let t = -1.0 + i as f64 / 10.0;
            let x = p.transform().to_original(t);
            prop_assert!((p.function().eval(t).unwrap() - f.eval(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_must_be_positive(shift in -2.0f64..2.0, slope in -1.0f64..1.0) {
        let positive = (-1..=1).all(|s| shift + slope * s as f64 > 0.0);
        let measure = Measure::weighted("affine", move |x| shift + slope * x);
        prop_assert_eq!(measure.is_ok(), positive);
    }

    #[test]
    fn knots_must_increase(knots in prop::collection::vec(-1.0f64..=1.0, 1..8)) {
        let ok = knots.windows(2).all(|w| w[0] < w[1]);
        prop_assert_eq!(KnotVector::new(knots).is_ok(), ok);
    }

    #[test]
    fn sign_function_alternates(breaks in increasing(1..8), lead in prop::bool::ANY) {
        let lead = if lead { 1.0 } else { -1.0 };
        let s = SignChangeFunction::new(breaks.clone(), lead).unwrap();
        let mut edges = vec![-1.0];
        edges.extend(&breaks);
        edges.push(1.0);
        for (i, w) in edges.windows(2).enumerate() {
            let expected = if i % 2 == 0 { lead } else { -lead };
            prop_assert_eq!(s.eval(0.5 * (w[0] + w[1])), expected);
        }
        let mut shuffled = breaks.clone();
        shuffled.reverse();
        prop_assert_eq!(SignChangeFunction::new(shuffled, lead).is_ok(), breaks.len() < 2);
    }

    #[test]
    fn canonical_points_are_symmetric(positive in positive_points()) {
        let set = CanonicalPointSet::new(positive.clone()).unwrap();
        let full = set.full_points();
        prop_assert_eq!(full.len(), 2 * positive.len() + 1);
        prop_assert!(full.contains(&0.0));
        for (a, b) in full.iter().zip(full.iter().rev()) {
            prop_assert_eq!(*a, -*b);
        }
        prop_assert!(full.windows(2).all(|w| w[0] < w[1]));
        let s = set.sign_function();
        // odd away from the breakpoints, and -1 just right of 0
        let mut edges = vec![0.0];
        edges.extend(&positive);
        edges.push(1.0);
        for (i, w) in edges.windows(2).enumerate() {
            let x = 0.5 * (w[0] + w[1]);
            prop_assert_eq!(s.eval(x), if i % 2 == 0 { -1.0 } else { 1.0 });
            prop_assert_eq!(s.eval(-x), -s.eval(x));
        }
    }

    #[test]
    fn polynomial_even_subspace_is_at_most_half(degree in 0usize..12) {
        let s = polynomial_space(degree);
        prop_assert_eq!(s.kind(), SpaceKind::Chebyshev);
        prop_assert_eq!(s.dimension(), degree + 1);
        prop_assert!(s.even_dimension() <= s.dimension().div_ceil(2));
    }

    #[test]
    fn hermite_members_are_ck(
        knots in increasing(2..6),
        k in 0usize..4,
        weights in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let n_knots = knots.len();
        let space = hermite_spline_space(KnotVector::new(knots.clone()).unwrap(), k).unwrap();
        let space = space.space();
        prop_assert_eq!(space.dimension(), n_knots * (k + 1));
        let terms: Vec<(f64, &PiecewisePoly)> = weights.iter().copied().zip(space.functions()).collect();
        let member = PiecewisePoly::linear_combination(&terms);
        prop_assert!(member.max_degree().unwrap_or(0) <= 2 * k + 1);
        for &knot in &knots[1..n_knots - 1] {
            for d in 0..=k {
                let dg = member.nth_derivative(d);
                let (left, right) = (dg.eval_left(knot), dg.eval(knot));
                let scale = 1.0 + left.abs().max(right.abs());
                prop_assert!((left - right).abs() <= 1e-8 * scale, "d = {} at {}", d, knot);
            }
        }
        // a central difference across each knot stays of order h
        let h = 1e-7;
        let dm = member.derivative();
        for &knot in &knots[1..n_knots - 1] {
            let jump = (member.eval(knot + h) - member.eval(knot - h)).abs();
            let slope = dm.eval(knot).abs().max(dm.eval_left(knot).abs());
            prop_assert!(jump <= 2.0 * h * slope + 1e-8 * (1.0 + member.eval(knot).abs()));
        }
    }
}

fn symmetric_knots_any() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.02f64..0.98, 0..4), prop::bool::ANY).prop_map(|(mut half, zero)| {
        half.sort_by(f64::total_cmp);
        half.dedup_by(|a, b| (*a - *b).abs() < 0.02);
        let mut knots: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        if zero {
            knots.push(0.0);
        }
        knots.extend(half);
        knots.insert(0, -1.0);
        knots.push(1.0);
        knots
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spline_points_zero_every_moment(
        knots in symmetric_knots_any(),
        k in 0usize..4,
        weighted in prop::bool::ANY,
    ) {
        prop_assume!(knots.len() * (k + 1) % 2 == 0);
        let space = hermite_spline_space(KnotVector::new(knots).unwrap(), k).unwrap().into_space();
        let measure = if weighted {
            Measure::weighted("1 + x^2", |x| 1.0 + x * x).unwrap()
        } else {
            Measure::Lebesgue
        };
        let solution = solve_canonical_points(&space, &measure, None).unwrap();
        prop_assert_eq!(solution.points.m(), space.dimension() / 2);
        for g in space.functions() {
            prop_assert!(oscillating_moment(&solution.points, g, &measure).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn approximant_interpolates_and_reports_are_nonnegative(
        knots in symmetric_knots(),
        k in prop::sample::select(vec![1usize, 3]),
        low in -2.0f64..2.0,
        step in 0.1f64..3.0,
        perturb in -0.2f64..0.2,
    ) {
        // an odd knot count needs odd k for an even dimension
        let space = hermite_spline_space(KnotVector::new(knots).unwrap(), k).unwrap().into_space();
        let problem = normalize(&heaviside(low, low + step)).unwrap();
        let a = approximate_normalized(problem.clone(), Arc::new(space), &PipelineOptions::default()).unwrap();
        prop_assert!(a.approximant.interpolation_residual() < 1e-9);

        let shifted: Vec<f64> = a.approximant.coefficients().iter().map(|c| c + perturb).collect();
        let g = a.approximant.with_coefficients(&problem, shifted).unwrap();
        let report = verify(&problem, &g, &VerifyOptions::default()).unwrap();
        prop_assert!(report.l1_error >= 0.0);
        prop_assert!(report.characterization_max >= 0.0);
        prop_assert!(report.zero_set_measure_estimate >= 0.0);
    }
}
