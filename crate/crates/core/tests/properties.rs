use contention::allocation::{assignment_cost, hungarian_assign};
use contention::order_prob::order_probability_estimate;
use contention::{
    all_orders, build_difference_mvn, clark_max, condition_on_order, estimate_order_probability,
    most_likely_order, mvn_orthant_prob, neighbor_orders, pairwise_before_prob,
    propagate_specified, ArrivalProcess, CalibratedRule, Gaussian, GaussianF32, MvnSpec, Order,
    OrthantOptions, RankingMode,
};
use proptest::prelude::*;

fn gaussian() -> impl Strategy<Value = Gaussian> {
    (-20.0..20.0f64, 0.05..5.0f64).prop_map(|(m, s)| Gaussian::from_std(m, s).unwrap())
}

fn arrivals(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Gaussian>> {
    prop::collection::vec((0.0..10.0f64, 0.3..3.0f64), n).prop_map(|v| {
        v.into_iter()
            .map(|(m, s)| Gaussian::from_std(m, s).unwrap())
            .collect()
    })
}

fn equal_spread(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Gaussian>> {
    (prop::collection::vec(0.0..6.0f64, n), 0.3..3.0f64).prop_map(|(ms, s)| {
        ms.into_iter()
            .map(|m| Gaussian::from_std(m, s).unwrap())
            .collect()
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Order> {
    Just((0..n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Order::new(v).unwrap())
}

fn with_order(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<Gaussian>, Order)> {
    arrivals(n).prop_flat_map(|a| {
        let n = a.len();
        (Just(a), permutation(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pairwise_complements(x in gaussian(), y in gaussian()) {
        let p = pairwise_before_prob(&x, &y) + pairwise_before_prob(&y, &x);
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_increases_with_gap(x in gaussian(), y in gaussian(), shift in 0.01..5.0f64) {
        let later = Gaussian::new(y.mean + shift, y.variance).unwrap();
        prop_assert!(pairwise_before_prob(&x, &later) >= pairwise_before_prob(&x, &y));
    }

    #[test]
    fn clark_max_dominates_means(x in gaussian(), y in gaussian()) {
        let m = clark_max(&x, &y);
        prop_assert!(m.mean >= x.mean.max(y.mean) - 1e-12);
        prop_assert!(m.variance >= 0.0);
        prop_assert!(m.variance <= x.variance.max(y.variance) + 1e-9);
        let r = clark_max(&y, &x);
        prop_assert!((m.mean - r.mean).abs() < 1e-9 && (m.variance - r.variance).abs() < 1e-9);
    }

    #[test]
    fn single_precision_follows_double(x in gaussian(), y in gaussian()) {
        let (xf, yf) = (
            GaussianF32::new(x.mean as f32, x.variance as f32).unwrap(),
            GaussianF32::new(y.mean as f32, y.variance as f32).unwrap(),
        );
        let (m, mf) = (clark_max(&x, &y), clark_max(&xf, &yf));
        prop_assert!((m.mean - mf.mean as f64).abs() < 1e-4 * (1.0 + m.mean.abs()));
        prop_assert!((pairwise_before_prob(&x, &y) - pairwise_before_prob(&xf, &yf) as f64).abs() < 1e-5);
    }

    #[test]
    fn tardiness_bounds(t in gaussian(), deadline in -30.0..30.0f64) {
        let e = t.expected_tardiness(deadline);
        prop_assert!(e >= (t.mean - deadline).max(0.0) - 1e-12);
        prop_assert!(e <= (t.mean - deadline).max(0.0) + t.std_dev());
    }

    #[test]
    fn mixture_of_copies_is_the_copy(x in gaussian(), w in prop::collection::vec(0.01..3.0f64, 1..5)) {
        let m = Gaussian::mixture(w.iter().map(|&w| (w, x))).unwrap();
        prop_assert!((m.mean - x.mean).abs() < 1e-9 * (1.0 + x.mean.abs()));
        prop_assert!((m.variance - x.variance).abs() < 1e-6 * (1.0 + x.variance + x.mean * x.mean));
    }

    #[test]
    fn mixture_mean_is_weighted(x in gaussian(), y in gaussian(), w in 0.0..1.0f64) {
        let m = Gaussian::mixture([(w, x), (1.0 - w, y)]).unwrap();
        prop_assert!((m.mean - (w * x.mean + (1.0 - w) * y.mean)).abs() < 1e-9);
        prop_assert!(m.variance + 1e-9 >= w * x.variance + (1.0 - w) * y.variance);
    }

    #[test]
    fn difference_transform_is_s_sigma_st((a, order) in with_order(2..=6)) {
        let spec = build_difference_mvn(&a, &order).unwrap();
        let seq = order.sequence();
        let n = seq.len();
        // Row k of S picks +X_{seq[k]} and -X_{seq[k+1]}.
        let s = |k: usize, r: usize| -> f64 {
            if r == seq[k] { 1.0 } else if r == seq[k + 1] { -1.0 } else { 0.0 }
        };
        for i in 0..n - 1 {
            let mean: f64 = (0..n).map(|r| s(i, r) * a[r].mean).sum();
            prop_assert!((spec.mean[i] - mean).abs() < 1e-12);
            for j in 0..n - 1 {
                let c: f64 = (0..n).map(|r| s(i, r) * s(j, r) * a[r].variance).sum();
                prop_assert!((spec.cov(i, j) - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn specified_service_never_starts_early(a in arrivals(1..=6), d in arrivals(6..=6)) {
        let n = a.len();
        let ps: Vec<_> = (0..n).map(|i| ArrivalProcess::new(i, a[i], d[i])).collect();
        let order = Order::identity(n);
        let t = propagate_specified(&ps, &order).unwrap();
        for i in 0..n {
            prop_assert!(t.start[i].mean >= a[i].mean - 1e-9);
            prop_assert!((t.finish[i].mean - t.start[i].mean - d[i].mean).abs() < 1e-9);
            if i > 0 {
                prop_assert!(t.start[i].mean >= t.finish[i - 1].mean - 1e-9);
            }
        }
    }

    #[test]
    fn conditioned_means_follow_order((a, order) in (equal_spread(2..=6)).prop_flat_map(|a| {
        let n = a.len();
        (Just(a), permutation(n))
    })) {
        // The sequential approximation may misorder means of very unlikely orders.
        let p: f64 = estimate_order_probability(&a, &order).unwrap();
        prop_assume!(p >= 0.01);
        let rule = CalibratedRule::default_rule();
        if let Ok(c) = condition_on_order(&a, &order, &rule) {
            for w in order.sequence().windows(2) {
                prop_assert!(c[w[0]].mean <= c[w[1]].mean + 1e-9, "{:?}", c);
            }
        }
    }

    #[test]
    fn most_likely_order_beats_neighbours(a in equal_spread(2..=5)) {
        let best = most_likely_order(&a, RankingMode::Strict).unwrap();
        let p: f64 = estimate_order_probability(&a, &best).unwrap();
        for nb in neighbor_orders(&best) {
            prop_assert!(estimate_order_probability::<f64>(&a, &nb).unwrap() <= p + 1e-12);
        }
    }

    #[test]
    fn hungarian_matches_brute_force(c in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 5), 5)) {
        let a = hungarian_assign(&c).unwrap();
        let best = all_orders(5)
            .iter()
            .map(|o| assignment_cost(&c, o.sequence()))
            .fold(f64::INFINITY, f64::min);
        prop_assert!((assignment_cost(&c, &a) - best).abs() < 1e-9);
        let mut cols = a.clone();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..5).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn order_probabilities_sum_to_one(a in arrivals(3..=4), seed in any::<u64>()) {
        let total: f64 = all_orders(a.len())
            .iter()
            .map(|o| order_probability_estimate(&a, o, &OrthantOptions::default(), seed).unwrap().probability)
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn estimate_bounds_exact((a, order) in with_order(3..=5)) {
        let opts = OrthantOptions { abs_tol: 1e-8, ..OrthantOptions::default() };
        let exact = order_probability_estimate(&a, &order, &opts, 1).unwrap();
        let est: f64 = estimate_order_probability(&a, &order).unwrap();
        prop_assert!(est >= exact.probability - exact.error - 1e-9);
    }

    #[test]
    fn orthant_grows_with_the_region(m in prop::collection::vec(-2.0..2.0f64, 3), shift in 0.0..2.0f64) {
        let cov = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let opts = OrthantOptions::default().with_rel_tol(1e-6);
        let lo = mvn_orthant_prob(&MvnSpec::new(m.clone(), cov.clone()).unwrap(), &opts, 3).unwrap();
        let shifted: Vec<f64> = m.iter().map(|v| v - shift).collect();
        let hi = mvn_orthant_prob(&MvnSpec::new(shifted, cov).unwrap(), &opts, 3).unwrap();
        prop_assert!(hi.probability >= lo.probability - hi.error - lo.error);
    }
}
