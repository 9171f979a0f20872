use std::collections::HashMap;

use contention::allocation::{
    exhaustive_search, scenario1_cost, scenario1_ground_truth, scenario2_entry_cost,
    scenario2_entry_ground_truth, CostModel, Method, Range, Scenario1Params, Scenario1Spec,
    Scenario2Params, Scenario2Spec,
};
use contention::mc::{simulate, SimConfig};
use contention::order_prob::{order_probability_partitioned, Partition};
use contention::{
    all_orders, enumerate_likely_orders, most_likely_order, order_probability, prune_orders,
    ArrivalProcess, Gaussian, Order, OrthantOptions, ProbabilityBackend, RankingMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn equal_spread(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian> {
    let s = rng.random_range(0.5..2.0);
    (0..n)
        .map(|_| Gaussian::from_std(rng.random_range(0.0..4.0), s).unwrap())
        .collect()
}

#[test]
fn enumeration_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..6 {
        let a = equal_spread(&mut rng, 4);
        let table: HashMap<Vec<usize>, f64> = all_orders(4)
            .into_iter()
            .map(|o| {
                (
                    o.sequence().to_vec(),
                    order_probability(&a, &o, 1e-6, case).unwrap(),
                )
            })
            .collect();
        let lookup = |_: &[Gaussian], o: &Order| Ok(table[o.sequence()]);
        let e = enumerate_likely_orders(&a, 1.0, &lookup, RankingMode::Strict).unwrap();
        assert_eq!(e.len(), 24);
        let probs: Vec<f64> = e.orders.iter().map(|o| o.probability.unwrap()).collect();
        for w in probs.windows(2) {
            assert!(w[0] >= w[1] - 1e-9, "case {case}: {probs:?}");
        }
        let mut sorted: Vec<f64> = table.values().copied().collect();
        sorted.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(probs, sorted);
        assert_eq!(
            e.orders[0].sequence(),
            most_likely_order(&a, RankingMode::Strict)
                .unwrap()
                .sequence()
        );
        assert_eq!(e.orders[0].swap_distance(&e.orders[1]), 1);
    }
}

#[test]
fn threshold_stops_early() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let a = equal_spread(&mut rng, 5);
    let full = enumerate_likely_orders(&a, 1.0, &ProbabilityBackend::exact(0), RankingMode::Strict)
        .unwrap();
    let part = enumerate_likely_orders(&a, 0.5, &ProbabilityBackend::exact(0), RankingMode::Strict)
        .unwrap();
    assert!(part.len() < full.len());
    assert!(part.mass >= 0.5);
    for (x, y) in part.orders.iter().zip(&full.orders) {
        assert_eq!(x.sequence(), y.sequence());
    }
}

#[test]
fn unequal_spreads_need_heuristic_mode() {
    let a = [
        Gaussian::from_std(0.0, 1.0).unwrap(),
        Gaussian::from_std(1.0, 2.0).unwrap(),
    ];
    assert!(most_likely_order(&a, RankingMode::Strict).is_err());
    let e = enumerate_likely_orders(
        &a,
        1.0,
        &ProbabilityBackend::exact(0),
        RankingMode::Heuristic,
    )
    .unwrap();
    assert!(e.heuristic);
    assert_eq!(e.len(), 2);
}

#[test]
fn partitioned_probability_factorizes() {
    // Two far-apart clusters: orders within each cluster are independent.
    let a: Vec<Gaussian> = [0.0, 0.5, 1.0, 50.0, 50.4]
        .iter()
        .map(|&m| Gaussian::from_std(m, 1.0).unwrap())
        .collect();
    let order = Order::new(vec![1, 0, 2, 4, 3]).unwrap();
    let opts = OrthantOptions::default().with_rel_tol(1e-6);
    let whole = order_probability(&a, &order, 1e-6, 5).unwrap();
    let split = Partition::new(vec![vec![0, 1, 2], vec![3, 4]], 5).unwrap();
    let parts = order_probability_partitioned(&a, &order, &split, &opts, 5).unwrap();
    assert!((whole - parts).abs() < 1e-5, "{whole} vs {parts}");
    assert!(Partition::new(vec![vec![0, 1], vec![3, 4]], 5).is_err());
}

#[test]
fn pruning_keeps_the_likely_orders() {
    let a: Vec<Gaussian> = [0.0, 0.3, 5.0, 5.2]
        .iter()
        .map(|&m| Gaussian::from_std(m, 0.5).unwrap())
        .collect();
    let kept = prune_orders(&a, 1e-6).unwrap();
    let kept_mass: f64 = kept
        .iter()
        .map(|o| order_probability(&a, o, 1e-6, 0).unwrap())
        .sum();
    assert_eq!(kept.len(), 4);
    assert!(kept_mass > 1.0 - 1e-4);
}

fn small_scenario1(seed: u64) -> Scenario1Spec {
    let params = Scenario1Params {
        types: 2,
        locations: 2,
        deadline: Range::new(18.0, 24.0),
        ..Scenario1Params::default()
    };
    Scenario1Spec::generate(&params, seed).unwrap()
}

#[test]
fn scenario1_analytical_cost_tracks_sampling() {
    for seed in 0..4 {
        let spec = small_scenario1(seed);
        let a = vec![vec![0, 1], vec![1, 0]];
        let analytical = scenario1_cost(&spec, &a, Method::Analytical { phi: 1.0 }, 0).unwrap();
        let truth = scenario1_ground_truth(&spec, &a, 1_000_000, seed).unwrap();
        let tol = 0.02 * truth.mean + 4.0 * truth.standard_error();
        assert!(
            (analytical - truth.mean).abs() <= tol,
            "seed {seed}: {analytical} vs {}",
            truth.mean
        );
    }
}

#[test]
fn scenario1_search_is_exhaustive() {
    let spec = small_scenario1(9);
    let (best, cost) = exhaustive_search(&spec, Method::Analytical { phi: 1.0 }, 0).unwrap();
    let candidates = [
        vec![vec![0, 1], vec![0, 1]],
        vec![vec![0, 1], vec![1, 0]],
        vec![vec![1, 0], vec![0, 1]],
        vec![vec![1, 0], vec![1, 0]],
    ];
    let costs: Vec<f64> = candidates
        .iter()
        .map(|a| scenario1_cost(&spec, a, Method::Analytical { phi: 1.0 }, 0).unwrap())
        .collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(cost, min);
    let first = costs.iter().position(|&c| c == min).unwrap();
    assert_eq!(best, candidates[first]);
}

#[test]
fn scenario2_contention_free_when_others_leave_early() {
    let params = Scenario2Params {
        robots: 2,
        uncontrolled: 1,
        ..Scenario2Params::default()
    };
    let mut spec = Scenario2Spec::generate(&params, 3).unwrap();
    for (j, others) in spec.uncontrolled.iter_mut().enumerate() {
        let sd = spec.arrival[0][j].std_dev();
        let arrival = Gaussian::from_std(
            spec.arrival[0][j].mean.min(spec.arrival[1][j].mean) - 50.0 * sd,
            sd,
        )
        .unwrap();
        others[0] = ArrivalProcess::new(0, arrival, Gaussian::from_std(1.0, 0.1).unwrap());
    }
    let model = CostModel::default();
    for i in 0..2 {
        for j in 0..2 {
            let got = scenario2_entry_cost(&spec, i, j, Method::Analytical { phi: 1.0 }, &model, 0)
                .unwrap();
            let alone = spec.arrival[i][j] + spec.service[i] + spec.delivery[j];
            let want = spec.cost_rate * alone.expected_tardiness(spec.deadline[j]);
            assert!((got - want).abs() < 1e-6 * (1.0 + want), "{got} vs {want}");
        }
    }
}

// Tardiness far in the tail depends on the shape of the finish distribution,
// which the model keeps only up to two moments; compare against the sampled
// moments rather than the sampled tardiness.
#[test]
fn scenario2_analytical_cost_tracks_sampled_moments() {
    let params = Scenario2Params {
        robots: 2,
        uncontrolled: 2,
        ..Scenario2Params::default()
    };
    let model = CostModel::default();
    for seed in 0..3 {
        let spec = Scenario2Spec::generate(&params, seed).unwrap();
        for j in 0..2 {
            let got = scenario2_entry_cost(&spec, 0, j, Method::Analytical { phi: 1.0 }, &model, 0)
                .unwrap();
            let ps = spec.location_processes(0, j);
            let sim = simulate(&ps, &SimConfig::fifo(400_000, seed)).unwrap();
            let fitted = sim.finish[ps.len() - 1].to_gaussian() + spec.delivery[j];
            let want = spec.cost_rate * fitted.expected_tardiness(spec.deadline[j]);
            assert!(
                (got - want).abs() <= 0.1 * want + 0.01,
                "seed {seed} location {j}: {got} vs {want}"
            );
            let truth = scenario2_entry_ground_truth(&spec, 0, j, 400_000, seed);
            assert!((got - truth.mean).abs() <= 0.5 * truth.mean + 0.05);
        }
    }
}
