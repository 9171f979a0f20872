//! Probabilities of arrival orders.
//!
//! The probability that independent arrivals `T_{o(1)} < … < T_{o(n)}` occur
//! in a given order equals the orthant probability of the `n − 1` successive
//! differences `T_{o(i)} − T_{o(i+1)}`, whose covariance is tridiagonal.

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::order::Order;
use crate::orthant::{mvn_orthant_prob, MvnSpec, OrthantEstimate, OrthantOptions};
use crate::scalar::Scalar;
use crate::special::std_normal_cdf;

/// `P(X < Y)` for independent normals.
///
/// When both variances are zero the result is 1, 0 or ½ according to the means.
pub fn pairwise_before_prob<T: Scalar>(x: &Gaussian<T>, y: &Gaussian<T>) -> T {
    let var = x.variance + y.variance;
    let gap = y.mean - x.mean;
    if var <= T::zero() {
        return if gap > T::zero() {
            T::one()
        } else if gap < T::zero() {
            T::zero()
        } else {
            T::lit(0.5)
        };
    }
    std_normal_cdf(gap / var.sqrt())
}

/// Distribution of the successive differences of `arrivals` taken in `order`.
pub fn build_difference_mvn(arrivals: &[Gaussian], order: &Order) -> Result<MvnSpec> {
    order.check_len(arrivals.len())?;
    let seq = order.sequence();
    let n = seq.len();
    if n < 2 {
        return Err(Error::TooFewArrivals(n));
    }
    let m = n - 1;
    let mut mean = Vec::with_capacity(m);
    let mut cov = vec![0.0; m * m];
    for i in 0..m {
        let a = &arrivals[seq[i]];
        let b = &arrivals[seq[i + 1]];
        mean.push(a.mean - b.mean);
        cov[i * m + i] = a.variance + b.variance;
        if i + 1 < m {
            cov[i * m + i + 1] = -b.variance;
            cov[(i + 1) * m + i] = -b.variance;
        }
    }
    MvnSpec::new(mean, cov)
}

/// A partition of robots into groups whose arrival orders are independent of
/// each other (for example robots contending for different resources).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `groups` cover `0..n` exactly once.
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in groups.iter().flatten() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!(
                    "robot {i} is not a valid unique member of the partition"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter(
                "partition does not cover every robot".into(),
            ));
        }
        Ok(Self { groups })
    }

    /// All robots in one group.
    pub fn single(n: usize) -> Self {
        Self {
            groups: vec![(0..n).collect()],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Orthant probability of `order` with its integration error.
pub fn order_probability_estimate(
    arrivals: &[Gaussian],
    order: &Order,
    options: &OrthantOptions,
    seed: u64,
) -> Result<OrthantEstimate> {
    order.check_len(arrivals.len())?;
    let seq = order.sequence();
    match seq.len() {
        0 | 1 => Ok(OrthantEstimate {
            probability: 1.0,
            error: 0.0,
            points: 0,
        }),
        2 => Ok(OrthantEstimate {
            probability: pairwise_before_prob(&arrivals[seq[0]], &arrivals[seq[1]]),
            error: 0.0,
            points: 0,
        }),
        _ => mvn_orthant_prob(&build_difference_mvn(arrivals, order)?, options, seed),
    }
}

/// Probability that the arrivals occur in `order`, all robots treated as one group.
pub fn order_probability(
    arrivals: &[Gaussian],
    order: &Order,
    rel_tol: f64,
    seed: u64,
) -> Result<f64> {
    let options = OrthantOptions::default().with_rel_tol(rel_tol);
    Ok(order_probability_estimate(arrivals, order, &options, seed)?.probability)
}

/// Probability of `order` as the product of the probabilities of its
/// restrictions to each independent group.
pub fn order_probability_partitioned(
    arrivals: &[Gaussian],
    order: &Order,
    partition: &Partition,
    options: &OrthantOptions,
    seed: u64,
) -> Result<f64> {
    order.check_len(arrivals.len())?;
    let pos = order.positions();
    let mut p = 1.0;
    for group in partition.groups() {
        let mut members = group.clone();
        members.sort_by_key(|&i| pos[i]);
        let sub_arrivals: Vec<Gaussian> = members.iter().map(|&i| arrivals[i]).collect();
        let sub_order = Order::identity(members.len());
        p *= order_probability_estimate(&sub_arrivals, &sub_order, options, seed)?.probability;
    }
    Ok(p)
}

/// Product of successive pairwise probabilities, an upper bound on the order probability.
pub fn estimate_order_probability<T: Scalar>(arrivals: &[Gaussian<T>], order: &Order) -> Result<T> {
    order.check_len(arrivals.len())?;
    Ok(order.sequence().windows(2).fold(T::one(), |acc, w| {
        acc * pairwise_before_prob(&arrivals[w[0]], &arrivals[w[1]])
    }))
}

/// All orders, in lexicographic sequence, in which no robot precedes another
/// it has probability below `epsilon` of arriving before.
pub fn prune_orders<T: Scalar>(arrivals: &[Gaussian<T>], epsilon: T) -> Result<Vec<Order>> {
    if !(epsilon >= T::zero() && epsilon < T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!(
            "pruning threshold {:?} is outside [0, 0.5)",
            epsilon
        )));
    }
    let n = arrivals.len();
    let mut allowed = vec![vec![true; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                allowed[i][j] = pairwise_before_prob(&arrivals[i], &arrivals[j]) >= epsilon;
            }
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n);
    let mut used = vec![false; n];
    extend_pruned(&allowed, &mut prefix, &mut used, &mut out);
    Ok(out)
}

fn extend_pruned(
    allowed: &[Vec<bool>],
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Order>,
) {
    let n = used.len();
    if prefix.len() == n {
        out.push(Order::new(prefix.clone()).expect("prefix is a permutation"));
        return;
    }
    for r in 0..n {
        if used[r] || !(0..n).all(|j| used[j] || j == r || allowed[r][j]) {
            continue;
        }
        used[r] = true;
        prefix.push(r);
        extend_pruned(allowed, prefix, used, out);
        prefix.pop();
        used[r] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::all_orders;

    fn g(m: f64, v: f64) -> Gaussian {
        Gaussian::new(m, v).unwrap()
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_before_prob(&g(0.0, 1.0), &g(0.0, 1.0)), 0.5);
        assert!(1.0 - pairwise_before_prob(&g(0.0, 1.0), &g(100.0, 1.0)) < 1e-12);
        let p = pairwise_before_prob(&g(0.0, 1.0), &g(1.0, 1.0));
        assert!((p - 0.760_249_938_906_523_3).abs() < 1e-12, "{p}");
        assert_eq!(
            pairwise_before_prob(&Gaussian::point(1.0), &Gaussian::point(2.0)),
            1.0
        );
        assert_eq!(
            pairwise_before_prob(&Gaussian::point(2.0), &Gaussian::point(1.0)),
            0.0
        );
        assert_eq!(
            pairwise_before_prob(&Gaussian::point(2.0), &Gaussian::point(2.0)),
            0.5
        );
    }

    #[test]
    fn difference_mvn_examples() {
        let arr = [g(1.0, 1.0), g(2.0, 4.0), g(3.0, 9.0)];
        let spec = build_difference_mvn(&arr, &Order::identity(3)).unwrap();
        assert_eq!(spec.mean, vec![-1.0, -1.0]);
        assert_eq!(spec.covariance, vec![5.0, -4.0, -4.0, 13.0]);
        let spec = build_difference_mvn(&arr, &Order::new(vec![2, 0, 1]).unwrap()).unwrap();
        assert_eq!(spec.mean, vec![2.0, -1.0]);
        assert_eq!(spec.covariance, vec![10.0, -1.0, -1.0, 5.0]);
        let spec = build_difference_mvn(&arr[..2], &Order::identity(2)).unwrap();
        assert_eq!((spec.mean[0], spec.covariance[0]), (-1.0, 5.0));
        assert!(build_difference_mvn(&arr[..1], &Order::identity(1)).is_err());
    }

    #[test]
    fn two_robot_order_is_pairwise() {
        let arr = [g(0.3, 2.0), g(-0.2, 0.5)];
        let p = order_probability(&arr, &Order::new(vec![1, 0]).unwrap(), 1e-4, 0).unwrap();
        assert_eq!(p, pairwise_before_prob(&arr[1], &arr[0]));
        let est = estimate_order_probability(&arr, &Order::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(p, est);
    }

    #[test]
    fn disjoint_groups_multiply() {
        let arr = [g(0.0, 1.0), g(1.0, 2.0), g(0.5, 1.0), g(0.2, 0.3)];
        let part = Partition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let order = Order::new(vec![3, 0, 2, 1]).unwrap();
        let p = order_probability_partitioned(&arr, &order, &part, &OrthantOptions::default(), 0)
            .unwrap();
        let want = pairwise_before_prob(&arr[0], &arr[1]) * pairwise_before_prob(&arr[3], &arr[2]);
        assert_eq!(p, want);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::new(vec![vec![1], vec![0]], 2).is_ok());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let arr = [g(0.0, 1.0), g(0.4, 1.5), g(0.9, 0.7), g(0.2, 1.0)];
        let total: f64 = all_orders(4)
            .iter()
            .map(|o| order_probability(&arr, o, 1e-4, 5).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn estimate_bounds_exact() {
        let arr = [g(0.0, 1.0), g(0.3, 1.0), g(0.6, 1.0)];
        let order = Order::identity(3);
        let exact = order_probability(&arr, &order, 1e-6, 1).unwrap();
        let est = estimate_order_probability(&arr, &order).unwrap();
        assert!(est >= exact, "{est} < {exact}");
    }

    #[test]
    fn pruning_examples() {
        // B almost surely arrives after A: only orders with A before B survive.
        let arr = [g(0.0, 0.01), g(5.0, 0.01), g(2.5, 10.0)];
        let names: Vec<String> = prune_orders(&arr, 1e-3)
            .unwrap()
            .iter()
            .map(|o| o.to_string())
            .collect();
        assert_eq!(names, ["ABC", "ACB", "CAB"]);
        assert_eq!(prune_orders(&arr, 0.0).unwrap().len(), 6);
        let apart = [g(0.0, 1.0), g(20.0, 1.0), g(40.0, 1.0)];
        assert_eq!(
            prune_orders(&apart, 1e-6).unwrap(),
            vec![Order::identity(3)]
        );
        assert!(prune_orders(&apart, 0.5).is_err());
    }
}
