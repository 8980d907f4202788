//! Exhaustive optimum over all center subsets.

use crate::error::{Error, Result};
use crate::instance::CostTable;
use crate::metric::Objective;
use crate::solution::ClusteringSolution;

/// Largest number of center subsets the oracle will enumerate.
pub const MAX_SUBSETS: u128 = 100_000;
/// Largest number of clients the oracle will evaluate per subset.
pub const MAX_CLIENTS: usize = 256;

/// Number of `r`-subsets of `n` items, saturating.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact (k,t) optimum with centers drawn from the table's facilities.
///
/// Every subset of `min(k, n_f)` facilities is tried; for fixed centers the
/// most expensive copies are excluded first, which is optimal for all three
/// objectives. The first subset in lexicographic order attaining the minimum
/// is returned.
pub fn exact_oracle(table: &CostTable<'_>, k: usize, t: u64, obj: Objective) -> Result<ClusteringSolution> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n_f = table.n_facilities();
    if n_f == 0 {
        return Err(Error::DegenerateInstance("no candidate centers".into()));
    }
    let r = k.min(n_f);
    let subsets = binomial(n_f, r);
    if subsets > MAX_SUBSETS || table.n_clients() > MAX_CLIENTS {
        return Err(Error::OracleSizeLimit(format!(
            "{subsets} center subsets over {} clients",
            table.n_clients()
        )));
    }
    let budget = t.min(table.total_weight());
    let mut combo: Vec<usize> = (0..r).collect();
    let mut best = table.evaluate(&combo, budget, obj);
    while next_combination(&mut combo, n_f) {
        let sol = table.evaluate(&combo, budget, obj);
        if sol.cost < best.cost {
            best = sol;
        }
    }
    Ok(best)
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let r = combo.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if combo[i] < n - r + i {
            combo[i] += 1;
            for j in i + 1..r {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{MetricSpace, PointRef, WeightedPoint};

    fn line() -> MetricSpace {
        MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap()
    }

    fn table(s: &MetricSpace) -> CostTable<'_> {
        let pts: Vec<WeightedPoint> = s.points().map(WeightedPoint::unit).collect();
        CostTable::for_points(s, &pts).unwrap()
    }

    #[test]
    fn line_instance() {
        let s = line();
        let t = table(&s);
        let sol = exact_oracle(&t, 2, 1, Objective::Median).unwrap();
        assert_eq!(sol.cost, 2.0);
        assert_eq!(sol.outliers(), vec![4]);
        assert_eq!(exact_oracle(&t, 2, 1, Objective::Center).unwrap().cost, 1.0);
    }

    #[test]
    fn trivial_cases() {
        let s = line();
        let t = table(&s);
        assert_eq!(exact_oracle(&t, 5, 0, Objective::Median).unwrap().cost, 0.0);
        assert_eq!(exact_oracle(&t, 9, 0, Objective::Means).unwrap().cost, 0.0);
        assert_eq!(exact_oracle(&t, 1, 4, Objective::Median).unwrap().cost, 0.0);
    }

    #[test]
    fn monotone_in_k_and_t() {
        let s = MetricSpace::line(&[0.0, 2.0, 5.0, 9.0, 14.0, 20.0, 27.0]).unwrap();
        let t = table(&s);
        for obj in [Objective::Median, Objective::Means, Objective::Center] {
            for k in 1..4 {
                for budget in 0..4 {
                    let c = exact_oracle(&t, k, budget, obj).unwrap().cost;
                    assert!(exact_oracle(&t, k + 1, budget, obj).unwrap().cost <= c);
                    assert!(exact_oracle(&t, k, budget + 1, obj).unwrap().cost <= c);
                }
            }
        }
    }

    #[test]
    fn combination_walk_is_exhaustive() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, binomial(5, 2));
        assert_eq!(binomial(18, 4), 3060);
    }

    #[test]
    fn size_guard() {
        let xs: Vec<f64> = (0..40).map(f64::from).collect();
        let s = MetricSpace::line(&xs).unwrap();
        let t = table(&s);
        assert!(matches!(
            exact_oracle(&t, 8, 0, Objective::Median),
            Err(Error::OracleSizeLimit(_))
        ));
        let _ = PointRef(0);
    }
}
