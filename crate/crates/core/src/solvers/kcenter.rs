//! Greedy disk covering for k-center with exactly `t` outliers.

use crate::error::{Error, Result};
use crate::instance::CostTable;
use crate::metric::Objective;
use crate::solution::ClusteringSolution;

/// 3-approximation for weighted (k,t)-center.
///
/// For a guessed radius `r`, repeatedly opens the facility whose radius-`r`
/// disk holds the most uncovered weight and then marks everything within
/// `3r` of it as covered. The smallest candidate radius for which `k` disks
/// leave at most `t` uncovered copies is found by binary search over the
/// sorted client-facility distances: greedy success is guaranteed for every
/// radius at least the optimum, so the first success after a failure cannot
/// overshoot it.
pub fn kt_center_outliers(table: &CostTable<'_>, k: usize, t: u64) -> Result<ClusteringSolution> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let total = table.total_weight();
    if total <= t {
        return Err(Error::infeasible(format!(
            "total weight {total} does not exceed the outlier budget {t}"
        )));
    }
    let n_f = table.n_facilities();
    if n_f <= k {
        let all: Vec<usize> = (0..n_f).collect();
        return Ok(table.evaluate(&all, t, Objective::Center));
    }
    let mut radii: Vec<f64> = (0..table.n_clients())
        .flat_map(|j| table.raw_row(j).iter().copied())
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let need = total - t;
    let mut lo = 0usize;
    let mut hi = radii.len() - 1;
    let mut best = greedy_cover(table, k, radii[hi]);
    debug_assert!(best.1 >= need);
    if let Some(first) = Some(greedy_cover(table, k, radii[0])).filter(|g| g.1 >= need) {
        best = first;
    } else {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let attempt = greedy_cover(table, k, radii[mid]);
            if attempt.1 >= need {
                hi = mid;
                best = attempt;
            } else {
                lo = mid;
            }
        }
    }
    Ok(table.evaluate(&best.0, t, Objective::Center))
}

fn greedy_cover(table: &CostTable<'_>, k: usize, r: f64) -> (Vec<usize>, u64) {
    let n_c = table.n_clients();
    let n_f = table.n_facilities();
    let w = table.weights();
    let mut covered = vec![false; n_c];
    let mut covered_weight = 0u64;
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let mut pick = None;
        let mut pick_weight = 0u64;
        for f in 0..n_f {
            let g: u64 = (0..n_c)
                .filter(|&j| !covered[j] && table.raw(j, f) <= r)
                .map(|j| w[j])
                .sum();
            if g > pick_weight {
                pick_weight = g;
                pick = Some(f);
            }
        }
        let Some(f) = pick else { break };
        chosen.push(f);
        for j in 0..n_c {
            if !covered[j] && table.raw(j, f) <= 3.0 * r {
                covered[j] = true;
                covered_weight += w[j];
            }
        }
    }
    (chosen, covered_weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{MetricSpace, PointRef, WeightedPoint};

    fn unit_points(s: &MetricSpace) -> Vec<WeightedPoint> {
        s.points().map(WeightedPoint::unit).collect()
    }

    #[test]
    fn line_instance_within_three_of_optimum() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let pts = unit_points(&s);
        let table = CostTable::for_points(&s, &pts).unwrap();
        let sol = kt_center_outliers(&table, 2, 1).unwrap();
        assert!(sol.cost <= 3.0);
        assert_eq!(sol.excluded_weight(), 1);
        assert!(sol.centers.len() <= 2);
    }

    #[test]
    fn budget_covering_everything_but_centers() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let pts = unit_points(&s);
        let table = CostTable::for_points(&s, &pts).unwrap();
        let sol = kt_center_outliers(&table, 2, 3).unwrap();
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn weighted_two_points() {
        // Centering on the heavy point and dropping the single light copy
        // costs 0; centering on the light point would leave 3 copies at 10.
        let s = MetricSpace::line(&[0.0, 10.0]).unwrap();
        let pts = vec![
            WeightedPoint::new(PointRef(0), 3).unwrap(),
            WeightedPoint::new(PointRef(1), 1).unwrap(),
        ];
        let table = CostTable::for_points(&s, &pts).unwrap();
        let sol = kt_center_outliers(&table, 1, 1).unwrap();
        assert_eq!(sol.centers, vec![PointRef(0)]);
        assert_eq!(sol.excluded, vec![0, 1]);
        assert_eq!(sol.cost, 0.0);
    }

    #[test]
    fn infeasible_budget() {
        let s = MetricSpace::line(&[0.0, 10.0]).unwrap();
        let table = CostTable::for_points(&s, &unit_points(&s)).unwrap();
        assert!(matches!(
            kt_center_outliers(&table, 1, 2),
            Err(Error::Infeasible { .. })
        ));
    }
}
