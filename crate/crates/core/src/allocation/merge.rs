//! Interpolating between two local solutions with different outlier counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{Objective, PointRef};
use crate::solution::{AssignmentCost, ClusteringSolution};

/// A merged solution together with the interpolation weight it realizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedSolution {
    pub solution: ClusteringSolution,
    /// `theta = theta_num / theta_den = (target - t1) / (t2 - t1)`.
    pub theta_num: u64,
    pub theta_den: u64,
}

impl MergedSolution {
    pub fn theta(&self) -> f64 {
        if self.theta_den == 0 {
            0.0
        } else {
            self.theta_num as f64 / self.theta_den as f64
        }
    }

    /// `(1 - theta) a + theta b`.
    pub fn interpolate(&self, a: f64, b: f64) -> f64 {
        if self.theta_den == 0 {
            return a;
        }
        let den = self.theta_den as f64;
        ((self.theta_den - self.theta_num) as f64 * a + self.theta_num as f64 * b) / den
    }
}

/// Combines `sol_a` (excluding `t1` points) and `sol_b` (excluding `t2 > t1`
/// points) over the same unit-weight clients into a solution on the union of
/// their centers that excludes exactly `target` points.
///
/// Every point goes to its nearest center in the union and the `n - target`
/// cheapest are kept. Giving weight `1 - theta` to each point clustered by
/// `sol_a` and `theta` to each point clustered by `sol_b` is a fractional
/// selection of exactly `n - target` points with cost at most
/// `(1 - theta) cost_a + theta cost_b`; the cheapest integral selection does
/// no worse. Pairing off the points clustered by only one side, keeping the
/// smaller interpolated cost each time, can exceed that bound once
/// `theta > 1/2`, so it is not used.
pub fn merge_two_solutions<C: AssignmentCost + ?Sized>(
    costs: &C,
    sol_a: &ClusteringSolution,
    sol_b: &ClusteringSolution,
    target: u64,
    obj: Objective,
) -> Result<MergedSolution> {
    if obj == Objective::Center {
        return Err(Error::InvalidParameter("merging applies to median and means".into()));
    }
    let n = costs.num_clients();
    if sol_a.num_clients() != n || sol_b.num_clients() != n {
        return Err(Error::InconsistentInput("solutions cover different point sets".into()));
    }
    if (0..n).any(|j| costs.weight(j) != 1) {
        return Err(Error::InconsistentInput("merging requires unit-weight clients".into()));
    }
    let t1 = sol_a.excluded_weight();
    let t2 = sol_b.excluded_weight();
    if !(t1 <= target && target <= t2) {
        return Err(Error::InconsistentInput(format!(
            "target {target} not between the outlier counts {t1} and {t2}"
        )));
    }
    if t1 == t2 {
        return Ok(MergedSolution {
            solution: sol_a.clone(),
            theta_num: 0,
            theta_den: 0,
        });
    }
    let (num, den) = (target - t1, t2 - t1);

    let mut centers: Vec<PointRef> = sol_a.centers.clone();
    for &c in &sol_b.centers {
        if !centers.contains(&c) {
            centers.push(c);
        }
    }

    // nearest union center per point; keep the n - target cheapest
    let mut best: Vec<(f64, usize, usize)> = (0..n)
        .map(|j| {
            let (slot, d) = centers
                .iter()
                .enumerate()
                .map(|(slot, &c)| (slot, obj.power(costs.distance_to(j, c))))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            (d, j, slot)
        })
        .collect();
    best.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut cost_of = vec![0.0f64; n];
    for &(d, j, slot) in &best[..n - target as usize] {
        assignment[j] = Some(slot);
        cost_of[j] = d;
    }

    let mut excluded = vec![0u64; n];
    let mut cost = 0.0;
    for j in 0..n {
        match assignment[j] {
            Some(_) => cost += cost_of[j],
            None => excluded[j] = 1,
        }
    }
    debug_assert_eq!(excluded.iter().sum::<u64>(), target);
    Ok(MergedSolution {
        solution: ClusteringSolution {
            centers,
            assignment,
            excluded,
            cost,
        },
        theta_num: num,
        theta_den: den,
    })
}
