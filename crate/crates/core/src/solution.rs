//! Clustering solutions and objective evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, Objective, PointRef, WeightedPoint};

/// Centers, excluded mass and the assignment of every remaining client.
///
/// Clients are indexed `0..n` in the order of the instance the solution was
/// computed on. A weighted client may be excluded partially: `excluded[j]`
/// copies of it are outliers and the rest follow `assignment[j]`. A client
/// whose full weight is excluded has no assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSolution {
    pub centers: Vec<PointRef>,
    pub assignment: Vec<Option<usize>>,
    pub excluded: Vec<u64>,
    pub cost: f64,
}

impl ClusteringSolution {
    pub fn num_clients(&self) -> usize {
        self.assignment.len()
    }

    /// Clients with at least one excluded copy.
    pub fn outliers(&self) -> Vec<usize> {
        self.excluded
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn excluded_weight(&self) -> u64 {
        self.excluded.iter().sum()
    }

    /// Center a client is attached to, if any.
    pub fn center_of(&self, client: usize) -> Option<PointRef> {
        self.assignment[client].map(|c| self.centers[c])
    }
}

/// Per-client distance to an arbitrary center point.
pub trait AssignmentCost {
    fn num_clients(&self) -> usize;
    fn weight(&self, client: usize) -> u64;
    /// Raw (un-squared) distance from `client` to the point `center`.
    fn distance_to(&self, client: usize, center: PointRef) -> f64;
}

/// Plain (optionally weighted) points of a metric space acting as clients.
pub struct PointClients<'a> {
    pub space: &'a MetricSpace,
    pub points: &'a [WeightedPoint],
}

impl AssignmentCost for PointClients<'_> {
    fn num_clients(&self) -> usize {
        self.points.len()
    }

    fn weight(&self, client: usize) -> u64 {
        self.points[client].weight
    }

    fn distance_to(&self, client: usize, center: PointRef) -> f64 {
        self.space.dist(self.points[client].point, center)
    }
}

/// Re-evaluates a solution: weighted sum of `d` (median) or `d^2` (means),
/// or the maximum `d` (center), over non-excluded mass in ascending client
/// order.
pub fn solution_cost<C: AssignmentCost + ?Sized>(
    costs: &C,
    sol: &ClusteringSolution,
    obj: Objective,
) -> Result<f64> {
    let n = costs.num_clients();
    if sol.assignment.len() != n || sol.excluded.len() != n {
        return Err(Error::InconsistentSolution(format!(
            "solution covers {} clients, instance has {n}",
            sol.assignment.len()
        )));
    }
    let mut total = 0.0;
    for j in 0..n {
        let w = costs.weight(j);
        let e = sol.excluded[j];
        if e > w {
            return Err(Error::InconsistentSolution(format!(
                "client {j} excludes {e} copies but has weight {w}"
            )));
        }
        let kept = w - e;
        if kept == 0 {
            continue;
        }
        let c = match sol.assignment[j] {
            Some(c) if c < sol.centers.len() => sol.centers[c],
            Some(c) => {
                return Err(Error::InconsistentSolution(format!(
                    "client {j} assigned to missing center slot {c}"
                )))
            }
            None => {
                return Err(Error::InconsistentSolution(format!(
                    "client {j} is neither excluded nor assigned"
                )))
            }
        };
        let d = obj.power(costs.distance_to(j, c));
        if obj.is_sum() {
            total += kept as f64 * d;
        } else {
            total = f64::max(total, d);
        }
    }
    Ok(total)
}

/// Cost of a solution whose clients are all points of `space` in index
/// order, with optional per-point weights (unit otherwise).
pub fn solution_cost_on_space(
    space: &MetricSpace,
    sol: &ClusteringSolution,
    obj: Objective,
    weights: Option<&[u64]>,
) -> Result<f64> {
    let points: Vec<WeightedPoint> = space
        .points()
        .enumerate()
        .map(|(i, p)| WeightedPoint {
            point: p,
            weight: weights.map_or(1, |w| w[i]),
        })
        .collect();
    if let Some(w) = weights {
        if w.len() != points.len() || w.contains(&0) {
            return Err(Error::InvalidParameter(
                "weights must be positive and cover every point".into(),
            ));
        }
    }
    solution_cost(&PointClients { space, points: &points }, sol, obj)
}

/// Assigns every client to its nearest center and excludes up to `budget`
/// copies, most expensive first. Optimal for fixed centers under all three
/// objectives.
pub fn assign_to_centers<C: AssignmentCost + ?Sized>(
    costs: &C,
    centers: &[PointRef],
    budget: u64,
    obj: Objective,
) -> ClusteringSolution {
    let n = costs.num_clients();
    let mut nearest = Vec::with_capacity(n);
    for j in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &c) in centers.iter().enumerate() {
            let d = costs.distance_to(j, c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((slot, d));
            }
        }
        nearest.push(best);
    }
    let dists: Vec<f64> = nearest
        .iter()
        .map(|b| b.map_or(f64::INFINITY, |(_, d)| obj.power(d)))
        .collect();
    let weights: Vec<u64> = (0..n).map(|j| costs.weight(j)).collect();
    let excluded = exclude_most_expensive(&dists, &weights, budget);
    finish(centers.to_vec(), &nearest, &dists, &weights, excluded, obj)
}

/// Greedy copy-splitting exclusion: most expensive clients first, ties by
/// lower index.
pub(crate) fn exclude_most_expensive(costs: &[f64], weights: &[u64], budget: u64) -> Vec<u64> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]).then(a.cmp(&b)));
    let mut excluded = vec![0u64; costs.len()];
    let mut left = budget;
    for j in order {
        if left == 0 {
            break;
        }
        let take = weights[j].min(left);
        excluded[j] = take;
        left -= take;
    }
    excluded
}

pub(crate) fn finish(
    centers: Vec<PointRef>,
    nearest: &[Option<(usize, f64)>],
    powered: &[f64],
    weights: &[u64],
    excluded: Vec<u64>,
    obj: Objective,
) -> ClusteringSolution {
    let mut cost = 0.0;
    let mut assignment = Vec::with_capacity(nearest.len());
    for j in 0..nearest.len() {
        let kept = weights[j] - excluded[j];
        if kept == 0 {
            assignment.push(None);
            continue;
        }
        assignment.push(nearest[j].map(|(slot, _)| slot));
        if obj.is_sum() {
            cost += kept as f64 * powered[j];
        } else {
            cost = f64::max(cost, powered[j]);
        }
    }
    ClusteringSolution {
        centers,
        assignment,
        excluded,
        cost,
    }
}
