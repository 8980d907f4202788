//! Weighted client/facility instances with a precomputed cost table.
//!
//! Every solver works on a [`CostTable`]: `n_c` weighted clients, `n_f`
//! candidate facilities (points of the universe) and the raw client-facility
//! distance for each pair. Deterministic points, collapsed uncertain nodes and
//! truncated expected distances all reduce to this shape.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricSpace, Objective, PointRef, WeightedPoint};
use crate::solution::{exclude_most_expensive, finish, AssignmentCost, ClusteringSolution};

/// A client sitting at distance `offset` behind its anchor point.
///
/// With `offset = 0` this is an ordinary weighted point. A positive offset is
/// the tentacle of a compressed graph: the client reaches any point `u` of the
/// universe at distance `offset + d(anchor, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchoredClient {
    pub anchor: PointRef,
    pub offset: f64,
    pub weight: u64,
}

impl AnchoredClient {
    pub fn point(point: PointRef, weight: u64) -> Self {
        Self {
            anchor: point,
            offset: 0.0,
            weight,
        }
    }

    /// Distance to a universe point.
    #[inline]
    pub fn distance_to(&self, space: &MetricSpace, u: PointRef) -> f64 {
        self.offset + space.dist(self.anchor, u)
    }

    /// Distance between two clients along the anchors.
    pub fn distance_between(&self, other: &Self, space: &MetricSpace, same: bool) -> f64 {
        if same {
            0.0
        } else {
            self.offset + space.dist(self.anchor, other.anchor) + other.offset
        }
    }
}

impl From<WeightedPoint> for AnchoredClient {
    fn from(w: WeightedPoint) -> Self {
        Self::point(w.point, w.weight)
    }
}

type CostFn<'a> = Box<dyn Fn(usize, PointRef) -> f64 + Sync + Send + 'a>;

/// Dense client-by-facility table of raw distances.
pub struct CostTable<'a> {
    space: &'a MetricSpace,
    weights: Vec<u64>,
    facilities: Vec<PointRef>,
    index: HashMap<PointRef, usize>,
    raw: Vec<f64>,
    cost_fn: CostFn<'a>,
}

impl std::fmt::Debug for CostTable<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostTable")
            .field("clients", &self.weights.len())
            .field("facilities", &self.facilities.len())
            .finish()
    }
}

impl<'a> CostTable<'a> {
    /// Builds a table from an arbitrary client-to-point cost. Duplicate
    /// facilities are dropped, keeping the first occurrence.
    pub fn from_fn<F>(space: &'a MetricSpace, weights: Vec<u64>, facilities: &[PointRef], f: F) -> Result<Self>
    where
        F: Fn(usize, PointRef) -> f64 + Sync + Send + 'a,
    {
        if weights.contains(&0) {
            return Err(Error::InvalidParameter("client weights must be positive".into()));
        }
        let mut unique = Vec::with_capacity(facilities.len());
        let mut index = HashMap::with_capacity(facilities.len());
        for &p in facilities {
            space.check(p)?;
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(p) {
                e.insert(unique.len());
                unique.push(p);
            }
        }
        let n_f = unique.len();
        let mut raw = vec![0.0; weights.len() * n_f];
        for j in 0..weights.len() {
            for (fi, &p) in unique.iter().enumerate() {
                raw[j * n_f + fi] = f(j, p);
            }
        }
        Ok(Self {
            space,
            weights,
            facilities: unique,
            index,
            raw,
            cost_fn: Box::new(f),
        })
    }

    /// Weighted points; every point is also a candidate facility.
    pub fn for_points(space: &'a MetricSpace, points: &[WeightedPoint]) -> Result<Self> {
        for w in points {
            space.check(w.point)?;
        }
        let facilities: Vec<PointRef> = points.iter().map(|w| w.point).collect();
        let anchors = facilities.clone();
        Self::from_fn(space, points.iter().map(|w| w.weight).collect(), &facilities, move |j, u| {
            space.dist(anchors[j], u)
        })
    }

    /// Anchored clients; the facilities are the distinct anchors.
    pub fn for_anchored(space: &'a MetricSpace, clients: &[AnchoredClient]) -> Result<Self> {
        let facilities: Vec<PointRef> = clients.iter().map(|c| c.anchor).collect();
        Self::for_anchored_with(space, clients, &facilities)
    }

    pub fn for_anchored_with(
        space: &'a MetricSpace,
        clients: &[AnchoredClient],
        facilities: &[PointRef],
    ) -> Result<Self> {
        for c in clients {
            space.check(c.anchor)?;
            if !(c.offset >= 0.0) {
                return Err(Error::InvalidParameter("client offsets must be non-negative".into()));
            }
        }
        let owned: Vec<AnchoredClient> = clients.to_vec();
        Self::from_fn(space, clients.iter().map(|c| c.weight).collect(), facilities, move |j, u| {
            owned[j].distance_to(space, u)
        })
    }

    pub fn space(&self) -> &'a MetricSpace {
        self.space
    }

    pub fn n_clients(&self) -> usize {
        self.weights.len()
    }

    pub fn n_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub fn facility(&self, f: usize) -> PointRef {
        self.facilities[f]
    }

    pub fn facilities(&self) -> &[PointRef] {
        &self.facilities
    }

    pub fn facility_of(&self, p: PointRef) -> Option<usize> {
        self.index.get(&p).copied()
    }

    #[inline]
    pub fn raw(&self, client: usize, facility: usize) -> f64 {
        self.raw[client * self.facilities.len() + facility]
    }

    pub fn raw_row(&self, client: usize) -> &[f64] {
        let n_f = self.facilities.len();
        &self.raw[client * n_f..(client + 1) * n_f]
    }

    pub fn max_raw(&self) -> f64 {
        self.raw.iter().copied().fold(0.0, f64::max)
    }

    pub fn facility_distance(&self, a: usize, b: usize) -> f64 {
        self.space.dist(self.facilities[a], self.facilities[b])
    }

    /// Nearest-center assignment over facility slots with up to `budget`
    /// excluded copies; no new distance evaluations.
    pub fn evaluate(&self, centers: &[usize], budget: u64, obj: Objective) -> ClusteringSolution {
        let n = self.n_clients();
        let mut nearest = Vec::with_capacity(n);
        for j in 0..n {
            let row = self.raw_row(j);
            let mut best: Option<(usize, f64)> = None;
            for (slot, &f) in centers.iter().enumerate() {
                let d = row[f];
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((slot, d));
                }
            }
            nearest.push(best);
        }
        let powered: Vec<f64> = nearest
            .iter()
            .map(|b| b.map_or(f64::INFINITY, |(_, d)| obj.power(d)))
            .collect();
        let excluded = exclude_most_expensive(&powered, &self.weights, budget.min(self.total_weight()));
        let points = centers.iter().map(|&f| self.facilities[f]).collect();
        finish(points, &nearest, &powered, &self.weights, excluded, obj)
    }

    /// Facility slots of a solution's centers.
    pub fn slots_of(&self, sol: &ClusteringSolution) -> Result<Vec<usize>> {
        sol.centers
            .iter()
            .map(|&c| {
                self.facility_of(c).ok_or_else(|| {
                    Error::InconsistentSolution(format!("center {} is not a facility", c.0))
                })
            })
            .collect()
    }
}

impl AssignmentCost for CostTable<'_> {
    fn num_clients(&self) -> usize {
        self.weights.len()
    }

    fn weight(&self, client: usize) -> u64 {
        self.weights[client]
    }

    fn distance_to(&self, client: usize, center: PointRef) -> f64 {
        match self.facility_of(center) {
            Some(f) => self.raw(client, f),
            None => (self.cost_fn)(client, center),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solution::solution_cost;

    #[test]
    fn table_matches_distances() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0]).unwrap();
        let pts: Vec<WeightedPoint> = s.points().map(WeightedPoint::unit).collect();
        let t = CostTable::for_points(&s, &pts).unwrap();
        assert_eq!(t.raw(0, 2), 10.0);
        assert_eq!(t.raw(2, 1), 9.0);
        assert_eq!(t.max_raw(), 10.0);
    }

    #[test]
    fn anchored_offsets_add() {
        let s = MetricSpace::line(&[0.0, 6.0]).unwrap();
        let c = [AnchoredClient {
            anchor: PointRef(1),
            offset: 7.0 / 3.0,
            weight: 1,
        }];
        let t = CostTable::for_anchored_with(&s, &c, &[PointRef(0), PointRef(1)]).unwrap();
        assert!((t.raw(0, 0) - 25.0 / 3.0).abs() < 1e-12);
        assert!((t.raw(0, 1) - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_round_trips_through_solution_cost() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let pts: Vec<WeightedPoint> = s.points().map(WeightedPoint::unit).collect();
        let t = CostTable::for_points(&s, &pts).unwrap();
        for obj in [Objective::Median, Objective::Means, Objective::Center] {
            let sol = t.evaluate(&[0, 2], 1, obj);
            assert_eq!(solution_cost(&t, &sol, obj).unwrap(), sol.cost);
        }
        let sol = t.evaluate(&[0, 2], 1, Objective::Median);
        assert_eq!(sol.cost, 2.0);
        assert_eq!(sol.outliers(), vec![4]);
    }
}
