//! Clustering nodes that follow independent discrete distributions.
//!
//! Median, means and center-pp reduce to deterministic clustering on a
//! compressed graph: every node collapses onto its 1-median (or 1-mean) `y_j`
//! at the end of a tentacle of length `l_j`. Center-g, where the expectation
//! sits outside the maximum, goes through truncated distances instead.

mod center_g;
mod compressed;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{extremes_of, MetricSpace, PointRef};

pub use center_g::{
    eval_center_g_objective, run_center_g, CenterGParams, CenterGReport, Estimate, EvalMode, TauRecord,
};
pub use compressed::{build_compressed_graph, run_uncertain, CompressedGraph, UncertainObjective, UncertainReport};

/// A node: a distribution over finitely many points of the universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainNode {
    pub id: usize,
    pub support: Vec<PointRef>,
    pub probs: Vec<f64>,
}

impl UncertainNode {
    pub fn new(id: usize, support: Vec<PointRef>, probs: Vec<f64>) -> Result<Self> {
        let node = Self { id, support, probs };
        node.validate()?;
        Ok(node)
    }

    /// A node that always realizes at `p`.
    pub fn deterministic(id: usize, p: PointRef) -> Self {
        Self {
            id,
            support: vec![p],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidNode {
            node: self.id,
            reason: reason.into(),
        };
        if self.support.is_empty() {
            return Err(bad("empty support"));
        }
        if self.support.len() != self.probs.len() {
            return Err(bad("support and probabilities differ in length"));
        }
        if self.probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(bad("probabilities must be positive"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(bad(&format!("probabilities sum to {total}")));
        }
        let mut seen = self.support.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.support.len() {
            return Err(bad("repeated support point"));
        }
        Ok(())
    }

    /// Words to ship the full distribution: a point reference and a
    /// probability per atom.
    pub fn encoding_words(&self) -> u64 {
        2 * self.support.len() as u64
    }

    pub fn is_deterministic(&self) -> bool {
        self.support.len() == 1
    }

    pub(crate) fn check(&self, space: &MetricSpace) -> Result<()> {
        self.validate()?;
        for &p in &self.support {
            space.check(p).map_err(|_| Error::InvalidNode {
                node: self.id,
                reason: format!("support point {} is outside the universe", p.0),
            })?;
        }
        Ok(())
    }
}

/// Which summary a node collapses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMode {
    Median,
    Mean,
}

impl SummaryMode {
    fn power(self) -> u32 {
        match self {
            SummaryMode::Median => 1,
            SummaryMode::Mean => 2,
        }
    }
}

/// 1-median or 1-mean of a node and its collapse cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneMedianSummary {
    pub y: PointRef,
    /// Expected (squared, for the mean) distance from the node to `y`.
    pub ell: f64,
}

/// `E[d(X, u)^power]` for `X` distributed as the node.
pub fn expected_distance(space: &MetricSpace, node: &UncertainNode, u: PointRef, power: u32) -> f64 {
    node.support
        .iter()
        .zip(&node.probs)
        .map(|(&p, &w)| w * space.dist(p, u).powi(power as i32))
        .sum()
}

/// `E[max(d(X, u) - tau, 0)]`.
pub fn expected_truncated(space: &MetricSpace, node: &UncertainNode, u: PointRef, tau: f64) -> f64 {
    node.support
        .iter()
        .zip(&node.probs)
        .map(|(&p, &w)| w * (space.dist(p, u) - tau).max(0.0))
        .sum()
}

/// Exhaustive argmin of the expected (squared) distance over `universe`;
/// ties go to the earliest candidate.
pub fn one_median(
    space: &MetricSpace,
    node: &UncertainNode,
    universe: &[PointRef],
    mode: SummaryMode,
) -> Result<OneMedianSummary> {
    node.check(space)?;
    if universe.is_empty() {
        return Err(Error::DegenerateInstance("empty candidate universe".into()));
    }
    let mut best = OneMedianSummary {
        y: universe[0],
        ell: f64::INFINITY,
    };
    for &u in universe {
        let c = expected_distance(space, node, u, mode.power());
        if c < best.ell {
            best = OneMedianSummary { y: u, ell: c };
        }
    }
    Ok(best)
}

/// Distinct support points of all nodes, in order of first appearance.
pub fn support_universe(nodes: &[UncertainNode]) -> Vec<PointRef> {
    let mut seen = std::collections::HashSet::new();
    nodes
        .iter()
        .flat_map(|n| n.support.iter().copied())
        .filter(|p| seen.insert(*p))
        .collect()
}

/// Truncation thresholds `2^i d_min / 18` for `0 <= i <= ceil(log2 D) + 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub taus: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
}

/// Grid over the given universe points; duplicates are merged first.
pub fn tau_grid(space: &MetricSpace, universe: &[PointRef]) -> Result<TauGrid> {
    let ex = extremes_of(space, universe)?;
    let top = ex.aspect_ratio.log2().ceil().max(0.0) as u32 + 2;
    let taus = (0..=top).map(|i| f64::powi(2.0, i as i32) * ex.d_min / 18.0).collect();
    Ok(TauGrid {
        taus,
        d_min: ex.d_min,
        d_max: ex.d_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_point_line() -> MetricSpace {
        MetricSpace::line(&[0.0, 6.0, 7.0]).unwrap()
    }

    fn uniform(ids: &[usize]) -> UncertainNode {
        let p = 1.0 / ids.len() as f64;
        UncertainNode::new(0, ids.iter().map(|&i| PointRef(i)).collect(), vec![p; ids.len()]).unwrap()
    }

    #[test]
    fn one_median_of_uniform_node() {
        let s = three_point_line();
        let node = uniform(&[0, 1, 2]);
        let all = [PointRef(0), PointRef(1), PointRef(2)];
        let m = one_median(&s, &node, &all, SummaryMode::Median).unwrap();
        assert_eq!(m.y, PointRef(1));
        assert!((m.ell - 7.0 / 3.0).abs() < 1e-12);
        let m = one_median(&s, &node, &all, SummaryMode::Mean).unwrap();
        assert_eq!(m.y, PointRef(1));
        assert!((m.ell - 37.0 / 3.0).abs() < 1e-12);
        let d = one_median(&s, &UncertainNode::deterministic(1, PointRef(2)), &all, SummaryMode::Median).unwrap();
        assert_eq!((d.y, d.ell), (PointRef(2), 0.0));
    }

    #[test]
    fn expectations() {
        let s = MetricSpace::line(&[0.0, 10.0]).unwrap();
        let half = uniform(&[0, 1]);
        assert_eq!(expected_distance(&s, &half, PointRef(0), 1), 5.0);
        assert_eq!(expected_truncated(&s, &half, PointRef(0), 3.0), 3.5);
        assert_eq!(expected_truncated(&s, &half, PointRef(0), 0.0), 5.0);
        assert_eq!(expected_truncated(&s, &half, PointRef(0), 10.0), 0.0);
        let skew = UncertainNode::new(0, vec![PointRef(0), PointRef(1)], vec![0.9, 0.1]).unwrap();
        assert!((expected_distance(&s, &skew, PointRef(0), 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn node_validation() {
        assert!(UncertainNode::new(0, vec![], vec![]).is_err());
        assert!(UncertainNode::new(0, vec![PointRef(0)], vec![0.5]).is_err());
        assert!(UncertainNode::new(0, vec![PointRef(0), PointRef(0)], vec![0.5, 0.5]).is_err());
        assert_eq!(uniform(&[0, 1]).encoding_words(), 4);
    }

    #[test]
    fn grid_shapes() {
        let s = MetricSpace::line(&[0.0, 1.0, 100.0]).unwrap();
        let g = tau_grid(&s, &[PointRef(0), PointRef(1), PointRef(2)]).unwrap();
        assert_eq!(g.taus.len(), 10);
        assert!((g.taus[9] - 512.0 / 18.0).abs() < 1e-12);
        assert!(g.taus[9] > g.d_max / 6.0);
        let s = MetricSpace::line(&[0.0, 1.0]).unwrap();
        let g = tau_grid(&s, &[PointRef(0), PointRef(1)]).unwrap();
        assert_eq!(g.taus, vec![1.0 / 18.0, 1.0 / 9.0, 2.0 / 9.0]);
        let s = MetricSpace::line(&[3.0]).unwrap();
        assert!(tau_grid(&s, &[PointRef(0)]).is_err());
    }
}
