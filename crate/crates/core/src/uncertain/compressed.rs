//! Compressed graph reduction for median, means and center-pp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::protocol::{
    center_on_clients, default_local_solver, median_on_clients, per_site, Forwarding, MedianSetup, MedianVariant,
    Partition, ProtocolParams, ProtocolReport,
};
use crate::solution::ClusteringSolution;
use crate::solvers::bicriteria::Relax;

use super::{expected_distance, one_median, support_universe, OneMedianSummary, SummaryMode, UncertainNode};

/// Every node collapsed onto its summary point.
///
/// `d_G(p_j, u) = tentacle_j + d(y_j, u)` and
/// `d_G(p_i, p_j) = tentacle_i + d(y_i, y_j) + tentacle_j`. For the median
/// summary the tentacle is `l_j`; for the mean it is `sqrt(l_j)`, so that the
/// squared graph distance stays within a factor 2 of the expected squared
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedGraph {
    pub mode: SummaryMode,
    pub summaries: Vec<OneMedianSummary>,
}

impl CompressedGraph {
    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn tentacle(&self, j: usize) -> f64 {
        match self.mode {
            SummaryMode::Median => self.summaries[j].ell,
            SummaryMode::Mean => self.summaries[j].ell.sqrt(),
        }
    }

    /// Distance from demand vertex `p_j` to a universe point.
    pub fn dist_to_point(&self, space: &MetricSpace, j: usize, u: PointRef) -> f64 {
        self.tentacle(j) + space.dist(self.summaries[j].y, u)
    }

    pub fn dist_between(&self, space: &MetricSpace, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.tentacle(i) + space.dist(self.summaries[i].y, self.summaries[j].y) + self.tentacle(j)
        }
    }

    /// Demand vertices as anchored clients of unit weight.
    pub fn clients(&self) -> Vec<AnchoredClient> {
        (0..self.len())
            .map(|j| AnchoredClient {
                anchor: self.summaries[j].y,
                offset: self.tentacle(j),
                weight: 1,
            })
            .collect()
    }
}

/// Summarizes every node against the union of all supports.
pub fn build_compressed_graph(space: &MetricSpace, nodes: &[UncertainNode], mode: SummaryMode) -> Result<CompressedGraph> {
    let universe = support_universe(nodes);
    let summaries = nodes
        .iter()
        .map(|n| one_median(space, n, &universe, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedGraph { mode, summaries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertainObjective {
    Median,
    Means,
    CenterPp,
}

impl UncertainObjective {
    pub fn objective(self) -> Objective {
        match self {
            UncertainObjective::Median => Objective::Median,
            UncertainObjective::Means => Objective::Means,
            UncertainObjective::CenterPp => Objective::Center,
        }
    }

    pub fn mode(self) -> SummaryMode {
        match self {
            UncertainObjective::Means => SummaryMode::Mean,
            _ => SummaryMode::Median,
        }
    }

    /// Allowed ratio of the mapped-back cost to the graph cost.
    pub fn soundness_factor(self) -> f64 {
        match self {
            UncertainObjective::Means => 4.0,
            _ => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainReport {
    pub objective: UncertainObjective,
    /// The protocol run on the compressed graph; its solution is priced in
    /// graph distances.
    pub protocol: ProtocolReport,
    pub summaries: Vec<OneMedianSummary>,
    pub graph_cost: f64,
    /// Graph assignment and outliers kept, priced in expected distances.
    pub mapped_cost: f64,
    /// Final node-level solution: nearest center by expected distance, same
    /// number of excluded nodes.
    pub solution: ClusteringSolution,
}

impl UncertainReport {
    pub fn soundness_holds(&self) -> bool {
        self.mapped_cost <= self.objective.soundness_factor() * self.graph_cost * (1.0 + 1e-12) + 1e-12
    }
}

/// Runs the distributed protocol for `obj` on the compressed graph of the
/// nodes. Median and means use the two-round outlier-allocation protocol,
/// center-pp the farthest-first one. Forwarded nodes travel as a summary
/// point plus its collapse cost.
pub fn run_uncertain(
    space: &MetricSpace,
    nodes: &[UncertainNode],
    partition: &Partition,
    obj: UncertainObjective,
    params: &ProtocolParams,
) -> Result<UncertainReport> {
    if partition.num_items() != nodes.len() {
        return Err(Error::InconsistentInput(format!(
            "partition covers {} items but there are {} nodes",
            partition.num_items(),
            nodes.len()
        )));
    }
    for n in nodes {
        n.check(space)?;
    }
    let mode = obj.mode();
    // every site summarizes its own nodes
    let universe = support_universe(nodes);
    let per = per_site(partition.num_sites(), |i| {
        partition
            .site(i)
            .iter()
            .map(|&j| one_median(space, &nodes[j], &universe, mode))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summaries = vec![
        OneMedianSummary {
            y: PointRef(0),
            ell: 0.0
        };
        nodes.len()
    ];
    for (i, (sums, _)) in per.into_iter().enumerate() {
        for (&j, s) in partition.site(i).iter().zip(sums) {
            summaries[j] = s;
        }
    }
    let graph = CompressedGraph { mode, summaries };
    let clients = graph.clients();
    let mut params = *params;
    params.objective = obj.objective();

    let mut protocol = match obj {
        UncertainObjective::CenterPp => {
            center_on_clients(space, &clients, Forwarding::Collapsed, partition, &params, false)?
        }
        _ => {
            let setup = MedianSetup {
                space,
                clients: &clients,
                forwarding: Forwarding::Collapsed,
                partition,
                params,
                coordinator_relax: Relax::Outliers,
                algorithm: None,
            };
            let solver = default_local_solver(space, params.objective, params.seed);
            median_on_clients(&setup, MedianVariant::TwoRound, &solver)?
        }
    };
    protocol.algorithm = match obj {
        UncertainObjective::Median => "uncertain-median",
        UncertainObjective::Means => "uncertain-means",
        UncertainObjective::CenterPp => "uncertain-center-pp",
    }
    .to_string();

    let graph_sol = &protocol.solution;
    let power = mode.power();
    let expected = |j: usize, u: PointRef| expected_distance(space, &nodes[j], u, power);
    let mut mapped_cost = 0.0;
    for j in 0..nodes.len() {
        if graph_sol.excluded[j] > 0 {
            continue;
        }
        let Some(c) = graph_sol.center_of(j) else { continue };
        let e = expected(j, c);
        if obj == UncertainObjective::CenterPp {
            mapped_cost = f64::max(mapped_cost, e);
        } else {
            mapped_cost += e;
        }
    }
    // raw entries are chosen so that the objective's power gives back the
    // expected (squared) distance
    let table = CostTable::from_fn(space, vec![1; nodes.len()], &graph_sol.centers, move |j, u| {
        let e = expected_distance(space, &nodes[j], u, power);
        if power == 2 { e.sqrt() } else { e }
    })?;
    let slots: Vec<usize> = (0..table.n_facilities()).collect();
    let solution = table.evaluate(&slots, graph_sol.excluded_weight(), params.objective);

    Ok(UncertainReport {
        objective: obj,
        graph_cost: graph_sol.cost,
        mapped_cost,
        summaries: graph.summaries,
        protocol,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::run_kt_median;

    #[test]
    fn closed_form_distances() {
        let s = MetricSpace::line(&[0.0, 6.0, 7.0]).unwrap();
        let node = UncertainNode::new(0, vec![PointRef(0), PointRef(1), PointRef(2)], vec![1.0 / 3.0; 3]).unwrap();
        let det = UncertainNode::deterministic(1, PointRef(0));
        let g = build_compressed_graph(&s, &[node, det], SummaryMode::Median).unwrap();
        assert!((g.dist_to_point(&s, 0, PointRef(0)) - 25.0 / 3.0).abs() < 1e-12);
        assert!((g.dist_to_point(&s, 0, PointRef(1)) - 7.0 / 3.0).abs() < 1e-12);
        assert!((g.dist_between(&s, 0, 1) - 25.0 / 3.0).abs() < 1e-12);
        assert_eq!(g.dist_between(&s, 1, 1), 0.0);
    }

    #[test]
    fn deterministic_nodes_match_point_protocol() {
        let xs: Vec<f64> = (0..12).map(|i| if i < 6 { i as f64 } else { 50.0 + i as f64 }).collect();
        let s = MetricSpace::line(&xs).unwrap();
        let nodes: Vec<UncertainNode> = s.points().map(|p| UncertainNode::deterministic(p.0, p)).collect();
        let part = Partition::round_robin(12, 2).unwrap();
        let params = ProtocolParams::new(2, 1, Objective::Median);
        let u = run_uncertain(&s, &nodes, &part, UncertainObjective::Median, &params).unwrap();
        let d = run_kt_median(&s, &part, &params).unwrap();
        assert_eq!(u.protocol.solution, d.solution);
        assert_eq!(u.mapped_cost, u.graph_cost);
    }

    #[test]
    fn mapped_cost_is_sound() {
        let s = MetricSpace::line(&[0.0, 1.0, 2.0, 10.0, 11.0, 30.0]).unwrap();
        let pair = |id, a, b| UncertainNode::new(id, vec![PointRef(a), PointRef(b)], vec![0.5, 0.5]).unwrap();
        let nodes = vec![pair(0, 0, 1), pair(1, 1, 2), pair(2, 3, 4), pair(3, 4, 3), pair(4, 5, 4)];
        let part = Partition::contiguous(5, 1).unwrap();
        for obj in [UncertainObjective::Median, UncertainObjective::Means, UncertainObjective::CenterPp] {
            let params = ProtocolParams::new(2, 1, obj.objective());
            let r = run_uncertain(&s, &nodes, &part, obj, &params).unwrap();
            assert!(r.soundness_holds(), "{obj:?}: {} vs {}", r.mapped_cost, r.graph_cost);
            assert!(r.solution.cost <= r.mapped_cost + 1e-9);
        }
    }
}
