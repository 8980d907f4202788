//! (k,t)-center-g: minimizing the expected maximum over realizations.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate, exceptional_adjust, geometric_index_set, Allocation, CostCurve};
use crate::error::{Error, Result};
use crate::instance::CostTable;
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::protocol::{
    child_seed, per_site, CommLedger, Direction, Partition, Payload, ProtocolReport, SiteState,
};
use crate::solution::ClusteringSolution;
use crate::solvers::bicriteria::{bicriteria_truncated, BicriteriaConfig, Relax};
use crate::solvers::kcenter::kt_center_outliers;

use super::{expected_distance, expected_truncated, support_universe, tau_grid, TauGrid, UncertainNode};

/// Largest realization count the exact evaluator enumerates.
pub const MAX_REALIZATIONS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterGParams {
    pub k: usize,
    pub t: u64,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Samples for the Monte Carlo objective estimate on large instances.
    pub mc_samples: usize,
}

impl CenterGParams {
    pub fn new(k: usize, t: u64) -> Self {
        Self {
            k,
            t,
            rho: 2.0,
            epsilon: 1.0,
            seed: 0,
            mc_samples: 20_000,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Allocation outcome for one truncation threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub tau: f64,
    pub t_i: Vec<u64>,
    /// `sum_i f_i(t_i)` for the hulls of the `6 tau`-truncated local costs.
    pub cost_6tau: f64,
    pub accepted: bool,
}

/// Mean and, for sampled estimates, the 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterGReport {
    /// Solution over nodes; its cost is the estimated expected maximum.
    pub protocol: ProtocolReport,
    pub grid: TauGrid,
    pub taus: Vec<TauRecord>,
    pub tau_hat: f64,
    /// `sum_i Csol(A_i, 2k, t_i, rho_{6 tau}) <= 12 tau` at the chosen threshold.
    pub condition_i: bool,
    /// The same preclusterings priced under `rho_{2 tau}`.
    pub cost_2tau_at_hat: f64,
    pub objective: Estimate,
    pub objective_seed: Option<u64>,
}

/// Two-round (k,t)-center-g.
///
/// For every threshold `tau` of the grid each site solves truncated
/// (2k, q)-median instances under `rho_{2 tau}` (reported under
/// `rho_{6 tau}`) at geometrically spaced `q` and sends the hull; the
/// coordinator allocates the outliers per threshold and picks the smallest
/// `tau` whose allocated cost is at most `12 tau`. Sites then forward the
/// preclustering for that threshold with their outlier nodes in full, and
/// the coordinator solves weighted (k,t)-center under expected distances
/// with `(1 + epsilon) t` exclusions.
pub fn run_center_g(
    space: &MetricSpace,
    nodes: &[UncertainNode],
    partition: &Partition,
    params: &CenterGParams,
) -> Result<CenterGReport> {
    let (k, t) = (params.k, params.t);
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(params.rho > 1.0) || !(params.epsilon > 0.0) {
        return Err(Error::InvalidParameter("rho must exceed 1 and epsilon must be positive".into()));
    }
    if partition.num_items() != nodes.len() {
        return Err(Error::InconsistentInput(format!(
            "partition covers {} items but there are {} nodes",
            partition.num_items(),
            nodes.len()
        )));
    }
    if nodes.len() as u64 <= t {
        return Err(Error::infeasible(format!("{} nodes cannot leave more than t = {t} outliers", nodes.len())));
    }
    for n in nodes {
        n.check(space)?;
    }
    let all: Vec<PointRef> = space.points().collect();
    let grid = tau_grid(space, &all)?;
    let qs = geometric_index_set(t, params.rho)?.values().to_vec();
    let s = partition.num_sites();
    let mut ledger = CommLedger::new(space.word_width() as u64);

    // round one: one hull per site and threshold
    let states = per_site(s, |i| {
        grid.taus
            .iter()
            .enumerate()
            .map(|(x, &tau)| site_state(space, nodes, partition.site(i), &qs, k, tau, child_seed(params.seed, (i * grid.taus.len() + x) as u64), i))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut runtimes: Vec<_> = states.iter().map(|(_, d)| *d).collect();
    let states: Vec<Vec<SiteState<'_>>> = states.into_iter().map(|(v, _)| v).collect();

    let mut taus = Vec::with_capacity(grid.taus.len());
    let mut allocations: Vec<Allocation> = Vec::with_capacity(grid.taus.len());
    for (x, &tau) in grid.taus.iter().enumerate() {
        for (i, site) in states.iter().enumerate() {
            ledger.send(
                1,
                Direction::SiteToCoordinator,
                i,
                Payload::CostCurve {
                    vertices: site[x].curve.vertices.len() as u64,
                },
            );
        }
        let curves: Vec<CostCurve> = states.iter().map(|site| site[x].curve.clone()).collect();
        let alloc = exceptional_adjust(&allocate(&curves, t, params.rho)?, &curves);
        let cost: f64 = curves.iter().zip(&alloc.t_i).map(|(c, &ti)| c.eval(ti)).sum();
        taus.push(TauRecord {
            tau,
            t_i: alloc.t_i.clone(),
            cost_6tau: cost,
            accepted: cost <= 12.0 * tau,
        });
        allocations.push(alloc);
    }
    let hat = taus.iter().position(|r| r.accepted).ok_or_else(|| {
        Error::InternalInvariant("no truncation threshold satisfies the selection rule".into())
    })?;
    let tau_hat = grid.taus[hat];
    ledger.broadcast(1, s, Payload::TauReport);
    ledger.broadcast(1, s, Payload::Pivot);
    let t_hat = &allocations[hat].t_i;

    // round two: preclusterings for the chosen threshold
    let forwarded = per_site(s, |i| {
        let st = &states[i][hat];
        let Some(sol) = st.solution_at(t_hat[i], Objective::Median) else {
            return Ok((Vec::new(), Vec::new(), 0.0));
        };
        let mut mass = vec![0u64; sol.centers.len()];
        for a in sol.assignment.iter().flatten() {
            mass[*a] += 1;
        }
        let centers: Vec<(PointRef, u64)> = sol.centers.iter().copied().zip(mass).collect();
        let outliers: Vec<usize> = sol.outliers().into_iter().map(|x| st.members[x]).collect();
        // audit only: the same centers and outliers under rho_{2 tau}
        let members = &st.members;
        let slots: Vec<usize> = (0..sol.centers.len()).collect();
        let audit = CostTable::from_fn(space, vec![1; members.len()], &sol.centers, |j, u| {
            expected_truncated(space, &nodes[members[j]], u, 2.0 * tau_hat)
        })?
        .evaluate(&slots, t_hat[i], Objective::Median)
        .cost;
        Ok((centers, outliers, audit))
    })?;
    let mut coordinator_points: Vec<(PointRef, u64)> = Vec::new();
    let mut coordinator_nodes: Vec<usize> = Vec::new();
    let mut cost_2tau_at_hat = 0.0;
    for (i, ((centers, outliers, audit), d)) in forwarded.iter().enumerate() {
        runtimes[i] += *d;
        cost_2tau_at_hat += audit;
        let members = partition.site(i).len() as u64;
        let sent: u64 = centers.iter().map(|c| c.1).sum::<u64>() + outliers.len() as u64;
        if sent != members {
            return Err(Error::InternalInvariant(format!("site {i} forwarded {sent} of {members} nodes")));
        }
        if members == 0 {
            continue;
        }
        ledger.send(
            2,
            Direction::SiteToCoordinator,
            i,
            Payload::Preclustering {
                weighted_centers: centers.len() as u64,
                points: 0,
                collapsed: 0,
                node_words: outliers.iter().map(|&j| nodes[j].encoding_words()).sum(),
                count: false,
            },
        );
        coordinator_points.extend(centers.iter().filter(|c| c.1 > 0).copied());
        coordinator_nodes.extend(outliers.iter().copied());
    }

    // coordinator: weighted center under expected distances
    let start = Instant::now();
    let budget = ((1.0 + params.epsilon) * t as f64 + 1e-9).floor() as u64;
    let mut facilities: Vec<PointRef> = coordinator_points.iter().map(|c| c.0).collect();
    let forwarded_nodes: Vec<UncertainNode> = coordinator_nodes.iter().map(|&j| nodes[j].clone()).collect();
    facilities.extend(support_universe(&forwarded_nodes));
    let weights: Vec<u64> = coordinator_points
        .iter()
        .map(|c| c.1)
        .chain(std::iter::repeat_n(1, coordinator_nodes.len()))
        .collect();
    let n_points = coordinator_points.len();
    let pts = coordinator_points.clone();
    let table = CostTable::from_fn(space, weights, &facilities, move |j, u| {
        if j < n_points {
            space.dist(pts[j].0, u)
        } else {
            expected_distance(space, &forwarded_nodes[j - n_points], u, 1)
        }
    })?;
    let coord = kt_center_outliers(&table, k, budget.min(table.total_weight().saturating_sub(1)))?;
    let coordinator_runtime = start.elapsed();

    // node-level solution: nearest center by expected distance
    let node_table = CostTable::from_fn(space, vec![1; nodes.len()], &coord.centers, |j, u| {
        expected_distance(space, &nodes[j], u, 1)
    })?;
    let slots: Vec<usize> = (0..node_table.n_facilities()).collect();
    let mut solution = node_table.evaluate(&slots, budget.min(nodes.len() as u64 - 1), Objective::Center);
    let mc_seed = child_seed(params.seed, u64::MAX - 1);
    let (objective, objective_seed) = match eval_center_g_objective(space, nodes, &solution, EvalMode::Exact) {
        Ok(e) => (e, None),
        Err(Error::SizeLimit(_)) => (
            eval_center_g_objective(
                space,
                nodes,
                &solution,
                EvalMode::MonteCarlo {
                    samples: params.mc_samples,
                    seed: mc_seed,
                },
            )?,
            Some(mc_seed),
        ),
        Err(e) => return Err(e),
    };
    solution.cost = objective.mean;

    let protocol = ProtocolReport {
        algorithm: "center-g".into(),
        objective: Objective::Center,
        k,
        t,
        rounds: ledger.num_rounds(),
        ledger,
        allocation: Some(allocations[hat].clone()),
        site_outliers: t_hat.clone(),
        locally_ignored: 0,
        coordinator_clients: table.n_clients(),
        coordinator_cost: coord.cost,
        coordinator_excluded: coord.excluded_weight(),
        merge_audit: None,
        site_runtimes: runtimes,
        coordinator_runtime,
        solution,
    };
    Ok(CenterGReport {
        protocol,
        condition_i: taus[hat].cost_6tau <= 12.0 * tau_hat,
        tau_hat,
        taus,
        grid,
        cost_2tau_at_hat,
        objective,
        objective_seed,
    })
}

#[allow(clippy::too_many_arguments)]
fn site_state<'a>(
    space: &'a MetricSpace,
    nodes: &'a [UncertainNode],
    members: &[usize],
    qs: &[u64],
    k: usize,
    tau: f64,
    seed: u64,
    site: usize,
) -> Result<SiteState<'a>> {
    if members.is_empty() {
        return SiteState::empty(site, qs);
    }
    let local: Vec<UncertainNode> = members.iter().map(|&j| nodes[j].clone()).collect();
    let facilities = support_universe(&local);
    let n = members.len() as u64;
    let mut centers = Vec::with_capacity(qs.len());
    for &q in qs {
        let cfg = BicriteriaConfig::new(1.0, Relax::Centers)?.with_seed(child_seed(seed, q));
        let owned = local.clone();
        let sol = bicriteria_truncated(
            space,
            vec![1; local.len()],
            &facilities,
            k,
            q.min(n - 1),
            2.0 * tau,
            &cfg,
            move |j, u, tau| expected_truncated(space, &owned[j], u, tau),
        )?;
        centers.push(sol.solution.centers);
    }
    let union: Vec<PointRef> = centers.iter().flatten().copied().collect();
    let ids: Vec<usize> = members.to_vec();
    let table = CostTable::from_fn(space, vec![1; members.len()], &union, move |j, u| {
        expected_truncated(space, &nodes[ids[j]], u, 6.0 * tau)
    })?;
    SiteState::from_center_sets(site, members.to_vec(), table, qs, &centers, Objective::Median)
}

/// `E[max_j d(X_j, c_j)]` over non-excluded nodes, each attached to its
/// assigned center in `sol` (indexed like `nodes`).
pub fn eval_center_g_objective(
    space: &MetricSpace,
    nodes: &[UncertainNode],
    sol: &ClusteringSolution,
    mode: EvalMode,
) -> Result<Estimate> {
    if sol.num_clients() != nodes.len() {
        return Err(Error::InconsistentInput("solution and node set differ in size".into()));
    }
    // per kept node: distances of its atoms to its center, with probabilities
    let mut atoms: Vec<Vec<(f64, f64)>> = Vec::new();
    for (j, node) in nodes.iter().enumerate() {
        if sol.excluded[j] > 0 {
            continue;
        }
        let c = sol.center_of(j).ok_or_else(|| {
            Error::InconsistentSolution(format!("node {j} is neither assigned nor excluded"))
        })?;
        atoms.push(node.support.iter().zip(&node.probs).map(|(&p, &w)| (space.dist(p, c), w)).collect());
    }
    match mode {
        EvalMode::Exact => {
            let count = atoms.iter().try_fold(1u128, |acc, a| {
                let next = acc * a.len() as u128;
                (next <= MAX_REALIZATIONS).then_some(next)
            });
            if count.is_none() {
                return Err(Error::SizeLimit(format!(
                    "more than {MAX_REALIZATIONS} realizations to enumerate"
                )));
            }
            let mut idx = vec![0usize; atoms.len()];
            let mut total = 0.0;
            loop {
                let mut prob = 1.0;
                let mut worst: f64 = 0.0;
                for (a, &x) in atoms.iter().zip(&idx) {
                    prob *= a[x].1;
                    worst = worst.max(a[x].0);
                }
                total += prob * worst;
                // odometer step
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] < atoms[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
            Ok(Estimate {
                mean: total,
                half_width: 0.0,
                exact: true,
            })
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // running mean and squared deviation (Welford)
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for i in 0..samples {
                let mut worst: f64 = 0.0;
                for a in &atoms {
                    let mut r: f64 = rng.random();
                    let mut d = a[a.len() - 1].0;
                    for &(dist, w) in a {
                        if r < w {
                            d = dist;
                            break;
                        }
                        r -= w;
                    }
                    worst = worst.max(d);
                }
                let delta = worst - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (worst - mean);
            }
            let n = samples as f64;
            let var = (m2 / (n - 1.0)).max(0.0);
            Ok(Estimate {
                mean,
                half_width: 1.96 * (var / n).sqrt(),
                exact: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_instance() -> (MetricSpace, Vec<UncertainNode>, ClusteringSolution) {
        // centers at 0 and 100; node 0 sits at distance 0 or 4 from 0,
        // node 1 at distance 0 or 2 from 100
        let s = MetricSpace::line(&[0.0, 4.0, 100.0, 102.0]).unwrap();
        let nodes = vec![
            UncertainNode::new(0, vec![PointRef(0), PointRef(1)], vec![0.5, 0.5]).unwrap(),
            UncertainNode::new(1, vec![PointRef(2), PointRef(3)], vec![0.5, 0.5]).unwrap(),
        ];
        let sol = ClusteringSolution {
            centers: vec![PointRef(0), PointRef(2)],
            assignment: vec![Some(0), Some(1)],
            excluded: vec![0, 0],
            cost: 0.0,
        };
        (s, nodes, sol)
    }

    #[test]
    fn exact_expected_maximum() {
        let (s, nodes, sol) = two_node_instance();
        let e = eval_center_g_objective(&s, &nodes, &sol, EvalMode::Exact).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_agrees() {
        let (s, nodes, sol) = two_node_instance();
        let e = eval_center_g_objective(&s, &nodes, &sol, EvalMode::MonteCarlo { samples: 100_000, seed: 3 }).unwrap();
        assert!((e.mean - 2.5).abs() < 0.02, "{e:?}");
        assert!((e.mean - 2.5).abs() <= 3.0 * e.half_width);
    }

    #[test]
    fn co_located_nodes_pick_smallest_tau() {
        let s = MetricSpace::line(&[0.0, 5.0]).unwrap();
        let nodes: Vec<UncertainNode> = (0..4).map(|i| UncertainNode::deterministic(i, PointRef(0))).collect();
        let part = Partition::round_robin(4, 2).unwrap();
        let r = run_center_g(&s, &nodes, &part, &CenterGParams::new(1, 1)).unwrap();
        assert_eq!(r.tau_hat, r.grid.taus[0]);
        assert!(r.condition_i);
        assert_eq!(r.protocol.rounds, 2);
        assert_eq!(r.objective.mean, 0.0);
    }

    #[test]
    fn spread_instance_runs() {
        let s = MetricSpace::line(&[0.0, 1.0, 2.0, 40.0, 41.0, 90.0]).unwrap();
        let pair = |id, a, b| UncertainNode::new(id, vec![PointRef(a), PointRef(b)], vec![0.5, 0.5]).unwrap();
        let nodes = vec![pair(0, 0, 1), pair(1, 1, 2), pair(2, 3, 4), pair(3, 4, 3), pair(4, 5, 4), pair(5, 0, 2)];
        let part = Partition::contiguous(6, 2).unwrap();
        let r = run_center_g(&s, &nodes, &part, &CenterGParams::new(2, 1)).unwrap();
        assert!(r.condition_i);
        assert!(r.protocol.solution.excluded_weight() <= 2);
        assert!(r.objective.mean < 50.0, "{:?}", r.objective);
    }
}
