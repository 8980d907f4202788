//! Two-round (k,t)-median/means with outlier allocation, its clustering-only
//! variant and the one-round baseline.

use std::time::{Duration, Instant};

use crate::allocation::{
    allocate, exceptional_adjust, geometric_index_set, merge_two_solutions, CostCurve,
};
use crate::error::{Error, Result};
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::solution::{exclude_most_expensive, ClusteringSolution};
use crate::solvers::bicriteria::{bicriteria_median, BicriteriaConfig, Relax};
use crate::solvers::combine::combine_weighted;

use super::ledger::{CommLedger, Direction, Payload};
use super::partition::Partition;
use super::{child_seed, final_solution, per_site, point_clients, MergeAudit, ProtocolParams, ProtocolReport, COORDINATOR_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MedianVariant {
    TwoRound,
    ClusteringOnly,
    OneRound,
}

impl MedianVariant {
    fn name(self) -> &'static str {
        match self {
            MedianVariant::TwoRound => "kt-median-2round",
            MedianVariant::ClusteringOnly => "kt-median-clustering-only",
            MedianVariant::OneRound => "kt-median-1round",
        }
    }
}

/// How forwarded outliers are encoded on the wire.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Forwarding {
    /// Plain points, `B` words each.
    Points,
    /// Collapsed nodes: a point plus the collapse cost.
    Collapsed,
}

/// Site-local solver: for each requested outlier count returns the centers
/// of a solution on the given clients with about `2k` centers.
pub(crate) type LocalSolver<'s> =
    dyn Fn(usize, &[AnchoredClient], usize, &[u64]) -> Result<Vec<Vec<PointRef>>> + Sync + 's;

pub(crate) struct MedianSetup<'a> {
    pub space: &'a MetricSpace,
    pub clients: &'a [AnchoredClient],
    pub forwarding: Forwarding,
    pub partition: &'a Partition,
    pub params: ProtocolParams,
    pub coordinator_relax: Relax,
    pub algorithm: Option<String>,
}

/// Two-round distributed (k,t)-median or means over the points of `space`.
///
/// Sites evaluate a local solver at geometrically spaced outlier counts and
/// send the lower hull of the resulting costs. The coordinator splits
/// `floor(rho t)` outliers by ranking hull marginals and broadcasts the
/// pivot; sites then forward `2k` weighted centers and their `t_i` outliers,
/// which the coordinator clusters with at most `(1 + epsilon) t` exclusions.
pub fn run_kt_median(space: &MetricSpace, partition: &Partition, params: &ProtocolParams) -> Result<ProtocolReport> {
    run_points(space, partition, params, MedianVariant::TwoRound)
}

/// Variant that never transmits outlier identities: sites report only how
/// many points they ignore, with the allocation slack `rho = 1 + delta`.
pub fn run_kt_median_clustering_only(
    space: &MetricSpace,
    partition: &Partition,
    params: &ProtocolParams,
) -> Result<ProtocolReport> {
    run_points(space, partition, params, MedianVariant::ClusteringOnly)
}

/// Single-round baseline: every site forwards `2k` centers and `t` outliers.
pub fn run_one_round(space: &MetricSpace, partition: &Partition, params: &ProtocolParams) -> Result<ProtocolReport> {
    if params.objective == Objective::Center {
        return super::center::run_center_variant(space, partition, params, true);
    }
    run_points(space, partition, params, MedianVariant::OneRound)
}

fn run_points(
    space: &MetricSpace,
    partition: &Partition,
    params: &ProtocolParams,
    variant: MedianVariant,
) -> Result<ProtocolReport> {
    let clients = point_clients(space);
    let setup = MedianSetup {
        space,
        clients: &clients,
        forwarding: Forwarding::Points,
        partition,
        params: *params,
        coordinator_relax: Relax::Outliers,
        algorithm: None,
    };
    let solver = default_local_solver(space, params.objective, params.seed);
    median_on_clients(&setup, variant, &solver)
}

/// Bicriteria with `epsilon = 1` and relaxed centers at every requested count.
pub(crate) fn default_local_solver(
    space: &MetricSpace,
    obj: Objective,
    seed: u64,
) -> impl Fn(usize, &[AnchoredClient], usize, &[u64]) -> Result<Vec<Vec<PointRef>>> + Sync + '_ {
    move |site, clients, k, qs| {
        let table = CostTable::for_anchored(space, clients)?;
        let total = table.total_weight();
        let site_seed = child_seed(seed, site as u64);
        qs.iter()
            .map(|&q| {
                let cfg = BicriteriaConfig::new(1.0, Relax::Centers)?.with_seed(child_seed(site_seed, q));
                let sol = bicriteria_median(&table, k, q.min(total - 1), &cfg, obj)?;
                Ok(sol.solution.centers)
            })
            .collect()
    }
}

/// Round-one state kept by a site.
pub(crate) struct SiteState<'a> {
    /// Global client ids.
    pub members: Vec<usize>,
    pub table: Option<CostTable<'a>>,
    qs: Vec<u64>,
    /// Center slots per entry of `qs`.
    center_slots: Vec<Vec<usize>>,
    pub curve: CostCurve,
}

impl<'a> SiteState<'a> {
    pub(crate) fn empty(site: usize, qs: &[u64]) -> Result<Self> {
        Ok(Self {
            members: Vec::new(),
            table: None,
            qs: qs.to_vec(),
            center_slots: Vec::new(),
            curve: CostCurve::new(site, vec![(0, 0.0)])?,
        })
    }

    /// Site state from one center set per count in `qs`; every center must
    /// be a facility of `table`. The curve samples are the clamped costs.
    pub(crate) fn from_center_sets(
        site: usize,
        members: Vec<usize>,
        table: CostTable<'a>,
        qs: &[u64],
        centers: &[Vec<PointRef>],
        obj: Objective,
    ) -> Result<Self> {
        let center_slots = centers
            .iter()
            .map(|c| {
                c.iter()
                    .map(|p| {
                        table.facility_of(*p).ok_or_else(|| {
                            Error::InternalInvariant(format!("center {} is not a facility", p.0))
                        })
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut state = SiteState {
            members,
            table: Some(table),
            qs: qs.to_vec(),
            center_slots,
            curve: CostCurve::new(site, vec![(0, 0.0)])?,
        };
        // the one-round run samples only q = t and needs no curve
        if qs.first() == Some(&0) {
            let samples: Vec<(u64, f64)> = qs
                .iter()
                .map(|&q| (q, state.solution_at(q, obj).expect("non-empty site").cost))
                .collect();
            state.curve = CostCurve::new(site, samples)?;
        }
        Ok(state)
    }

    /// Best solution among the center sets computed for counts `<= q`,
    /// evaluated with exactly `q` exclusions.
    pub(crate) fn solution_at(&self, q: u64, obj: Objective) -> Option<ClusteringSolution> {
        let table = self.table.as_ref()?;
        let mut best: Option<ClusteringSolution> = None;
        for (x, &qx) in self.qs.iter().enumerate() {
            if qx > q && x > 0 {
                break;
            }
            let sol = table.evaluate(&self.center_slots[x], q, obj);
            if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
                best = Some(sol);
            }
        }
        best
    }
}

/// What a site forwards in round two.
struct Forwarded {
    centers: Vec<AnchoredClient>,
    /// Global ids and excluded copies of forwarded outliers.
    outliers: Vec<(usize, u64)>,
    ignored: u64,
    excluded: u64,
    message: Option<Payload>,
    audit: Option<MergeAudit>,
}

pub(crate) fn median_on_clients(
    setup: &MedianSetup<'_>,
    variant: MedianVariant,
    local: &LocalSolver<'_>,
) -> Result<ProtocolReport> {
    let MedianSetup {
        space,
        clients,
        partition,
        params,
        ..
    } = *setup;
    let obj = params.objective;
    if obj == Objective::Center {
        return Err(Error::InvalidParameter("use the center protocol for the center objective".into()));
    }
    if partition.num_items() != clients.len() {
        return Err(Error::InconsistentInput(format!(
            "partition covers {} items but the instance has {}",
            partition.num_items(),
            clients.len()
        )));
    }
    let total_weight: u64 = clients.iter().map(|c| c.weight).sum();
    params.validate(total_weight.min(usize::MAX as u64) as usize)?;
    let s = partition.num_sites();
    let k = params.k;
    let t = params.t;
    let mut ledger = CommLedger::new(space.word_width() as u64);

    let rho = match variant {
        MedianVariant::ClusteringOnly => 1.0 + params.delta,
        _ => params.rho,
    };
    let index_set = match variant {
        MedianVariant::OneRound => vec![t],
        _ => geometric_index_set(t, rho)?.values().to_vec(),
    };

    // round one: local solutions and cost curves
    let states = per_site(s, |i| site_round_one(setup, i, &index_set, local))?;
    let mut runtimes: Vec<Duration> = states.iter().map(|(_, d)| *d).collect();
    let states: Vec<SiteState<'_>> = states.into_iter().map(|(st, _)| st).collect();

    let (allocation, t_i, adjusted) = match variant {
        MedianVariant::OneRound => (None, vec![t; s], vec![t; s]),
        _ => {
            for (i, st) in states.iter().enumerate() {
                ledger.send(
                    1,
                    Direction::SiteToCoordinator,
                    i,
                    Payload::CostCurve {
                        vertices: st.curve.vertices.len() as u64,
                    },
                );
            }
            let curves: Vec<CostCurve> = states.iter().map(|st| st.curve.clone()).collect();
            let alloc = allocate(&curves, t, rho)?;
            ledger.broadcast(1, s, Payload::Pivot);
            let adjusted = match variant {
                MedianVariant::TwoRound => exceptional_adjust(&alloc, &curves),
                _ => alloc.clone(),
            };
            let t_i = alloc.t_i.clone();
            let adj = adjusted.t_i.clone();
            (Some(adjusted), t_i, adj)
        }
    };
    let forward_round = if variant == MedianVariant::OneRound { 1 } else { 2 };
    let pivot_site = allocation.as_ref().and_then(|a| a.pivot).map(|p| p.site);

    // round two: preclusterings
    let forwarded = per_site(s, |i| {
        let st = &states[i];
        match variant {
            MedianVariant::ClusteringOnly => {
                forward_counts_only(st, clients, t_i[i], pivot_site == Some(i), i, obj)
            }
            _ => forward_with_outliers(st, clients, adjusted[i], setup.forwarding, obj),
        }
    })?;
    for (i, (_, d)) in forwarded.iter().enumerate() {
        runtimes[i] += *d;
    }
    let forwarded: Vec<Forwarded> = forwarded.into_iter().map(|(f, _)| f).collect();

    let mut coordinator_clients = Vec::new();
    let mut merge_audit = None;
    let mut locally_ignored = 0;
    for (i, f) in forwarded.iter().enumerate() {
        if let Some(p) = &f.message {
            ledger.send(forward_round, Direction::SiteToCoordinator, i, p.clone());
        }
        let center_mass: u64 = f.centers.iter().map(|c| c.weight).sum();
        let outlier_mass: u64 = f.outliers.iter().map(|o| o.1).sum();
        let site_mass: u64 = states[i].members.iter().map(|&j| clients[j].weight).sum();
        if center_mass + outlier_mass + f.ignored != site_mass {
            return Err(Error::InternalInvariant(format!(
                "site {i} preclustering accounts for {} of {site_mass} copies",
                center_mass + outlier_mass + f.ignored
            )));
        }
        coordinator_clients.extend(f.centers.iter().filter(|c| c.weight > 0).copied());
        coordinator_clients.extend(f.outliers.iter().map(|&(j, w)| AnchoredClient { weight: w, ..clients[j] }));
        locally_ignored += f.ignored;
        if f.audit.is_some() {
            merge_audit = f.audit;
        }
    }

    let start = Instant::now();
    // sites that ignored nearly everything may forward t or fewer copies
    let forwarded_mass: u64 = coordinator_clients.iter().map(|c| c.weight).sum();
    let coord_budget = t.min(forwarded_mass.saturating_sub(1));
    let cfg = BicriteriaConfig::new(params.epsilon, setup.coordinator_relax)?
        .with_seed(child_seed(params.seed, COORDINATOR_STREAM));
    let coord = combine_weighted(space, &coordinator_clients, k, coord_budget, obj, &cfg)?;
    let coordinator_runtime = start.elapsed();
    let coordinator_excluded = coord.excluded_weight();
    let solution = final_solution(space, clients, &coord.centers, coordinator_excluded + locally_ignored, obj)?;

    Ok(ProtocolReport {
        algorithm: setup.algorithm.clone().unwrap_or_else(|| variant.name().to_string()),
        objective: obj,
        k,
        t,
        solution,
        rounds: ledger.num_rounds(),
        ledger,
        allocation,
        site_outliers: forwarded.iter().map(|f| f.excluded).collect(),
        locally_ignored,
        coordinator_clients: coordinator_clients.len(),
        coordinator_cost: coord.cost,
        coordinator_excluded,
        merge_audit,
        site_runtimes: runtimes,
        coordinator_runtime,
    })
}

fn site_round_one<'a>(
    setup: &MedianSetup<'a>,
    site: usize,
    index_set: &[u64],
    local: &LocalSolver<'_>,
) -> Result<SiteState<'a>> {
    let members = setup.partition.site(site).to_vec();
    let obj = setup.params.objective;
    if members.is_empty() {
        return SiteState::empty(site, index_set);
    }
    let site_clients: Vec<AnchoredClient> = members.iter().map(|&j| setup.clients[j]).collect();
    let raw = local(site, &site_clients, setup.params.k, index_set)?;
    if raw.len() != index_set.len() {
        return Err(Error::InternalInvariant("local solver returned the wrong number of solutions".into()));
    }
    let padded: Vec<Vec<PointRef>> = raw
        .into_iter()
        .zip(index_set)
        .map(|(c, &q)| pad_centers(setup.space, &site_clients, c, 2 * setup.params.k, q, obj))
        .collect();
    let table = CostTable::for_anchored_with(setup.space, &site_clients, &padded.iter().flatten().copied().collect::<Vec<_>>())?;
    SiteState::from_center_sets(site, members, table, index_set, &padded, obj)
}

/// Grows a center set to `target` centers (or the number of distinct
/// anchors, if smaller) by repeatedly opening the anchor of the most
/// expensive client that is kept under `budget` exclusions.
fn pad_centers(
    space: &MetricSpace,
    clients: &[AnchoredClient],
    mut centers: Vec<PointRef>,
    target: usize,
    budget: u64,
    obj: Objective,
) -> Vec<PointRef> {
    centers.dedup();
    let mut distinct: Vec<PointRef> = clients.iter().map(|c| c.anchor).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let target = target.min(distinct.len());
    let mut open: std::collections::HashSet<PointRef> = centers.iter().copied().collect();
    if open.len() >= target {
        return centers;
    }
    let weights: Vec<u64> = clients.iter().map(|c| c.weight).collect();
    let mut nearest: Vec<f64> = clients
        .iter()
        .map(|c| {
            centers
                .iter()
                .map(|&u| obj.power(c.distance_to(space, u)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    while open.len() < target {
        let excluded = exclude_most_expensive(&nearest, &weights, budget);
        let pick = (0..clients.len())
            .filter(|&j| !open.contains(&clients[j].anchor))
            .max_by(|&a, &b| {
                let ka = excluded[a] < weights[a];
                let kb = excluded[b] < weights[b];
                ka.cmp(&kb)
                    .then(nearest[a].total_cmp(&nearest[b]))
                    .then(b.cmp(&a))
            })
            .expect("a client with an unopened anchor exists");
        let u = clients[pick].anchor;
        open.insert(u);
        centers.push(u);
        for (j, c) in clients.iter().enumerate() {
            nearest[j] = nearest[j].min(obj.power(c.distance_to(space, u)));
        }
    }
    centers
}

fn weighted_centers(sol: &ClusteringSolution, weights: &[u64]) -> Vec<AnchoredClient> {
    let mut mass = vec![0u64; sol.centers.len()];
    for (j, a) in sol.assignment.iter().enumerate() {
        if let Some(c) = a {
            mass[*c] += weights[j] - sol.excluded[j];
        }
    }
    sol.centers
        .iter()
        .zip(mass)
        .map(|(&p, w)| AnchoredClient::point(p, w))
        .collect()
}

fn forward_with_outliers(
    st: &SiteState<'_>,
    clients: &[AnchoredClient],
    t_i: u64,
    forwarding: Forwarding,
    obj: Objective,
) -> Result<Forwarded> {
    let Some(sol) = st.solution_at(t_i, obj) else {
        return Ok(Forwarded {
            centers: Vec::new(),
            outliers: Vec::new(),
            ignored: 0,
            excluded: 0,
            message: None,
            audit: None,
        });
    };
    let weights: Vec<u64> = st.members.iter().map(|&j| clients[j].weight).collect();
    let centers = weighted_centers(&sol, &weights);
    let outliers: Vec<(usize, u64)> = sol
        .excluded
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(x, &e)| (st.members[x], e))
        .collect();
    let (points, collapsed) = match forwarding {
        Forwarding::Points => (outliers.len() as u64, 0),
        Forwarding::Collapsed => (0, outliers.len() as u64),
    };
    Ok(Forwarded {
        message: Some(Payload::Preclustering {
            weighted_centers: centers.len() as u64,
            points,
            collapsed,
            node_words: 0,
            count: false,
        }),
        excluded: sol.excluded_weight(),
        centers,
        outliers,
        ignored: 0,
        audit: None,
    })
}

fn forward_counts_only(
    st: &SiteState<'_>,
    clients: &[AnchoredClient],
    t_i: u64,
    exceptional: bool,
    site: usize,
    obj: Objective,
) -> Result<Forwarded> {
    let Some(table) = st.table.as_ref() else {
        return Ok(Forwarded {
            centers: Vec::new(),
            outliers: Vec::new(),
            ignored: 0,
            excluded: 0,
            message: None,
            audit: None,
        });
    };
    let weights: Vec<u64> = st.members.iter().map(|&j| clients[j].weight).collect();
    let mut audit = None;
    let sol = if exceptional && !st.curve.is_vertex(t_i) {
        let lo = st.curve.vertex_at_or_below(t_i);
        let hi = st.curve.vertex_at_or_above(t_i);
        let sol_a = st.solution_at(lo, obj).expect("non-empty site");
        let sol_b = st.solution_at(hi, obj).expect("non-empty site");
        if sol_b.excluded_weight() < t_i {
            sol_b
        } else {
            let merged = merge_two_solutions(table, &sol_a, &sol_b, t_i, obj)?;
            let mut union: Vec<usize> = table.slots_of(&sol_a)?;
            union.extend(table.slots_of(&sol_b)?);
            union.sort_unstable();
            union.dedup();
            let sent = table.evaluate(&union, t_i, obj);
            audit = Some(MergeAudit {
                site,
                t_low: lo,
                t_high: hi,
                target: t_i,
                constructed_cost: merged.solution.cost,
                bound: merged.interpolate(sol_a.cost, sol_b.cost),
                sent_cost: sent.cost,
            });
            sent
        }
    } else {
        st.solution_at(t_i, obj).expect("non-empty site")
    };
    let centers = weighted_centers(&sol, &weights);
    Ok(Forwarded {
        message: Some(Payload::Preclustering {
            weighted_centers: centers.len() as u64,
            points: 0,
            collapsed: 0,
            node_words: 0,
            count: true,
        }),
        excluded: sol.excluded_weight(),
        ignored: sol.excluded_weight(),
        centers,
        outliers: Vec::new(),
        audit,
    })
}
