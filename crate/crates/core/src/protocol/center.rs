//! Two-round (k,t)-center built on farthest-first orders.

use std::time::Instant;

use crate::allocation::allocate_marginals;
use crate::error::{Error, Result};
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective};
use crate::solvers::gonzalez::{gonzalez_prefix, GonzalezOrder};
use crate::solvers::kcenter::kt_center_outliers;

use super::ledger::{CommLedger, Direction, Payload};
use super::median::Forwarding;
use super::partition::Partition;
use super::{final_solution, per_site, point_clients, ProtocolParams, ProtocolReport};

/// Two-round distributed (k,t)-center over the points of `space`.
///
/// Each site computes the first `k + t` points of its farthest-first order
/// and reports the insertion radii past position `k` as its marginal costs.
/// After the coordinator splits `floor(rho t)` outliers, site `i` forwards
/// its first `k + t_i` ordered points, each weighted by the number of local
/// points nearest to it. The coordinator solves weighted (k,t)-center on
/// them with exactly `t` excluded copies.
pub fn run_kt_center(space: &MetricSpace, partition: &Partition, params: &ProtocolParams) -> Result<ProtocolReport> {
    run_center_variant(space, partition, params, false)
}

pub(crate) fn run_center_variant(
    space: &MetricSpace,
    partition: &Partition,
    params: &ProtocolParams,
    one_round: bool,
) -> Result<ProtocolReport> {
    let clients = point_clients(space);
    center_on_clients(space, &clients, Forwarding::Points, partition, params, one_round)
}

struct CenterSite {
    members: Vec<usize>,
    order: Option<GonzalezOrder>,
}

pub(crate) fn center_on_clients(
    space: &MetricSpace,
    clients: &[AnchoredClient],
    forwarding: Forwarding,
    partition: &Partition,
    params: &ProtocolParams,
    one_round: bool,
) -> Result<ProtocolReport> {
    let mut params = *params;
    params.objective = Objective::Center;
    if partition.num_items() != clients.len() {
        return Err(Error::InconsistentInput(format!(
            "partition covers {} items but the instance has {}",
            partition.num_items(),
            clients.len()
        )));
    }
    let total_weight: u64 = clients.iter().map(|c| c.weight).sum();
    params.validate(total_weight.min(usize::MAX as u64) as usize)?;
    let (k, t) = (params.k, params.t);
    let s = partition.num_sites();
    let mut ledger = CommLedger::new(space.word_width() as u64);
    let prefix = k.saturating_add(t.min(usize::MAX as u64) as usize);

    let sites = per_site(s, |i| {
        let members = partition.site(i).to_vec();
        if members.is_empty() {
            return Ok(CenterSite { members, order: None });
        }
        let local: Vec<AnchoredClient> = members.iter().map(|&j| clients[j]).collect();
        let order = gonzalez_prefix(local.len(), prefix, |a, b| {
            local[a].distance_between(&local[b], space, a == b)
        })?;
        Ok(CenterSite {
            members,
            order: Some(order),
        })
    })?;
    let mut runtimes: Vec<_> = sites.iter().map(|(_, d)| *d).collect();
    let sites: Vec<CenterSite> = sites.into_iter().map(|(c, _)| c).collect();

    let (allocation, t_i) = if one_round {
        (None, vec![t; s])
    } else {
        let rows: Vec<Vec<f64>> = sites
            .iter()
            .map(|site| {
                let n_i = site.members.len();
                (1..=t)
                    .map(|q| match &site.order {
                        Some(o) if k as u64 + q <= n_i as u64 => o.radius_at(k + q as usize),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        for (i, site) in sites.iter().enumerate() {
            let values = t.min(site.members.len().saturating_sub(k) as u64);
            ledger.send(1, Direction::SiteToCoordinator, i, Payload::ScalarSet { values });
        }
        let alloc = allocate_marginals(&rows, params.rho, t)?;
        ledger.broadcast(1, s, Payload::Pivot);
        let t_i = alloc.t_i.clone();
        (Some(alloc), t_i)
    };
    let round = if one_round { 1 } else { 2 };

    let forwarded = per_site(s, |i| {
        let site = &sites[i];
        let Some(order) = &site.order else {
            return Ok(Vec::new());
        };
        let keep = (k as u64 + t_i[i]).min(site.members.len() as u64) as usize;
        let chosen: Vec<AnchoredClient> = order.order[..keep].iter().map(|&x| clients[site.members[x]]).collect();
        let mut weight = vec![0u64; keep];
        for &j in &site.members {
            let c = &clients[j];
            let mut best = (0usize, f64::INFINITY);
            for (x, &pos) in order.order[..keep].iter().enumerate() {
                let d = c.distance_between(&chosen[x], space, site.members[pos] == j);
                if d < best.1 {
                    best = (x, d);
                }
            }
            weight[best.0] += c.weight;
        }
        Ok(chosen
            .into_iter()
            .zip(weight)
            .map(|(c, w)| AnchoredClient { weight: w, ..c })
            .collect::<Vec<_>>())
    })?;
    for (i, (_, d)) in forwarded.iter().enumerate() {
        runtimes[i] += *d;
    }
    let mut coordinator_clients = Vec::new();
    let mut site_outliers = Vec::with_capacity(s);
    for (i, (fw, _)) in forwarded.iter().enumerate() {
        let site_mass: u64 = sites[i].members.iter().map(|&j| clients[j].weight).sum();
        let sent: u64 = fw.iter().map(|c| c.weight).sum();
        if sent != site_mass {
            return Err(Error::InternalInvariant(format!(
                "site {i} forwarded {sent} of {site_mass} copies"
            )));
        }
        site_outliers.push(fw.len().saturating_sub(k) as u64);
        if fw.is_empty() {
            continue;
        }
        let n = fw.len() as u64;
        let payload = match forwarding {
            Forwarding::Points => Payload::Preclustering {
                weighted_centers: n,
                points: 0,
                collapsed: 0,
                node_words: 0,
                count: false,
            },
            // the offset travels as one extra word
            Forwarding::Collapsed => Payload::Preclustering {
                weighted_centers: n,
                points: 0,
                collapsed: 0,
                node_words: n,
                count: false,
            },
        };
        ledger.send(round, Direction::SiteToCoordinator, i, payload);
        coordinator_clients.extend(fw.iter().filter(|c| c.weight > 0).copied());
    }

    let start = Instant::now();
    let table = CostTable::for_anchored(space, &coordinator_clients)?;
    let coord = kt_center_outliers(&table, k, t)?;
    let coordinator_runtime = start.elapsed();
    let solution = final_solution(space, clients, &coord.centers, t, Objective::Center)?;

    Ok(ProtocolReport {
        algorithm: if one_round { "kt-center-1round" } else { "kt-center-2round" }.to_string(),
        objective: Objective::Center,
        k,
        t,
        solution,
        rounds: ledger.num_rounds(),
        ledger,
        allocation,
        site_outliers,
        locally_ignored: 0,
        coordinator_clients: coordinator_clients.len(),
        coordinator_cost: coord.cost,
        coordinator_excluded: coord.excluded_weight(),
        merge_audit: None,
        site_runtimes: runtimes,
        coordinator_runtime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::oracle::exact_oracle;
    use crate::metric::WeightedPoint;

    #[test]
    fn single_site_line() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0, 11.0, 100.0]).unwrap();
        let part = Partition::contiguous(5, 1).unwrap();
        let rep = run_kt_center(&s, &part, &ProtocolParams::new(2, 1, Objective::Center)).unwrap();
        let pts: Vec<WeightedPoint> = s.points().map(WeightedPoint::unit).collect();
        let opt = exact_oracle(&CostTable::for_points(&s, &pts).unwrap(), 2, 1, Objective::Center).unwrap();
        assert_eq!(opt.cost, 1.0);
        assert!(rep.solution.cost <= 3.0 * opt.cost);
        assert_eq!(rep.rounds, 2);
    }

    #[test]
    fn tiny_sites_become_centers() {
        let s = MetricSpace::line(&[0.0, 5.0, 9.0, 20.0]).unwrap();
        let part = Partition::contiguous(4, 4).unwrap();
        let rep = run_kt_center(&s, &part, &ProtocolParams::new(1, 0, Objective::Center)).unwrap();
        assert_eq!(rep.coordinator_clients, 4);
        let rep = run_kt_center(&s, &part, &ProtocolParams::new(4, 0, Objective::Center)).unwrap();
        assert_eq!(rep.solution.cost, 0.0);
    }

    #[test]
    fn symmetric_sites_split_evenly() {
        // two mirrored sites; equal marginals go to the lower site first
        let s = MetricSpace::line(&[0.0, 1.0, 3.0, 100.0, 101.0, 103.0]).unwrap();
        let part = Partition::new(vec![vec![0, 1, 2], vec![3, 4, 5]], 6).unwrap();
        let rep = run_kt_center(&s, &part, &ProtocolParams::new(1, 1, Objective::Center)).unwrap();
        assert_eq!(rep.allocation.unwrap().t_i, vec![1, 1]);
    }
}
