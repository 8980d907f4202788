//! Sub-quadratic centralized (k,t)-median by simulating the two-round
//! protocol on a split of the input, recursively.
//!
//! A level whose sites run an `O(n^{1 + a})` solver balances its work with
//! `n^{1 + a} = s^{2 + a}` sites and then runs in `O(n^{1 + a / (2 + a)})`.
//! Starting from the quadratic solver the exponents go `1, 1/3, 1/7, ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::solution::ClusteringSolution;
use crate::solvers::bicriteria::{bicriteria_median, BicriteriaConfig, Relax};

use super::median::{median_on_clients, Forwarding, MedianSetup, MedianVariant};
use super::partition::Partition;
use super::{child_seed, final_solution, point_clients, ProtocolParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubquadraticConfig {
    pub k: usize,
    pub t: u64,
    pub alpha: f64,
    pub objective: Objective,
    pub seed: u64,
    /// Instances at most this large are solved directly.
    pub base_size: usize,
}

impl SubquadraticConfig {
    pub fn new(k: usize, t: u64, alpha: f64) -> Self {
        Self {
            k,
            t,
            alpha,
            objective: Objective::Median,
            seed: 0,
            base_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubquadraticReport {
    pub solution: ClusteringSolution,
    pub depth: u32,
    /// Number of sites at the top level; 1 when solved directly.
    pub top_sites: usize,
    /// Distance evaluations spent, the machine-independent work measure.
    pub distance_evaluations: u64,
}

/// `ceil(log2(1 + 1/alpha))`.
pub fn recursion_depth(alpha: f64) -> Result<u32> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok((1.0 + 1.0 / alpha).log2().ceil().max(0.0) as u32)
}

/// Work exponent reached after `m` levels above the quadratic solver.
fn level_exponent(m: u32) -> f64 {
    let mut a = 1.0;
    for _ in 0..m {
        a /= 2.0 + a;
    }
    a
}

/// `n^{(1 + a)/(2 + a)}` rounded, at least 2 and at most `n / (k + t + 1)`.
pub fn site_count(n: usize, a: f64, k: usize, t: u64) -> usize {
    let s = (n as f64).powf((1.0 + a) / (2.0 + a)).round() as usize;
    let cap = n / (k + t as usize + 1);
    s.min(cap).max(2)
}

/// Clusters all points of `space`, excluding at most `2t` of them.
pub fn subquadratic_solve(space: &MetricSpace, cfg: &SubquadraticConfig) -> Result<SubquadraticReport> {
    let n = space.len();
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if cfg.objective == Objective::Center {
        return Err(Error::InvalidParameter("sub-quadratic solving covers median and means".into()));
    }
    if (cfg.t as u128) * (cfg.t as u128) > n as u128 {
        return Err(Error::PreconditionViolation(format!(
            "t = {} exceeds sqrt(n) for n = {n}",
            cfg.t
        )));
    }
    if n as u64 <= cfg.t {
        return Err(Error::infeasible(format!("{n} points cannot leave more than t = {} outliers", cfg.t)));
    }
    let depth = recursion_depth(cfg.alpha)?;
    let before = space.evaluations();
    let clients = point_clients(space);
    let (centers, top_sites) = solve_level(space, &clients, cfg, cfg.t, depth, Relax::Outliers, cfg.seed)?;
    // every level evaluates its own output, so the final pass is the only
    // extra cost: O(nk)
    let budget = 2 * cfg.t;
    let solution = final_solution(space, &clients, &centers, budget, cfg.objective)?;
    Ok(SubquadraticReport {
        solution,
        depth,
        top_sites,
        distance_evaluations: space.evaluations() - before,
    })
}

fn solve_level(
    space: &MetricSpace,
    clients: &[AnchoredClient],
    cfg: &SubquadraticConfig,
    t: u64,
    level: u32,
    relax: Relax,
    seed: u64,
) -> Result<(Vec<PointRef>, usize)> {
    let n = clients.len();
    let k = cfg.k;
    if level == 0 || n <= cfg.base_size || n / (k + t as usize + 1) < 2 {
        let table = CostTable::for_anchored(space, clients)?;
        let bc = BicriteriaConfig::new(1.0, relax)?.with_seed(seed);
        let budget = t.min(table.total_weight() - 1);
        return Ok((bicriteria_median(&table, k, budget, &bc, cfg.objective)?.solution.centers, 1));
    }
    let s = site_count(n, level_exponent(level - 1), k, t);
    let partition = Partition::contiguous(n, s)?;
    let mut params = ProtocolParams::new(k, t, cfg.objective).with_seed(seed);
    params.epsilon = 1.0;
    let setup = MedianSetup {
        space,
        clients,
        forwarding: Forwarding::Points,
        partition: &partition,
        params,
        coordinator_relax: relax,
        algorithm: Some("subquadratic".into()),
    };
    let local = |site: usize, local: &[AnchoredClient], _k: usize, qs: &[u64]| -> Result<Vec<Vec<PointRef>>> {
        let site_seed = child_seed(seed, site as u64);
        qs.iter()
            .map(|&q| {
                let q = q.min(local.len() as u64 - 1);
                solve_level(space, local, cfg, q, level - 1, Relax::Centers, child_seed(site_seed, q))
                    .map(|r| r.0)
            })
            .collect()
    };
    let report = median_on_clients(&setup, MedianVariant::TwoRound, &local)?;
    Ok((report.solution.centers, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_sites() {
        assert_eq!(recursion_depth(1.0).unwrap(), 1);
        assert_eq!(recursion_depth(0.5).unwrap(), 2);
        assert_eq!(recursion_depth(3.0).unwrap(), 1);
        assert!(recursion_depth(0.0).is_err());
        assert_eq!(site_count(256, 1.0, 1, 0), 40);
        assert_eq!(site_count(10, 1.0, 2, 2), 2);
        assert!((level_exponent(2) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_t() {
        let s = MetricSpace::line(&(0..16).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let cfg = SubquadraticConfig::new(2, 5, 1.0);
        assert!(matches!(subquadratic_solve(&s, &cfg), Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn clusters_separated_groups() {
        let mut xs = Vec::new();
        for i in 0..100 {
            xs.push(if i % 2 == 0 { 0.0 } else { 1000.0 } + (i / 2) as f64 * 0.01);
        }
        xs.push(1e6);
        let s = MetricSpace::line(&xs).unwrap();
        let rep = subquadratic_solve(&s, &SubquadraticConfig::new(2, 1, 1.0)).unwrap();
        assert!(rep.top_sites >= 2);
        assert!(rep.solution.excluded_weight() <= 2);
        assert!(rep.solution.cost < 100.0, "cost {}", rep.solution.cost);
    }
}
