//! Round-based simulation of the coordinator model.
//!
//! Sites run their local computations (in parallel when a thread pool is
//! available) and messages are merged in site order before the coordinator
//! sees them, so every run is deterministic. All traffic is recorded in a
//! [`CommLedger`].

mod center;
pub mod ledger;
mod median;
pub mod partition;
mod subquadratic;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::instance::{AnchoredClient, CostTable};
use crate::metric::{MetricSpace, Objective, PointRef};
use crate::solution::ClusteringSolution;

pub use center::run_kt_center;
pub use ledger::{CommLedger, Direction, Message, Payload, RoundTotals, TranscriptRecord};
pub use median::{run_kt_median, run_kt_median_clustering_only, run_one_round};
pub use partition::Partition;
pub use subquadratic::{recursion_depth, site_count, subquadratic_solve, SubquadraticConfig, SubquadraticReport};

pub(crate) use center::center_on_clients;
pub(crate) use median::{default_local_solver, median_on_clients, Forwarding, MedianSetup, MedianVariant, SiteState};


/// Parameters shared by the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub k: usize,
    pub t: u64,
    pub objective: Objective,
    /// Allocation slack: the sites jointly drop `floor(rho t)` outliers.
    pub rho: f64,
    /// Outlier relaxation of the coordinator's solver.
    pub epsilon: f64,
    /// Slack of the clustering-only variant, which uses `rho = 1 + delta`.
    pub delta: f64,
    pub seed: u64,
}

impl ProtocolParams {
    pub fn new(k: usize, t: u64, objective: Objective) -> Self {
        Self {
            k,
            t,
            objective,
            rho: 2.0,
            epsilon: 1.0,
            delta: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        if n as u64 <= self.t {
            return Err(Error::infeasible(format!("{n} input items cannot leave more than t = {} outliers", self.t)));
        }
        Ok(())
    }
}

/// Audit of the exceptional site's two-solution merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeAudit {
    pub site: usize,
    pub t_low: u64,
    pub t_high: u64,
    pub target: u64,
    /// Cost of the constructive merge.
    pub constructed_cost: f64,
    /// `(1 - theta) f(t_low) + theta f(t_high)`.
    pub bound: f64,
    /// Cost after reassigning to the nearest merged center.
    pub sent_cost: f64,
}

/// Outcome of a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub algorithm: String,
    pub objective: Objective,
    pub k: usize,
    pub t: u64,
    /// Final solution over all input items, indexed as in the input.
    pub solution: ClusteringSolution,
    pub rounds: u32,
    pub ledger: CommLedger,
    pub allocation: Option<Allocation>,
    /// Outlier count each site used for its forwarded solution.
    pub site_outliers: Vec<u64>,
    /// Items dropped at the sites without being forwarded.
    pub locally_ignored: u64,
    pub coordinator_clients: usize,
    pub coordinator_cost: f64,
    pub coordinator_excluded: u64,
    pub merge_audit: Option<MergeAudit>,
    #[serde(skip)]
    pub site_runtimes: Vec<Duration>,
    #[serde(skip)]
    pub coordinator_runtime: Duration,
}

/// Deterministic child seed for a named stream.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const COORDINATOR_STREAM: u64 = u64::MAX;

/// Unit-weight clients for every point of a space.
pub(crate) fn point_clients(space: &MetricSpace) -> Vec<AnchoredClient> {
    space.points().map(|p| AnchoredClient::point(p, 1)).collect()
}

/// Nearest-center evaluation of `centers` over all clients.
pub(crate) fn final_solution(
    space: &MetricSpace,
    clients: &[AnchoredClient],
    centers: &[PointRef],
    budget: u64,
    obj: Objective,
) -> Result<ClusteringSolution> {
    let table = CostTable::for_anchored_with(space, clients, centers)?;
    let slots: Vec<usize> = (0..table.n_facilities()).collect();
    Ok(table.evaluate(&slots, budget, obj))
}

/// Runs `f` for every site, possibly in parallel, returning results in site
/// order; the first error in site order wins.
pub(crate) fn per_site<T, F>(sites: usize, f: F) -> Result<Vec<(T, Duration)>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let results: Vec<Result<(T, Duration)>> = (0..sites)
        .into_par_iter()
        .map(|i| {
            let start = std::time::Instant::now();
            f(i).map(|v| (v, start.elapsed())).map_err(|e| e.at_site(i))
        })
        .collect();
    results.into_iter().collect()
}
