//! The `solve` and `oracle` commands as library calls.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use partclust::protocol::{
    child_seed, run_kt_center, run_kt_median, run_kt_median_clustering_only, run_one_round, subquadratic_solve,
    CommLedger, Partition, ProtocolParams, ProtocolReport, SubquadraticConfig,
};
use partclust::solvers::exact_oracle;
use partclust::uncertain::{
    eval_center_g_objective, expected_distance, run_center_g, run_uncertain, CenterGParams, EvalMode,
    UncertainNode, UncertainObjective,
};
use partclust::{AnchoredClient, ClusteringSolution, CostTable, MetricSpace, Objective, PointRef, WeightedPoint};
use serde_json::json;

use crate::config::{Algorithm, ExperimentConfig, PartitionRule};
use crate::io::{Dataset, ParseError};
use crate::report::{LedgerSummary, Report, Seeds, SolutionSummary, Timings};
use crate::seeds::PROTOCOL_STREAM;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Lib(#[from] partclust::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2: unreadable input or bad arguments, 3: infeasible instance,
    /// 4: oracle or evaluator size guard, 1: anything else.
    pub fn exit_code(&self) -> i32 {
        use partclust::Error as E;
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Lib(E::InvalidParameter(_) | E::PreconditionViolation(_) | E::InvalidNode { .. }) => 2,
            CliError::Lib(E::Infeasible { .. }) => 3,
            CliError::Lib(E::OracleSizeLimit(_) | E::SizeLimit(_)) => 4,
            _ => 1,
        }
    }
}

/// A finished run: the report plus the ledger for transcript dumps.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub ledger: Option<CommLedger>,
}

pub fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::Median => "median",
        Objective::Means => "means",
        Objective::Center => "center",
    }
}

fn partition(cfg: &ExperimentConfig, n: usize, labels: Option<&[usize]>) -> Result<Partition, CliError> {
    match cfg.partition {
        PartitionRule::RoundRobin => Ok(Partition::round_robin(n, cfg.sites)?),
        PartitionRule::Contiguous => Ok(Partition::contiguous(n, cfg.sites)?),
        PartitionRule::ByFile => {
            let labels = labels.ok_or_else(|| CliError::Usage("--partition by-file needs --labels".into()))?;
            if labels.len() != n {
                return Err(CliError::Usage(format!("{} site labels for {n} items", labels.len())));
            }
            Ok(Partition::from_labels(labels)?)
        }
    }
}

/// Nodes of an uncertain dataset; plain points act as deterministic nodes.
pub fn nodes_of(data: &Dataset) -> Result<Vec<UncertainNode>, CliError> {
    match data {
        Dataset::Uncertain(u) => Ok(u.nodes()?),
        _ => Ok((0..data.len()).map(|j| UncertainNode::deterministic(j, PointRef(j))).collect()),
    }
}

/// Outliers the algorithm may ignore under its guarantee.
pub fn allowed_outliers(cfg: &ExperimentConfig) -> u64 {
    let t = cfg.t as f64;
    let relaxed = ((1.0 + cfg.epsilon) * t + 1e-9).floor() as u64;
    match cfg.algorithm {
        Algorithm::KtCenter | Algorithm::UncertainCenterPp => cfg.t,
        Algorithm::OneRound if cfg.objective.map(Objective::from) == Some(Objective::Center) => cfg.t,
        Algorithm::KtMedianCo => relaxed + ((1.0 + cfg.delta) * t + 1e-9).floor() as u64,
        Algorithm::Subquadratic => 2 * cfg.t,
        _ => relaxed,
    }
}

struct Run {
    solution: ClusteringSolution,
    protocol: Option<ProtocolReport>,
    monte_carlo: Option<u64>,
    tau_hat: Option<f64>,
    extra: BTreeMap<String, serde_json::Value>,
}

fn protocol_extra(p: &ProtocolReport) -> BTreeMap<String, serde_json::Value> {
    let mut extra = BTreeMap::new();
    extra.insert("protocol".into(), json!(p.algorithm));
    extra.insert("coordinator_clients".into(), json!(p.coordinator_clients));
    extra.insert("coordinator_cost".into(), json!(p.coordinator_cost));
    extra.insert("coordinator_excluded".into(), json!(p.coordinator_excluded));
    extra.insert("locally_ignored".into(), json!(p.locally_ignored));
    extra.insert("site_outliers".into(), json!(p.site_outliers));
    if let Some(a) = &p.merge_audit {
        extra.insert("merge_audit".into(), json!(a));
    }
    extra
}

fn from_protocol(p: ProtocolReport) -> Run {
    Run {
        solution: p.solution.clone(),
        extra: protocol_extra(&p),
        protocol: Some(p),
        monte_carlo: None,
        tau_hat: None,
    }
}

/// Runs the configured algorithm on `data`.
pub fn solve(
    cfg: &ExperimentConfig,
    data: &Dataset,
    labels: Option<&[usize]>,
    timings: bool,
) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let obj = cfg.resolved_objective().map_err(CliError::Usage)?;
    let space = data.space()?;
    let n = data.len();
    if matches!(data, Dataset::Uncertain(_)) && !cfg.algorithm.is_uncertain() {
        return Err(CliError::Usage(format!(
            "{} clusters points; uncertain input needs an uncertain-* or center-g algorithm",
            cfg.algorithm.name()
        )));
    }
    let pseed = child_seed(cfg.seed, PROTOCOL_STREAM);
    let params = ProtocolParams::new(cfg.k, cfg.t, obj)
        .with_rho(cfg.rho)
        .with_epsilon(cfg.epsilon)
        .with_delta(cfg.delta)
        .with_seed(pseed);

    let run = match cfg.algorithm {
        Algorithm::Subquadratic => {
            let mut sq = SubquadraticConfig::new(cfg.k, cfg.t, cfg.alpha);
            sq.objective = obj;
            sq.seed = pseed;
            let r = subquadratic_solve(&space, &sq)?;
            let mut extra = BTreeMap::new();
            extra.insert("depth".into(), json!(r.depth));
            extra.insert("top_sites".into(), json!(r.top_sites));
            extra.insert("distance_evaluations".into(), json!(r.distance_evaluations));
            Run {
                solution: r.solution,
                protocol: None,
                monte_carlo: None,
                tau_hat: None,
                extra,
            }
        }
        alg => {
            let part = partition(cfg, n, labels)?;
            match alg {
                Algorithm::KtMedian | Algorithm::KtMeans => from_protocol(run_kt_median(&space, &part, &params)?),
                Algorithm::KtCenter => from_protocol(run_kt_center(&space, &part, &params)?),
                Algorithm::KtMedianCo => from_protocol(run_kt_median_clustering_only(&space, &part, &params)?),
                Algorithm::OneRound => from_protocol(run_one_round(&space, &part, &params)?),
                Algorithm::CenterG => {
                    let nodes = nodes_of(data)?;
                    let mut gp = CenterGParams::new(cfg.k, cfg.t).with_seed(pseed);
                    gp.rho = cfg.rho;
                    gp.epsilon = cfg.epsilon;
                    let r = run_center_g(&space, &nodes, &part, &gp)?;
                    let mut extra = protocol_extra(&r.protocol);
                    extra.insert("condition_i".into(), json!(r.condition_i));
                    extra.insert("cost_2tau_at_hat".into(), json!(r.cost_2tau_at_hat));
                    extra.insert("objective_estimate".into(), json!(r.objective));
                    extra.insert("mc_samples".into(), json!(gp.mc_samples));
                    extra.insert("taus".into(), json!(r.taus));
                    Run {
                        solution: r.protocol.solution.clone(),
                        protocol: Some(r.protocol),
                        monte_carlo: r.objective_seed,
                        tau_hat: Some(r.tau_hat),
                        extra,
                    }
                }
                _ => {
                    let uobj = match alg {
                        Algorithm::UncertainMedian => UncertainObjective::Median,
                        Algorithm::UncertainMeans => UncertainObjective::Means,
                        _ => UncertainObjective::CenterPp,
                    };
                    let nodes = nodes_of(data)?;
                    let r = run_uncertain(&space, &nodes, &part, uobj, &params)?;
                    let mut extra = protocol_extra(&r.protocol);
                    extra.insert("graph_cost".into(), json!(r.graph_cost));
                    extra.insert("mapped_cost".into(), json!(r.mapped_cost));
                    extra.insert("soundness_holds".into(), json!(r.soundness_holds()));
                    Run {
                        solution: r.solution,
                        protocol: Some(r.protocol),
                        monte_carlo: None,
                        tau_hat: None,
                        extra,
                    }
                }
            }
        }
    };

    let allowed = allowed_outliers(cfg);
    let (site_times, coord_time) = run
        .protocol
        .as_ref()
        .map(|p| (p.site_runtimes.clone(), p.coordinator_runtime))
        .unwrap_or_default();
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "solve".into(),
        algorithm: cfg.algorithm.name().into(),
        objective: objective_name(obj).into(),
        config: cfg.clone(),
        seeds: Seeds {
            root: cfg.seed,
            protocol: pseed,
            monte_carlo: run.monte_carlo,
        },
        n,
        solution: summarize(data, &run.solution, allowed),
        rounds: run.protocol.as_ref().map_or(0, |p| p.rounds),
        communication: run.protocol.as_ref().map(|p| LedgerSummary::of(&p.ledger)),
        allocation: run.protocol.as_ref().and_then(|p| p.allocation.as_ref()).map(|a| a.t_i.clone()),
        tau_hat: run.tau_hat,
        extra: run.extra,
        timings: timings.then(|| Timings::new(start.elapsed(), &site_times, coord_time)),
    };
    Ok(Outcome {
        report,
        ledger: run.protocol.map(|p| p.ledger),
    })
}

fn summarize(data: &Dataset, sol: &ClusteringSolution, allowed: u64) -> SolutionSummary {
    let point_ids = data.point_ids();
    let item_ids = data.item_ids();
    let excluded = sol.excluded_weight();
    SolutionSummary {
        centers: sol.centers.iter().map(|c| point_ids[c.0]).collect(),
        center_indices: sol.centers.iter().map(|c| c.0).collect(),
        outliers: sol.outliers().into_iter().map(|j| item_ids[j]).collect(),
        excluded,
        cost: sol.cost,
        allowed_outliers: allowed,
        within_bound: excluded <= allowed,
    }
}

/// Exact optimum over all center subsets of the input points.
pub fn oracle(cfg: &ExperimentConfig, data: &Dataset, timings: bool) -> Result<Outcome, CliError> {
    let start = Instant::now();
    if matches!(data, Dataset::Uncertain(_)) {
        return Err(CliError::Usage("the oracle takes points-jsonl or matrix input".into()));
    }
    let obj = cfg.objective.map(Objective::from).or(cfg.algorithm.fixed_objective()).unwrap_or(Objective::Median);
    let space = data.space()?;
    let pts: Vec<WeightedPoint> = space.points().map(WeightedPoint::unit).collect();
    let table = CostTable::for_points(&space, &pts)?;
    let sol = exact_oracle(&table, cfg.k, cfg.t, obj)?;
    let mut extra = BTreeMap::new();
    extra.insert("exact".into(), json!(true));
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "oracle".into(),
        algorithm: "exact-oracle".into(),
        objective: objective_name(obj).into(),
        config: cfg.clone(),
        seeds: Seeds {
            root: cfg.seed,
            protocol: 0,
            monte_carlo: None,
        },
        n: data.len(),
        solution: summarize(data, &sol, cfg.t),
        rounds: 0,
        communication: None,
        allocation: None,
        tau_hat: None,
        extra,
        timings: timings.then(|| Timings::new(start.elapsed(), &[], Duration::ZERO)),
    };
    Ok(Outcome { report, ledger: None })
}

/// Re-evaluates a report's centers on the dataset with the reported number
/// of exclusions and returns the cost.
pub fn recompute_cost(report: &Report, data: &Dataset) -> Result<f64, CliError> {
    let space = data.space()?;
    let centers: Vec<PointRef> = report.solution.center_indices.iter().map(|&i| PointRef(i)).collect();
    let budget = report.solution.excluded;
    let alg = report.config.algorithm;
    let obj = match report.objective.as_str() {
        "median" => Objective::Median,
        "means" => Objective::Means,
        _ => Objective::Center,
    };
    if report.command == "solve" && alg.is_uncertain() {
        let nodes = nodes_of(data)?;
        let power = if obj == Objective::Means { 2 } else { 1 };
        let table = node_table(&space, &nodes, &centers, power)?;
        let slots: Vec<usize> = (0..table.n_facilities()).collect();
        let sol = table.evaluate(&slots, budget, obj);
        if alg != Algorithm::CenterG {
            return Ok(sol.cost);
        }
        let mode = match report.seeds.monte_carlo {
            None => EvalMode::Exact,
            Some(seed) => EvalMode::MonteCarlo {
                samples: report.extra.get("mc_samples").and_then(|v| v.as_u64()).unwrap_or(20_000) as usize,
                seed,
            },
        };
        return Ok(eval_center_g_objective(&space, &nodes, &sol, mode)?.mean);
    }
    let clients: Vec<AnchoredClient> = space.points().map(|p| AnchoredClient::point(p, 1)).collect();
    let table = CostTable::for_anchored_with(&space, &clients, &centers)?;
    let slots: Vec<usize> = (0..table.n_facilities()).collect();
    Ok(table.evaluate(&slots, budget, obj).cost)
}

fn node_table<'a>(
    space: &'a MetricSpace,
    nodes: &'a [UncertainNode],
    centers: &[PointRef],
    power: u32,
) -> partclust::Result<CostTable<'a>> {
    CostTable::from_fn(space, vec![1; nodes.len()], centers, move |j, u| {
        let e = expected_distance(space, &nodes[j], u, power);
        if power == 2 {
            e.sqrt()
        } else {
            e
        }
    })
}
