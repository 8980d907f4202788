//! Machine-readable run reports.

use std::collections::BTreeMap;
use std::time::Duration;

use partclust::protocol::{CommLedger, Direction, RoundTotals};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    /// Seed handed to the library; site and coordinator seeds derive from it.
    pub protocol: u64,
    /// Seed of the Monte Carlo objective estimate, when one was needed.
    pub monte_carlo: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    /// Ids of the center points.
    pub centers: Vec<u64>,
    /// Positions of the center points in the input (or universe) file.
    pub center_indices: Vec<usize>,
    /// Ids of the excluded items.
    pub outliers: Vec<u64>,
    pub excluded: u64,
    pub cost: f64,
    /// Outliers the algorithm's guarantee lets it ignore.
    pub allowed_outliers: u64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub point_words: u64,
    pub total_words: u64,
    pub site_to_coordinator: u64,
    pub coordinator_to_site: u64,
    pub outlier_words: u64,
    pub messages: usize,
    pub per_round: Vec<RoundTotals>,
    pub by_kind: BTreeMap<String, u64>,
}

impl LedgerSummary {
    pub fn of(ledger: &CommLedger) -> Self {
        let mut by_kind = BTreeMap::new();
        for m in &ledger.messages {
            *by_kind.entry(m.payload.kind().to_string()).or_insert(0) += m.words;
        }
        Self {
            point_words: ledger.point_words,
            total_words: ledger.total,
            site_to_coordinator: ledger.words(Direction::SiteToCoordinator),
            coordinator_to_site: ledger.words(Direction::CoordinatorToSite),
            outlier_words: ledger.outlier_words,
            messages: ledger.messages.len(),
            per_round: ledger.rounds.clone(),
            by_kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub site_ms: Vec<f64>,
    pub coordinator_ms: f64,
}

impl Timings {
    pub fn new(total: Duration, sites: &[Duration], coordinator: Duration) -> Self {
        let ms = |d: &Duration| d.as_secs_f64() * 1e3;
        Self {
            total_ms: ms(&total),
            site_ms: sites.iter().map(ms).collect(),
            coordinator_ms: ms(&coordinator),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub command: String,
    pub algorithm: String,
    pub objective: String,
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    /// Number of clustered items.
    pub n: usize,
    pub solution: SolutionSummary,
    pub rounds: u32,
    pub communication: Option<LedgerSummary>,
    /// Outliers assigned to each site.
    pub allocation: Option<Vec<u64>>,
    pub tau_hat: Option<f64>,
    /// Algorithm-specific diagnostics.
    pub extra: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub const CSV_HEADER: &'static str = "algorithm,objective,within_bound,centers,ignored,rounds,comm_words,time_ms";

    /// Header plus one summary row; the time column stays empty unless
    /// timings were requested.
    pub fn to_csv(&self) -> String {
        let time = self.timings.as_ref().map(|t| format!("{:.3}", t.total_ms)).unwrap_or_default();
        let words = self.communication.as_ref().map_or(0, |c| c.total_words);
        format!(
            "{}\n{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.algorithm,
            self.objective,
            self.solution.within_bound,
            self.solution.centers.len(),
            self.solution.excluded,
            self.rounds,
            words,
            time
        )
    }
}
