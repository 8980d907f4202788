//! Experiment configuration shared by the subcommands.

use partclust::Objective;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    KtMedian,
    KtMeans,
    KtCenter,
    /// Clustering-only median: sites ignore their outliers locally.
    KtMedianCo,
    OneRound,
    Subquadratic,
    UncertainMedian,
    UncertainMeans,
    UncertainCenterPp,
    CenterG,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KtMedian => "kt-median",
            Algorithm::KtMeans => "kt-means",
            Algorithm::KtCenter => "kt-center",
            Algorithm::KtMedianCo => "kt-median-co",
            Algorithm::OneRound => "one-round",
            Algorithm::Subquadratic => "subquadratic",
            Algorithm::UncertainMedian => "uncertain-median",
            Algorithm::UncertainMeans => "uncertain-means",
            Algorithm::UncertainCenterPp => "uncertain-center-pp",
            Algorithm::CenterG => "center-g",
        }
    }

    pub fn is_uncertain(self) -> bool {
        matches!(
            self,
            Algorithm::UncertainMedian | Algorithm::UncertainMeans | Algorithm::UncertainCenterPp | Algorithm::CenterG
        )
    }

    /// The objective the algorithm optimizes; `None` when `--objective`
    /// picks it.
    pub fn fixed_objective(self) -> Option<Objective> {
        match self {
            Algorithm::KtMedian | Algorithm::UncertainMedian => Some(Objective::Median),
            Algorithm::KtMeans | Algorithm::UncertainMeans => Some(Objective::Means),
            Algorithm::KtCenter | Algorithm::UncertainCenterPp | Algorithm::CenterG => Some(Objective::Center),
            Algorithm::KtMedianCo | Algorithm::OneRound | Algorithm::Subquadratic => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    Median,
    Means,
    Center,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Median => Objective::Median,
            ObjectiveArg::Means => Objective::Means,
            ObjectiveArg::Center => Objective::Center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionRule {
    RoundRobin,
    Contiguous,
    /// Site labels read from `--labels`.
    ByFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub t: u64,
    pub sites: usize,
    pub partition: PartitionRule,
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub objective: Option<ObjectiveArg>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, k: usize, t: u64) -> Self {
        Self {
            algorithm,
            k,
            t,
            sites: 1,
            partition: PartitionRule::RoundRobin,
            rho: 2.0,
            epsilon: 1.0,
            delta: 1.0,
            alpha: 1.0,
            objective: None,
            seed: 0,
        }
    }

    pub fn with_sites(mut self, sites: usize, partition: PartitionRule) -> Self {
        self.sites = sites;
        self.partition = partition;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_objective(mut self, objective: ObjectiveArg) -> Self {
        self.objective = Some(objective);
        self
    }

    /// Objective in effect: fixed by the algorithm, else `--objective`,
    /// else median.
    pub fn resolved_objective(&self) -> Result<Objective, String> {
        let chosen = self.objective.map(Objective::from);
        match (self.algorithm.fixed_objective(), chosen) {
            (Some(f), Some(c)) if f != c => Err(format!(
                "{} optimizes {f:?}; drop --objective or pick another algorithm",
                self.algorithm.name()
            )),
            (Some(f), _) => Ok(f),
            (None, c) => {
                let o = c.unwrap_or(Objective::Median);
                match (self.algorithm, o) {
                    (Algorithm::KtMedianCo | Algorithm::Subquadratic, Objective::Center) => {
                        Err(format!("{} covers median and means only", self.algorithm.name()))
                    }
                    _ => Ok(o),
                }
            }
        }
    }
}
