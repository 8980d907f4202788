//! Command-line front end for the partial clustering library: dataset
//! files, synthetic generators, orchestration of the protocols and the
//! exact oracle, and JSON or CSV reports.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod gen;
pub mod io;
pub mod report;
pub mod run;

pub use config::{Algorithm, ExperimentConfig, ObjectiveArg, PartitionRule};
pub use io::{Dataset, InputFormat, ParseError};
pub use report::Report;
pub use run::{oracle, recompute_cost, solve, CliError, Outcome};

/// Named child-seed streams derived from `--seed`.
pub mod seeds {
    pub const GENERATOR_STREAM: u64 = 1;
    pub const PROTOCOL_STREAM: u64 = 16;
}
