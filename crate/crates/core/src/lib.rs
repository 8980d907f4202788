//! Distributed partial clustering in the coordinator model.
//!
//! Sites hold disjoint parts of the input and exchange a constant number of
//! rounds of messages with a coordinator, which outputs `k` centers while
//! ignoring a bounded number of outliers. The crate simulates the protocols
//! with exact word accounting and provides the centralized solvers, the
//! outlier-budget allocation machinery and the uncertain-data reductions
//! they are built from.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod instance;
pub mod metric;
pub mod protocol;
pub mod solution;
pub mod solvers;
pub mod uncertain;

pub use error::{Error, Result};
pub use instance::{AnchoredClient, CostTable};
pub use metric::{MetricSpace, Objective, PointRef, TruncationParam, WeightedPoint};
pub use solution::{solution_cost, solution_cost_on_space, ClusteringSolution};
