//! Single-machine solvers used for preclustering and final clustering.

pub mod bicriteria;
pub mod combine;
pub mod gonzalez;
pub mod kcenter;
pub mod oracle;
pub mod primal_dual;

pub use bicriteria::{bicriteria_median, bicriteria_truncated, BicriteriaConfig, BicriteriaSolution, Relax};
pub use combine::combine_weighted;
pub use gonzalez::{gonzalez_order, gonzalez_prefix, GonzalezOrder};
pub use kcenter::kt_center_outliers;
pub use oracle::exact_oracle;
pub use primal_dual::{DualCertificate, DualRun, PrimalDual};
