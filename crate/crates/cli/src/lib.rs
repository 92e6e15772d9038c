//! Config-driven runs of the `mhessian` solvers with JSON reports and CSV dumps.

pub mod compare;
pub mod config;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use report::RunReport;

/// JSON schema of [`RunReport`].
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
