//! Hypothesis tests, response entropy, and report emission.

pub mod entropy;
pub mod report;
pub mod ttest;

pub use entropy::{entropy_report, response_entropy, EntropyReport, EntropySummary};
pub use report::{emit_report, ReportInput, ReportManifest};
pub use ttest::{paired_ttest, ttest_table, TTestResult};
