//! Named experiment suites driven by TOML configurations.

mod config;
mod report;
mod suites;

pub use config::{
    apply_override, DetectorSection, ExperimentConfig, FlowSection, GridSection, OutputSection,
};
pub use report::{
    csv_column_stats, emit_report, fmt_float, CheckResult, ColumnStats, ReportFormat, Status,
    SuiteResult, Table, Value,
};
pub use suites::{describe, run_suite, RunOptions, SUITES};
