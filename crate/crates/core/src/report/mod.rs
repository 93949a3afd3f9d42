//! Metrics, sweeps and machine-readable output.

pub mod emit;
pub mod metrics;
pub mod sweep;

pub use emit::{
    read_summary_csv, read_summary_json, write_segments_csv, write_summary_csv, write_summary_file, write_summary_json,
    Format, RunDocument, SummaryRow, SummaryTable, SCHEMA_VERSION, SUMMARY_HEADER,
};
pub use metrics::{percentile, summarize, MetricsSummary};
pub use sweep::{run_sweep, run_sweep_with, CellFailure, CellResult, SweepResult, SweepSpec};
