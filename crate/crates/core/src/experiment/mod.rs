//! End-to-end runs over several seeds, plus the reports built from them.

mod config;
mod pipeline;
mod report;

pub use config::{ExperimentConfig, Method};
pub use pipeline::{
    make_split, mean_std, run_experiment, run_seed, MetricSummary, RunResult, RunTiming, SeedFailure, SeedResult,
};
pub use report::{
    diagnose_classes, diagnose_precision_recall, emit_table, parse_table_csv, report_scales, table_csv, table_text,
    write_scales_csv, ClassDiagnosis, ScaleRow, SeedDiagnosis, TableRow,
};
