//! Sweep engine: configuration, per-run execution, aggregation and output.

mod config;
mod summary;
mod sweep;

pub use config::{
    parse_config, parse_config_str, Cell, ConfigError, GibbsSettings, MethodSettings, SpectralSettings, SweepConfig,
    VbSettings, VemSettings,
};
pub use summary::{
    aggregate, emit_plot_data, is_threshold_cell, median, quantile_sorted, ranking_report, read_summary,
    write_long, write_summary, PlotFiles, SummaryRow, SUMMARY_COLUMNS,
};
pub use sweep::{
    method_rng, read_records, read_records_file, run_cell, run_method, run_sweep, scenario_seed, score_run,
    sweep_tasks, write_records, HarnessError, MethodOutcome, RunKey, SweepOptions, RUN_COLUMNS, THREADS_ENV,
};
