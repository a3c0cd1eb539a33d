//! Configuration and end-to-end pipelines behind the command-line tool.

mod config;
mod pipeline;

pub use config::{EvaluationConfig, ExperimentConfig, FlowSpec, GridSpec, VwerpConfig, WindkesselConfig};
pub use pipeline::{
    config_hash, dataset_hash, evaluate_field, evaluation_times, merge_reports, run_eval, run_synth, run_train, run_vwerp, run_wk,
    strategies_report, train_on, vwerp_strategies, write_resolved_config, StrategyResult,
};
