//! Closed-loop runs, logs, metrics and experiment drivers.

mod config;
mod experiments;
mod log;
mod metrics;
mod run;

pub use config::{
    process_tag, ModelPaths, NoiseConfig, PlantConfig, RunConfig, ScenarioConfig, ScenarioKind, CONFIG_VERSION,
};
pub use experiments::{
    build_training_set, compare_report, generate_training_runs, load_logs, metrics_csv, reduction_percent, speed_sweep,
    sweep_speeds, sweep_table, test_scenarios, training_samples, training_scenarios, DeltaRow, GeneratedData, Report,
    Sweep, SweepRow,
};
pub use log::{column_names, Outcome, RunLog, RunMeta, Tick, LOG_SCHEMA, SIGMA_STAGES};
pub use metrics::{compute_metrics, rms, Metrics};
pub use run::{check_position, obstacle_clearance, run_closed_loop, simulate, DIVERGENCE_LIMIT};
