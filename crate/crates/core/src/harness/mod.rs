//! Training, evaluation, checkpoints, run configuration and reports.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod report;
pub mod train;

pub use checkpoint::{config_hash, Checkpoint};
pub use config::TrainConfig;
pub use eval::{evaluate, predict_raw, relative_mse, EvalReport};
pub use metrics::{metrics_csv, read_metrics, write_metrics, MetricsRecord, METRICS_HEADER};
pub use report::{write_report, ReportOptions};
pub use train::{train, train_run, write_outputs, TrainOutcome};
