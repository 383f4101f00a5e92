//! Run orchestration: seeding, configuration, artifact persistence, and
//! diagnostic tooling around the trainer.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod plot;
pub mod rngs;

pub use config::{resolve_output_dir, RunConfig, OUTPUT_ROOT_VAR};
pub use metrics::{format_row, read_metrics, MetricsWriter, METRICS_COLUMNS};
pub use rngs::{stream, RunRngs, STREAM_NAMES};
