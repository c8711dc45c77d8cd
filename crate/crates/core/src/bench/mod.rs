//! Synthetic benchmarks, noise injection, the random-search baseline,
//! metrics and the study runner.

mod functions;
mod metrics;
mod noise;
mod record;
mod study;

use thiserror::Error;

use crate::optimizer::CampaignError;

pub use functions::{mixed_wrap, AckleyParams, FnKind, MixedObjective, SyntheticFn};
pub use metrics::{aggregate_csv, compute_metrics, MethodMetrics, Metrics, MetricsMetadata, METRICS_DEFINITION};
pub use noise::{add_noise, standard_normal, NoiseKind, NoiseSpec};
pub use record::{decision_path_csv, random_search, random_search_with, run_csv, RunRecord, RunRow};
pub use study::{run_engine, run_study, Method, StudyConfig, StudyResult};

/// Method label of the random-search baseline.
pub const RANDOM_SEARCH: &str = "random_search";
/// Method label of the trust-region engine.
pub const CATBOX: &str = "catbox";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("coordinate {index} = {value} is outside the function's domain")]
    OutOfDomain { index: usize, value: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no random_search records to compare against")]
    MissingBaseline,
    #[error("invalid study: {0}")]
    Config(String),
    #[error("engine failed: {0}")]
    Engine(#[from] CampaignError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
