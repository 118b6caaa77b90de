//! Experiment driver: scenario construction, the epoch loop, metrics and the
//! two studies (global optimum and strategy comparison).

mod agent;
mod compare;
mod config;
mod metrics;
mod optimal;
mod output;
mod scenario;

use thiserror::Error;

pub use agent::{Agent, EpochStep};
pub use compare::{run_comparison_study, run_comparison_study_with, ComparisonReport, EpochRow, Quartiles, StrategyRun};
pub use config::{ExperimentConfig, PubDist, Residual, Topology};
pub use metrics::{coverage_distance, gap_ratio, optimality_gaps, wasted_latency, COVERAGE};
pub use optimal::{
    run_global_optimal_study, GraphOutcome, OptimalReport, FAR_RATIO, NEAR_EPOCH, RETAIN_EPOCH,
};
pub use output::{write_comparison, write_optimal};
pub use scenario::{optimal_scenario, comparison_scenario, run_scenario, DecisionRow, RunLog, Scenario};

use crate::completer::CompletionError;
use crate::netgraph::GraphError;
use crate::obsmatrix::MatrixError;
use crate::perigee::PerigeeError;
use crate::selector::SelectError;
use crate::simcore::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Perigee(#[from] PerigeeError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Independent RNG streams derived from one experiment seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Graph = 1,
    Cities = 2,
    Adapters = 3,
    Publishers = 4,
    Draws = 5,
    Pool = 6,
    GraphIndex = 7,
}

/// splitmix64 over `(seed, stream, index)`.
pub(crate) fn stream_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sizes the global rayon pool from `GOLDFISH_THREADS`; defaults to all cores.
pub fn init_threads() {
    let threads = std::env::var("GOLDFISH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    if let Some(n) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialised; GOLDFISH_THREADS ignored");
        }
    }
}
