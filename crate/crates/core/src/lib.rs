//! Round-based simulator of unstructured peer-to-peer broadcast with adaptive
//! peer selection.
//!
//! Adaptive nodes record relative delivery times from their peers, merge a few
//! epochs into a partially observed matrix, fill the gaps by nearest-neighbour
//! completion with per-row offsets and keep the peers that deliver first most
//! often. A memoryless subset-scoring selector serves as the baseline.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the experiment harness uses.

pub mod completer;
pub mod harness;
pub mod netgraph;
pub mod obsmatrix;
pub mod perigee;
pub mod scalar;
pub mod selector;
pub mod simcore;
pub mod stats;

pub use netgraph::{EdgeFilter, EdgeRole, NodeId};
pub use scalar::Scalar;
pub use simcore::Strategy;

pub type Graph = netgraph::NetworkGraph<f64>;
pub type Latency = netgraph::LatencyModel<f64>;
pub type Batch = simcore::EpochBatch<f64>;
pub type Matrix = obsmatrix::ObservationMatrix<f64>;
pub type Completed = completer::CompletedMatrix<f64>;
pub type Problem<'m> = completer::CompletionProblem<'m, f64>;
pub type Solver = completer::SolverConfig<f64>;
