use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::completer::{Optimizer, ResidualNorm, SolverConfig, DEFAULT_K};
use crate::perigee::Aggregate;
use crate::selector::{Schedule, DEFAULT_N_EXPLOIT, DEFAULT_N_EXPLORE};
use crate::simcore::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Random2d,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PubDist {
    Exp,
    Unif,
    /// Equal mass on `n_publishers` random non-adapter nodes.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Residual {
    Squared,
    L2,
}

impl From<Residual> for ResidualNorm {
    fn from(r: Residual) -> Self {
        match r {
            Residual::Squared => ResidualNorm::SquaredL2,
            Residual::L2 => ResidualNorm::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub latency_file: Option<PathBuf>,
    pub n_nodes: usize,
    pub n_publishers: usize,
    pub pub_dist: PubDist,
    pub n_adapters: usize,
    pub strategy: Strategy,
    pub epochs: usize,
    pub rounds_per_epoch: usize,
    pub k: usize,
    pub max_steps: usize,
    pub reg_weight: f64,
    pub residual: Residual,
    pub seeds: Vec<u64>,
    pub plane_size: f64,
    pub node_delay_ms: f64,
    pub max_in: usize,
    pub n_exploit: usize,
    pub n_explore: usize,
    pub window: usize,
    pub cadence: usize,
    pub perigee_aggregate: Aggregate,
    /// Write every completion as JSON lines; debugging only.
    #[serde(skip)]
    pub dump_completions: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: Topology::Random2d,
            latency_file: None,
            n_nodes: 100,
            n_publishers: 100,
            pub_dist: PubDist::Exp,
            n_adapters: 32,
            strategy: Strategy::Goldfish,
            epochs: 100,
            rounds_per_epoch: 40,
            k: DEFAULT_K,
            max_steps: 2000,
            reg_weight: 1e-4,
            residual: Residual::Squared,
            seeds: (1..=10).collect(),
            plane_size: 500.0,
            node_delay_ms: 20.0,
            max_in: 8,
            n_exploit: DEFAULT_N_EXPLOIT,
            n_explore: DEFAULT_N_EXPLORE,
            window: 3,
            cadence: 2,
            perigee_aggregate: Aggregate::P90,
            dump_completions: false,
        }
    }
}

impl ExperimentConfig {
    /// Out-degree of every node: exploit plus explore slots.
    pub fn max_out(&self) -> usize {
        self.n_exploit + self.n_explore
    }

    pub fn schedule(&self) -> Schedule {
        Schedule { window: self.window, cadence: self.cadence }
    }

    pub fn solver(&self) -> SolverConfig<f64> {
        SolverConfig {
            reg_weight: self.reg_weight,
            max_steps: self.max_steps,
            residual: self.residual.into(),
            optimizer: Optimizer::default(),
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let positive = [
            ("nodes", self.n_nodes),
            ("publishers", self.n_publishers),
            ("epochs", self.epochs),
            ("rounds per epoch", self.rounds_per_epoch),
            ("k", self.k),
            ("max steps", self.max_steps),
            ("max in-degree", self.max_in),
            ("exploit slots", self.n_exploit),
            ("window", self.window),
            ("cadence", self.cadence),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.n_adapters >= self.n_nodes {
            return bad(format!("{} adapters leave no static node in a {}-node network", self.n_adapters, self.n_nodes));
        }
        if self.n_publishers > self.n_nodes {
            return bad(format!("{} publishers exceed {} nodes", self.n_publishers, self.n_nodes));
        }
        if self.n_nodes < self.max_out() + 1 {
            return bad(format!("{} nodes cannot host out-degree {}", self.n_nodes, self.max_out()));
        }
        if !(self.reg_weight >= 0.0) || !(self.node_delay_ms >= 0.0) || !(self.plane_size > 0.0) {
            return bad("reg weight and node delay must be non-negative, plane size positive".into());
        }
        if self.topology == Topology::Measured && self.latency_file.is_none() {
            return bad("measured topology needs a latency file".into());
        }
        Ok(())
    }
}
