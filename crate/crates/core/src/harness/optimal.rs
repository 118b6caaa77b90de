use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{gap_ratio, optimal_scenario, optimality_gaps, run_scenario, stream_seed, DecisionRow, ExperimentConfig, HarnessError, Stream};
use crate::netgraph::{EdgeRole, NodeId};
use crate::simcore::Strategy;

/// Epoch from which the optimum must be held.
pub const RETAIN_EPOCH: usize = 96;
/// Epoch from which the gap ratio must stay small.
pub const NEAR_EPOCH: usize = 48;
/// Gap ratio above which an epoch counts as far from optimal.
pub const FAR_RATIO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphOutcome {
    pub graph: usize,
    pub seed: u64,
    pub adapter: NodeId,
    pub publishers: Vec<NodeId>,
    pub non_optimal_epochs: usize,
    pub far_epochs: usize,
    /// First epoch from which every later epoch is optimal.
    pub settled_at: Option<usize>,
    pub retained_by_96: bool,
    pub near_from_48: bool,
    pub lambda0: f64,
    #[serde(skip)]
    pub lambda: Vec<f64>,
    #[serde(skip)]
    pub optimal: Vec<bool>,
    #[serde(skip)]
    pub decisions: Vec<DecisionRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalReport {
    pub config: ExperimentConfig,
    pub n_graphs: usize,
    pub base_seed: u64,
    pub graphs: Vec<GraphOutcome>,
    /// Graph count per number of non-optimal epochs.
    pub histogram: BTreeMap<usize, usize>,
    /// Graph count per number of far-from-optimal epochs.
    pub histogram_far: BTreeMap<usize, usize>,
    pub retained_fraction: f64,
    pub near_fraction: f64,
}

fn run_graph(cfg: &ExperimentConfig, index: usize, base_seed: u64) -> Result<GraphOutcome, HarnessError> {
    let seed = stream_seed(base_seed, Stream::GraphIndex, index as u64);
    let scenario = optimal_scenario(cfg, seed)?;
    let adapter = scenario.adapters[0];
    let publishers: Vec<NodeId> =
        scenario.publish_prob.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| NodeId(i)).collect();
    let mut lambda = Vec::with_capacity(cfg.epochs);
    let mut optimal = Vec::with_capacity(cfg.epochs);
    let log = run_scenario(&scenario, Strategy::Goldfish, cfg, |_, g| {
        lambda.push(optimality_gaps(g, adapter, &publishers).iter().sum::<f64>().max(0.0));
        let mut exploit = g.peers_with_role(adapter, EdgeRole::Exploit);
        exploit.sort();
        optimal.push(exploit == publishers);
    })?;
    let lambda0 = lambda[0];
    let far: Vec<bool> = lambda.iter().map(|&l| gap_ratio(l, lambda0) > FAR_RATIO).collect();
    let settled_at = match optimal.iter().rposition(|&o| !o) {
        None => Some(0),
        Some(last) if last + 1 < optimal.len() => Some(last + 1),
        Some(_) => None,
    };
    Ok(GraphOutcome {
        graph: index,
        seed,
        adapter,
        publishers,
        non_optimal_epochs: optimal.iter().filter(|&&o| !o).count(),
        far_epochs: far.iter().filter(|&&f| f).count(),
        settled_at,
        retained_by_96: settled_at.is_some_and(|s| s <= RETAIN_EPOCH),
        near_from_48: far.iter().skip(NEAR_EPOCH).all(|&f| !f),
        lambda0,
        lambda,
        optimal,
        decisions: log.decisions,
    })
}

/// One Goldfish adapter per random graph, publishers at equal mass; counts how
/// long the adapter takes to connect directly to every publisher.
pub fn run_global_optimal_study(cfg: &ExperimentConfig, n_graphs: usize, base_seed: u64) -> Result<OptimalReport, HarnessError> {
    cfg.validate()?;
    if cfg.n_publishers > cfg.n_exploit {
        return Err(HarnessError::Config(format!(
            "{} publishers exceed {} exploit slots; the optimum is not unique",
            cfg.n_publishers, cfg.n_exploit
        )));
    }
    let graphs: Vec<GraphOutcome> =
        (0..n_graphs).into_par_iter().map(|i| run_graph(cfg, i, base_seed)).collect::<Result<_, _>>()?;
    let mut histogram = BTreeMap::new();
    let mut histogram_far = BTreeMap::new();
    for g in &graphs {
        *histogram.entry(g.non_optimal_epochs).or_insert(0) += 1;
        *histogram_far.entry(g.far_epochs).or_insert(0) += 1;
    }
    let frac = |f: fn(&GraphOutcome) -> bool| {
        if graphs.is_empty() {
            0.0
        } else {
            graphs.iter().filter(|g| f(g)).count() as f64 / graphs.len() as f64
        }
    };
    let retained_fraction = frac(|g| g.retained_by_96);
    let near_fraction = frac(|g| g.near_from_48);
    Ok(OptimalReport {
        config: cfg.clone(),
        n_graphs,
        base_seed,
        graphs,
        histogram,
        histogram_far,
        retained_fraction,
        near_fraction,
    })
}
