use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use super::{comparison_scenario, run_scenario, wasted_latency, DecisionRow, ExperimentConfig, HarnessError, Topology};
use crate::netgraph::{load_latency_csv, NodeId};
use crate::simcore::Strategy;
use crate::stats::{exact_mean, percentile, round_half_even, rounded_mean, round_value};

/// Output precision in decimals.
const MS_DECIMALS: u32 = 1;
const RATIO_DECIMALS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub mean: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Option<Self> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p| percentile(&sorted, p).map(|v| round_value(v, MS_DECIMALS));
        Some(Self { p25: q(0.25)?, p50: q(0.5)?, p75: q(0.75)?, mean: rounded_mean(values, MS_DECIMALS)? })
    }
}

/// One (seed, strategy) run.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub seed: u64,
    pub strategy: Strategy,
    pub digest: String,
    pub learns: usize,
    pub ambiguous_cells: usize,
    /// `wasted[epoch][k]` for the k-th adapter.
    #[serde(skip)]
    pub wasted: Vec<Vec<f64>>,
    #[serde(skip)]
    pub adapters: Vec<NodeId>,
    #[serde(skip)]
    pub decisions: Vec<DecisionRow>,
    #[serde(skip)]
    pub dumps: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub left: Option<Quartiles>,
    pub right: Option<Quartiles>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub left: Strategy,
    pub right: Strategy,
    /// Per-seed digests of the pre-adaptation state; equal within a pair.
    pub paired: bool,
    pub runs: Vec<StrategyRun>,
    pub per_epoch: Vec<EpochRow>,
    pub final_ratio: Option<f64>,
    pub left_epoch0_mean: Option<f64>,
    pub left_final_mean: Option<f64>,
    pub right_final_mean: Option<f64>,
}

fn exact_ratio(a: &[f64], b: &[f64]) -> Option<f64> {
    let (a, b) = (exact_mean(a)?, exact_mean(b)?);
    if b.is_zero() {
        return None;
    }
    Some(round_half_even(&(a / b), RATIO_DECIMALS))
}

fn pooled(runs: &[&StrategyRun], epoch: usize) -> Vec<f64> {
    runs.iter().flat_map(|r| r.wasted[epoch].iter().copied()).collect()
}

/// Goldfish against Perigee on identical scenarios.
pub fn run_comparison_study(cfg: &ExperimentConfig) -> Result<ComparisonReport, HarnessError> {
    run_comparison_study_with(cfg, Strategy::Goldfish, Strategy::Perigee)
}

/// Runs both strategies on the same per-seed scenarios and aggregates the
/// adapters' wasted latency over all seeds per epoch.
pub fn run_comparison_study_with(cfg: &ExperimentConfig, left: Strategy, right: Strategy) -> Result<ComparisonReport, HarnessError> {
    cfg.validate()?;
    let cities = match (cfg.topology, &cfg.latency_file) {
        (Topology::Measured, Some(path)) => Some(load_latency_csv::<f64>(path)?),
        _ => None,
    };
    let jobs: Vec<(u64, Strategy)> = cfg.seeds.iter().flat_map(|&s| [(s, left), (s, right)]).collect();
    let runs: Vec<StrategyRun> = jobs
        .par_iter()
        .map(|&(seed, strategy)| {
            let scenario = comparison_scenario(cfg, seed, cities.as_deref())?;
            let mut wasted = Vec::with_capacity(cfg.epochs);
            let probs = scenario.publish_prob.clone();
            let adapters = scenario.adapters.clone();
            let log = run_scenario(&scenario, strategy, cfg, |_, g| {
                wasted.push(adapters.iter().map(|&a| wasted_latency(g, a, &probs)).collect());
            })?;
            Ok(StrategyRun {
                seed,
                strategy,
                digest: scenario.digest(),
                learns: log.learns,
                ambiguous_cells: log.ambiguous_cells,
                wasted,
                adapters,
                decisions: log.decisions,
                dumps: log.dumps,
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    let paired = runs.chunks(2).all(|pair| pair[0].digest == pair[1].digest);
    let lefts: Vec<&StrategyRun> = runs.iter().step_by(2).collect();
    let rights: Vec<&StrategyRun> = runs.iter().skip(1).step_by(2).collect();
    let per_epoch: Vec<EpochRow> = (0..cfg.epochs)
        .map(|epoch| {
            let (l, r) = (pooled(&lefts, epoch), pooled(&rights, epoch));
            EpochRow { epoch, left: Quartiles::of(&l), right: Quartiles::of(&r), ratio: exact_ratio(&l, &r) }
        })
        .collect();
    let last = cfg.epochs - 1;
    Ok(ComparisonReport {
        config: cfg.clone(),
        left,
        right,
        paired,
        final_ratio: per_epoch[last].ratio,
        left_epoch0_mean: per_epoch[0].left.map(|q| q.mean),
        left_final_mean: per_epoch[last].left.map(|q| q.mean),
        right_final_mean: per_epoch[last].right.map(|q| q.mean),
        runs,
        per_epoch,
    })
}
