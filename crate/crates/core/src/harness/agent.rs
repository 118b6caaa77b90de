use std::collections::VecDeque;

use super::{ExperimentConfig, HarnessError};
use crate::completer::{assign_neighbors, solve, CompletionDump, CompletionProblem, Temperature};
use crate::netgraph::{EdgeRole, NetworkGraph, NodeId};
use crate::obsmatrix::ObservationMatrix;
use crate::perigee::perigee_select;
use crate::selector::{explore_only, score_peers, select, step_schedule, Action, DepletingPool, SelectError, SelectorDecision};
use crate::simcore::{EpochBatch, Strategy};

/// One adaptive node's selection state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub node: NodeId,
    pub strategy: Strategy,
    pub pool: DepletingPool,
    history: VecDeque<EpochBatch<f64>>,
}

/// What an agent wants at an epoch boundary.
#[derive(Debug, Clone, Default)]
pub struct EpochStep {
    pub decision: Option<SelectorDecision>,
    pub dump: Option<CompletionDump>,
    pub learned: bool,
    /// Ambiguous cells estimated in this step's completion.
    pub ambiguous: usize,
}

impl Agent {
    pub fn new(node: NodeId, strategy: Strategy, pool_seed: u64) -> Self {
        Self { node, strategy, pool: DepletingPool::new(node, pool_seed), history: VecDeque::new() }
    }

    pub fn history(&self) -> &VecDeque<EpochBatch<f64>> {
        &self.history
    }

    /// Records `batch` and decides the connections for the next epoch.
    pub fn end_epoch(
        &mut self,
        g: &NetworkGraph<f64>,
        batch: EpochBatch<f64>,
        epoch: usize,
        cfg: &ExperimentConfig,
    ) -> Result<EpochStep, HarnessError> {
        match self.strategy {
            Strategy::Static => Ok(EpochStep::default()),
            Strategy::Perigee => {
                let picked = perigee_select(g, &batch, cfg.n_exploit, cfg.n_explore, cfg.perigee_aggregate, &mut self.pool);
                let decision = match picked {
                    Ok((d, _)) => d,
                    Err(e) => {
                        log::debug!("node {}: {e}; keeping exploit peers", self.node);
                        self.keep(g, cfg)
                    }
                };
                Ok(EpochStep { decision: Some(decision), learned: true, ..EpochStep::default() })
            }
            Strategy::Goldfish => {
                self.history.push_back(batch);
                while self.history.len() > cfg.window {
                    self.history.pop_front();
                }
                match step_schedule(&cfg.schedule(), epoch) {
                    Action::ExploreOnly => Ok(EpochStep { decision: Some(self.keep(g, cfg)), ..EpochStep::default() }),
                    Action::LearnAndSelect { .. } => self.learn(g, cfg),
                }
            }
        }
    }

    fn keep(&mut self, g: &NetworkGraph<f64>, cfg: &ExperimentConfig) -> SelectorDecision {
        let exploit = g.peers_with_role(self.node, EdgeRole::Exploit);
        explore_only(g, exploit, &mut self.pool, cfg.n_explore)
    }

    fn learn(&mut self, g: &NetworkGraph<f64>, cfg: &ExperimentConfig) -> Result<EpochStep, HarnessError> {
        let batches: Vec<EpochBatch<f64>> = self.history.iter().cloned().collect();
        let mut t = ObservationMatrix::build(&batches)?;
        t.classify_missing(cfg.k);
        let assignment = assign_neighbors(&t, cfg.k, Temperature::MeanVariance);
        let completed = match solve(CompletionProblem::new(&t, assignment, cfg.solver())) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("node {}: completion failed ({e}); keeping exploit peers", self.node);
                return Ok(EpochStep { decision: Some(self.keep(g, cfg)), ..EpochStep::default() });
            }
        };
        let scores: Vec<(NodeId, u64)> = score_peers(&completed, &t).into_iter().zip(t.col_peer()).map(|(s, &p)| (p, s)).collect();
        let dump = cfg.dump_completions.then(|| completed.to_dump());
        let decision = match select(g, &scores, &mut self.pool, cfg.n_exploit, cfg.n_explore) {
            Ok(d) => d,
            Err(SelectError::TooFewCandidates { .. }) => self.keep(g, cfg),
            Err(e) => return Err(e.into()),
        };
        Ok(EpochStep { decision: Some(decision), dump, learned: true, ambiguous: completed.ambiguous_count })
    }
}
