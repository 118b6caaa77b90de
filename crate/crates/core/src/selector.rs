//! Peer selection: altruistic scoring of completed matrices, a depleting
//! exploration pool and the epoch schedule.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::completer::CompletedMatrix;
use crate::netgraph::{EdgeRole, NetworkGraph, NodeId};
use crate::obsmatrix::ObservationMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_N_EXPLOIT: usize = 3;
pub const DEFAULT_N_EXPLORE: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("network of {n_nodes} nodes cannot host {n_exploit} exploit and {n_explore} explore peers")]
    NetworkTooSmall { n_nodes: usize, n_exploit: usize, n_explore: usize },
    #[error("only {available} candidates for {n_exploit} exploit slots")]
    TooFewCandidates { available: usize, n_exploit: usize },
    #[error("invalid schedule: window {window}, cadence {cadence}")]
    BadSchedule { window: usize, cadence: usize },
}

/// Exploration candidates drawn without replacement. The universe is fixed at
/// refill time: every node except the owner and its neighbours at that moment.
#[derive(Debug, Clone)]
pub struct DepletingPool {
    owner: NodeId,
    universe: Vec<NodeId>,
    remaining: BTreeSet<NodeId>,
    refills: usize,
    rng: ChaCha8Rng,
}

impl DepletingPool {
    /// Empty pool; the first draw fills it.
    pub fn new(owner: NodeId, seed: u64) -> Self {
        Self { owner, universe: Vec::new(), remaining: BTreeSet::new(), refills: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn universe(&self) -> &[NodeId] {
        &self.universe
    }

    pub fn remaining(&self) -> &BTreeSet<NodeId> {
        &self.remaining
    }

    /// How often the pool has been (re)filled.
    pub fn refills(&self) -> usize {
        self.refills
    }

    pub fn refill<S: Scalar>(&mut self, g: &NetworkGraph<S>) {
        let peers = g.neighbors(self.owner);
        self.universe = g.nodes().filter(|&v| v != self.owner && peers.binary_search(&v).is_err()).collect();
        self.remaining = self.universe.iter().copied().collect();
        self.refills += 1;
    }

    /// Uniform draw among remaining members not in `exclude`. Refills once when
    /// nothing is drawable; `None` only if the fresh pool has nothing either.
    pub fn draw<S: Scalar>(&mut self, g: &NetworkGraph<S>, exclude: &[NodeId]) -> Option<NodeId> {
        if let Some(v) = self.try_draw(exclude) {
            return Some(v);
        }
        self.refill(g);
        self.try_draw(exclude)
    }

    fn try_draw(&mut self, exclude: &[NodeId]) -> Option<NodeId> {
        let open: Vec<NodeId> = self.remaining.iter().copied().filter(|v| *v != self.owner && !exclude.contains(v)).collect();
        if open.is_empty() {
            return None;
        }
        let pick = open[self.rng.gen_range(0..open.len())];
        self.remaining.remove(&pick);
        Some(pick)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorDecision {
    pub exploit: Vec<NodeId>,
    pub explore: Vec<NodeId>,
    /// Every scored candidate, best first. Used to replace rejected exploit targets.
    pub ranked: Vec<(NodeId, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub window: usize,
    pub cadence: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { window: 3, cadence: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Rebuild the matrix over these epochs and reselect every slot.
    LearnAndSelect { epochs: RangeInclusive<usize> },
    /// Keep the exploit peers, rotate the exploration slot.
    ExploreOnly,
}

impl Schedule {
    pub fn new(window: usize, cadence: usize) -> Result<Self, SelectError> {
        if window == 0 || cadence == 0 {
            return Err(SelectError::BadSchedule { window, cadence });
        }
        Ok(Self { window, cadence })
    }

    /// Offset of the epoch inside each window that only explores.
    pub fn pure_explore_position(&self) -> usize {
        self.window / 2
    }
}

/// Action taken at the end of `epoch`.
pub fn step_schedule(sched: &Schedule, epoch: usize) -> Action {
    if (epoch + 1) % sched.cadence == 0 && epoch + 1 >= sched.window {
        Action::LearnAndSelect { epochs: epoch + 1 - sched.window..=epoch }
    } else {
        Action::ExploreOnly
    }
}

/// Credits each row's fastest column, in the common frame, with one point plus
/// one per symbolically known cell of that row. Ties go to the lower node id.
pub fn score_peers<S: Scalar>(m: &CompletedMatrix<S>, t: &ObservationMatrix<S>) -> Vec<u64> {
    let peers = t.col_peer();
    let mut scores = vec![0u64; t.n_cols()];
    for i in 0..m.n_rows() {
        let mut best: Option<(S, NodeId, usize)> = None;
        for j in 0..m.n_cols() {
            let Some(v) = m.get(i, j) else { continue };
            let better = match best {
                None => true,
                Some((bv, bp, _)) => v < bv || (v == bv && peers[j] < bp),
            };
            if better {
                best = Some((v, peers[j], j));
            }
        }
        if let Some((_, _, j)) = best {
            scores[j] += 1 + t.symbolic_count(i) as u64;
        }
    }
    scores
}

/// Ranks candidates by score, ties by lower id.
pub fn rank(scores: &[(NodeId, u64)]) -> Vec<(NodeId, u64)> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Top `n_exploit` candidates plus `n_explore` draws from the pool.
pub fn select<S: Scalar>(
    g: &NetworkGraph<S>,
    scores: &[(NodeId, u64)],
    pool: &mut DepletingPool,
    n_exploit: usize,
    n_explore: usize,
) -> Result<SelectorDecision, SelectError> {
    if g.n_nodes() < n_exploit + n_explore + 1 {
        return Err(SelectError::NetworkTooSmall { n_nodes: g.n_nodes(), n_exploit, n_explore });
    }
    let owner = pool.owner();
    let ranked: Vec<(NodeId, u64)> = rank(scores).into_iter().filter(|&(v, _)| v != owner).collect();
    if ranked.len() < n_exploit {
        return Err(SelectError::TooFewCandidates { available: ranked.len(), n_exploit });
    }
    let exploit: Vec<NodeId> = ranked.iter().take(n_exploit).map(|&(v, _)| v).collect();
    let explore = draw_explore(g, pool, &exploit, n_explore);
    Ok(SelectorDecision { exploit, explore, ranked })
}

/// Keeps the given exploit peers and draws fresh exploration peers.
pub fn explore_only<S: Scalar>(g: &NetworkGraph<S>, exploit: Vec<NodeId>, pool: &mut DepletingPool, n_explore: usize) -> SelectorDecision {
    let explore = draw_explore(g, pool, &exploit, n_explore);
    let ranked = exploit.iter().map(|&v| (v, 0)).collect();
    SelectorDecision { exploit, explore, ranked }
}

fn draw_explore<S: Scalar>(g: &NetworkGraph<S>, pool: &mut DepletingPool, exploit: &[NodeId], n: usize) -> Vec<NodeId> {
    let mut taken = exploit.to_vec();
    let mut explore = Vec::with_capacity(n);
    for _ in 0..n {
        match pool.draw(g, &taken) {
            Some(v) => {
                taken.push(v);
                explore.push(v);
            }
            None => break,
        }
    }
    explore
}

/// What [`apply_decision`] actually placed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Applied {
    pub exploit: Vec<NodeId>,
    pub explore: Vec<NodeId>,
    /// Previous edges re-added because no replacement could be placed.
    pub kept: Vec<NodeId>,
}

/// Replaces `u`'s out-edges. Exploit targets go in ascending id order so that
/// reapplying the current set is a no-op. Rejected exploit targets fall back to
/// the next ranked candidate, rejected explore targets to the next pool draw.
pub fn apply_decision<S: Scalar>(g: &mut NetworkGraph<S>, u: NodeId, d: &SelectorDecision, pool: &mut DepletingPool) -> Applied {
    let previous = g.clear_out_edges(u);
    let n_exploit = d.exploit.len();
    let mut applied = Applied::default();

    let mut wanted: Vec<NodeId> = d.exploit.clone();
    wanted.sort();
    let fallbacks = d.ranked.iter().map(|&(v, _)| v).filter(|v| !d.exploit.contains(v));
    let mut placed: Vec<NodeId> = Vec::new();
    for v in wanted.into_iter().chain(fallbacks) {
        if placed.len() == n_exploit {
            break;
        }
        if d.explore.contains(&v) || placed.contains(&v) {
            continue;
        }
        if g.has_spare_in(v) && g.connect(u, v, EdgeRole::Exploit).is_ok() {
            placed.push(v);
        }
    }
    applied.exploit = placed.clone();

    for &target in &d.explore {
        let mut candidate = Some(target);
        let mut attempts = 0;
        while let Some(v) = candidate {
            if !placed.contains(&v) && g.connect(u, v, EdgeRole::Explore).is_ok() {
                placed.push(v);
                applied.explore.push(v);
                break;
            }
            attempts += 1;
            if attempts > g.n_nodes() {
                break;
            }
            let mut exclude = placed.clone();
            exclude.extend(&d.explore);
            candidate = pool.draw(g, &exclude);
        }
    }

    let target_degree = n_exploit + d.explore.len();
    for e in &previous {
        if g.out_degree(u) >= target_degree.min(g.max_out()) {
            break;
        }
        if !g.has_edge(u, e.peer) && g.connect(u, e.peer, e.role).is_ok() {
            log::warn!("node {u}: no placeable replacement, keeping edge to {}", e.peer);
            applied.kept.push(e.peer);
        }
    }
    debug_assert!(g.check_invariants().is_ok());
    applied
}
