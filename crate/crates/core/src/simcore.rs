//! Round and epoch engine.
//!
//! Each round one publisher emits a block which floods over every connection.
//! A node `u` hears the block from each neighbor `v` at `d(v) + delay(v, u)`,
//! except from neighbors that first received the block from `u` itself: those
//! never send it back and are recorded as symbolic. Observations are relative to
//! the earliest arrival at `u`, so the fastest neighbor always records zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{shortest_paths, EdgeFilter, NetworkGraph, NodeId};
use crate::scalar::Scalar;

/// Tolerance on the total publishing probability.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("publisher set is empty")]
    NoPublishers,
    #[error("publisher {0} is not a node of the network")]
    UnknownPublisher(NodeId),
    #[error("requested {requested} publishers but the network has {available} nodes")]
    TooManyPublishers { requested: usize, available: usize },
    #[error("publishing probabilities sum to {0}, expected 1")]
    BadProbabilitySum(f64),
    #[error("an epoch needs at least one round")]
    EmptyEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Goldfish,
    Perigee,
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRole {
    pub is_publisher: bool,
    pub publish_prob: f64,
    pub is_adaptive: bool,
    pub strategy: Strategy,
}

/// Per-node roles; the publishing probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Roles {
    nodes: Vec<NodeRole>,
}

impl Roles {
    /// Builds roles from publishing probabilities and the set of adaptive nodes.
    pub fn new(publish_prob: &[f64], adaptive: &[NodeId], strategy: Strategy) -> Result<Self, SimError> {
        let total: f64 = publish_prob.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(SimError::BadProbabilitySum(total));
        }
        let mut nodes: Vec<NodeRole> = publish_prob
            .iter()
            .map(|&p| NodeRole { is_publisher: p > 0.0, publish_prob: p, is_adaptive: false, strategy: Strategy::Static })
            .collect();
        for &a in adaptive {
            let role = nodes.get_mut(a.index()).ok_or(SimError::UnknownPublisher(a))?;
            role.is_adaptive = true;
            role.strategy = strategy;
        }
        Ok(Self { nodes })
    }

    pub fn get(&self, u: NodeId) -> &NodeRole {
        &self.nodes[u.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn publish_probs(&self) -> Vec<f64> {
        self.nodes.iter().map(|r| r.publish_prob).collect()
    }

    pub fn adaptive(&self) -> Vec<NodeId> {
        self.nodes.iter().enumerate().filter(|(_, r)| r.is_adaptive).map(|(i, _)| NodeId(i)).collect()
    }
}

/// How publishing probability is spread over the network.
#[derive(Debug, Clone, PartialEq)]
pub enum PublisherDist {
    /// `count` random publishers with mass ∝ exp(−β·rank), β set so the top 20 %
    /// of publishers hold 80 % of the mass.
    Exponential { count: usize },
    /// `count` random publishers with equal mass.
    Uniform { count: usize },
    /// Equal mass over an explicit list.
    FixedSet(Vec<NodeId>),
}

/// Fraction of publishers (by rank) that should hold [`EXP_HEAD_MASS`] of the mass.
pub const EXP_HEAD_FRACTION: f64 = 0.2;
pub const EXP_HEAD_MASS: f64 = 0.8;

fn exp_weights(count: usize, beta: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..count).map(|rank| (-beta * rank as f64).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn head_mass(weights: &[f64], head: usize) -> f64 {
    weights[..head].iter().sum()
}

/// Decay rate β such that the top `round(0.2·count)` ranks hold 80 % of the mass,
/// found by bisection. Returns 0 when uniform weights already reach the target.
pub fn calibrate_exponential_beta(count: usize) -> f64 {
    let head = ((count as f64 * EXP_HEAD_FRACTION).round() as usize).clamp(1, count.max(1));
    if count == 0 || head_mass(&exp_weights(count, 0.0), head) >= EXP_HEAD_MASS {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while head_mass(&exp_weights(count, hi), head) < EXP_HEAD_MASS {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if head_mass(&exp_weights(count, mid), head) < EXP_HEAD_MASS {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-node publishing probabilities for `n_nodes` nodes. Random publisher subsets
/// and exponential ranks are drawn from `seed`.
pub fn sample_publishers(n_nodes: usize, dist: &PublisherDist, seed: u64) -> Result<Vec<f64>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![0.0; n_nodes];
    let pick = |count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<usize>, SimError> {
        if count == 0 {
            return Err(SimError::NoPublishers);
        }
        if count > n_nodes {
            return Err(SimError::TooManyPublishers { requested: count, available: n_nodes });
        }
        let mut all: Vec<usize> = (0..n_nodes).collect();
        all.shuffle(rng);
        all.truncate(count);
        Ok(all)
    };
    match dist {
        PublisherDist::Exponential { count } => {
            let ranked = pick(*count, &mut rng)?;
            let weights = exp_weights(*count, calibrate_exponential_beta(*count));
            for (node, w) in ranked.into_iter().zip(weights) {
                probs[node] = w;
            }
        }
        PublisherDist::Uniform { count } => {
            for node in pick(*count, &mut rng)? {
                probs[node] = 1.0 / *count as f64;
            }
        }
        PublisherDist::FixedSet(set) => {
            if set.is_empty() {
                return Err(SimError::NoPublishers);
            }
            let mass = 1.0 / set.len() as f64;
            for &p in set {
                *probs.get_mut(p.index()).ok_or(SimError::UnknownPublisher(p))? += mass;
            }
        }
    }
    Ok(probs)
}

/// Inverse-CDF draw of one publisher.
pub fn draw_publisher<R: Rng + ?Sized>(publish_prob: &[f64], rng: &mut R) -> NodeId {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in publish_prob.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if x < acc {
            return NodeId(i);
        }
    }
    NodeId(last)
}

pub fn draw_publishers<R: Rng + ?Sized>(publish_prob: &[f64], n_rounds: usize, rng: &mut R) -> Vec<NodeId> {
    (0..n_rounds).map(|_| draw_publisher(publish_prob, rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelTime<S> {
    Measured(S),
    /// The peer received the block from us first and never sent it.
    Symbolic,
}

impl<S: Scalar> RelTime<S> {
    pub fn value(self) -> Option<S> {
        match self {
            RelTime::Measured(t) => Some(t),
            RelTime::Symbolic => None,
        }
    }

    pub fn is_symbolic(self) -> bool {
        matches!(self, RelTime::Symbolic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord<S> {
    pub peer: NodeId,
    pub block: u64,
    pub rel_time: RelTime<S>,
}

/// Everything one node recorded about one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecords<S> {
    pub block: u64,
    pub records: Vec<DeliveryRecord<S>>,
}

/// One node's observations over a connection-stable span of rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochBatch<S> {
    pub epoch_id: usize,
    pub peer_set: Vec<NodeId>,
    pub blocks: Vec<BlockRecords<S>>,
}

impl<S: Scalar> EpochBatch<S> {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Debug rendering: one `epoch,block,peer,rel_time|S` line per record.
    pub fn to_debug_lines(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            for r in &b.records {
                match r.rel_time {
                    RelTime::Measured(t) => writeln!(out, "{},{},{},{}", self.epoch_id, r.block, r.peer, t),
                    RelTime::Symbolic => writeln!(out, "{},{},{},S", self.epoch_id, r.block, r.peer),
                }
                .expect("writing to a String cannot fail");
            }
        }
        out
    }
}

/// Converts absolute arrivals (`None` = symbolic) into relative times.
pub fn relative_times<S: Scalar>(arrivals: &[(NodeId, Option<S>)], block: u64) -> Vec<DeliveryRecord<S>> {
    let first = arrivals.iter().filter_map(|&(_, t)| t).fold(S::infinity(), S::min);
    arrivals
        .iter()
        .map(|&(peer, t)| DeliveryRecord {
            peer,
            block,
            rel_time: match t {
                Some(t) => RelTime::Measured(t - first),
                None => RelTime::Symbolic,
            },
        })
        .collect()
}

/// Flooding state of one round: distances from the publisher plus adjacency.
struct Flood<'g, S> {
    g: &'g NetworkGraph<S>,
    adj: Vec<Vec<NodeId>>,
    dist: Vec<S>,
    publisher: NodeId,
}

impl<'g, S: Scalar> Flood<'g, S> {
    fn new(g: &'g NetworkGraph<S>, publisher: NodeId) -> Self {
        Self {
            g,
            adj: crate::netgraph::paths::adjacency(g, EdgeFilter::All),
            dist: shortest_paths(g, publisher, EdgeFilter::All),
            publisher,
        }
    }

    /// `v` got the block from `u` strictly before any other route, so it never sends back.
    fn first_sender_is(&self, v: NodeId, u: NodeId) -> bool {
        if v == self.publisher {
            return false;
        }
        let via_u = self.dist[u.index()] + self.g.edge_delay(u, v);
        self.adj[v.index()]
            .iter()
            .filter(|&&x| x != u)
            .all(|&x| via_u < self.dist[x.index()] + self.g.edge_delay(x, v))
    }

    fn observe(&self, u: NodeId, block: u64) -> Vec<DeliveryRecord<S>> {
        if !self.dist[u.index()].is_finite() {
            return Vec::new();
        }
        let arrivals: Vec<(NodeId, Option<S>)> = self
            .g
            .neighbors(u)
            .into_iter()
            .filter(|v| self.dist[v.index()].is_finite())
            .map(|v| {
                if self.first_sender_is(v, u) {
                    (v, None)
                } else {
                    (v, Some(self.dist[v.index()] + self.g.edge_delay(v, u)))
                }
            })
            .collect();
        relative_times(&arrivals, block)
    }
}

/// Records every node makes for the block published in `round`.
pub fn run_round<S: Scalar>(g: &NetworkGraph<S>, round: u64, publisher: NodeId) -> Vec<Vec<DeliveryRecord<S>>> {
    let flood = Flood::new(g, publisher);
    g.nodes().map(|u| flood.observe(u, round)).collect()
}

/// Like [`run_epoch`] but with the per-round publishers given explicitly.
pub fn run_epoch_with_publishers<S: Scalar>(
    g: &NetworkGraph<S>,
    observers: &[NodeId],
    epoch_id: usize,
    first_round: u64,
    publishers: &[NodeId],
) -> Result<BTreeMap<NodeId, EpochBatch<S>>, SimError> {
    if publishers.is_empty() {
        return Err(SimError::EmptyEpoch);
    }
    if let Some(&p) = publishers.iter().find(|p| p.index() >= g.n_nodes()) {
        return Err(SimError::UnknownPublisher(p));
    }
    let mut batches: BTreeMap<NodeId, EpochBatch<S>> = observers
        .iter()
        .map(|&u| (u, EpochBatch { epoch_id, peer_set: g.neighbors(u), blocks: Vec::with_capacity(publishers.len()) }))
        .collect();
    for (k, &publisher) in publishers.iter().enumerate() {
        let block = first_round + k as u64;
        let flood = Flood::new(g, publisher);
        for (&u, batch) in batches.iter_mut() {
            batch.blocks.push(BlockRecords { block, records: flood.observe(u, block) });
        }
    }
    Ok(batches)
}

/// Runs `n_rounds` rounds on a fixed topology, drawing one publisher per round, and
/// returns the batch of every adaptive node.
pub fn run_epoch<S: Scalar, R: Rng + ?Sized>(
    g: &NetworkGraph<S>,
    roles: &Roles,
    epoch_id: usize,
    first_round: u64,
    n_rounds: usize,
    rng: &mut R,
) -> Result<BTreeMap<NodeId, EpochBatch<S>>, SimError> {
    if n_rounds == 0 {
        return Err(SimError::EmptyEpoch);
    }
    let publishers = draw_publishers(&roles.publish_probs(), n_rounds, rng);
    run_epoch_with_publishers(g, &roles.adaptive(), epoch_id, first_round, &publishers)
}
