//! Overlay topology with per-node degree caps and a latency model.
//!
//! Edges are directed by who initiated them (an out-edge of `u` is an in-edge of
//! `v`), but every connection relays in both directions. Each out-edge carries a
//! role: exploitation edges are the ones a node keeps on merit, exploration edges
//! rotate through candidates. Static nodes only hold exploitation edges.

mod latency;
pub(crate) mod paths;

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use latency::{load_latency_csv, parse_latency_csv, sample_cities, LatencyModel, Propagation};
pub use paths::{shortest_paths, EdgeFilter};

/// Restarts allowed when random edge placement runs out of in-capacity.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRole {
    Exploit,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutEdge {
    pub peer: NodeId,
    pub role: EdgeRole,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("self-edge on node {0}")]
    SelfEdge(NodeId),
    #[error("edge {0} -> {1} already exists")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {0} already has {1} outgoing connections")]
    OutSaturated(NodeId, usize),
    #[error("node {0} rejects the connection: {1} incoming connections already")]
    InSaturated(NodeId, usize),
    #[error("degree invariant violated: {0}")]
    Invariant(String),
    #[error("invalid latency model: {0}")]
    InvalidLatency(String),
    #[error("latency file: {0}")]
    LatencyFile(String),
    #[error("cannot place {max_out} out-edges per node on {n} nodes with in-cap {max_in} after {attempts} attempts")]
    Infeasible { n: usize, max_out: usize, max_in: usize, attempts: usize },
}

/// How node positions or propagation delays are produced for a generated graph.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyKind<S> {
    /// Uniform positions on a `plane_size × plane_size` square.
    Planar2d { plane_size: S },
    /// Use this propagation matrix as-is (already sampled to `n` nodes).
    Measured { matrix: Vec<Vec<S>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph<S> {
    out_edges: Vec<Vec<OutEdge>>,
    in_edges: Vec<Vec<NodeId>>,
    max_out: usize,
    max_in: usize,
    latency: LatencyModel<S>,
}

impl<S: Scalar> NetworkGraph<S> {
    /// An edgeless overlay on `latency.n_nodes()` nodes.
    pub fn empty(max_out: usize, max_in: usize, latency: LatencyModel<S>) -> Self {
        let n = latency.n_nodes();
        Self {
            out_edges: vec![Vec::new(); n],
            in_edges: vec![Vec::new(); n],
            max_out,
            max_in,
            latency,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.out_edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n_nodes()).map(NodeId)
    }

    pub fn max_out(&self) -> usize {
        self.max_out
    }

    pub fn max_in(&self) -> usize {
        self.max_in
    }

    pub fn latency(&self) -> &LatencyModel<S> {
        &self.latency
    }

    pub fn out_edges(&self, u: NodeId) -> &[OutEdge] {
        &self.out_edges[u.index()]
    }

    pub fn in_edges(&self, u: NodeId) -> &[NodeId] {
        &self.in_edges[u.index()]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_edges[u.index()].len()
    }

    pub fn in_degree(&self, u: NodeId) -> usize {
        self.in_edges[u.index()].len()
    }

    pub fn has_spare_in(&self, u: NodeId) -> bool {
        self.in_degree(u) < self.max_in
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out_edges[u.index()].iter().any(|e| e.peer == v)
    }

    pub fn peers_with_role(&self, u: NodeId, role: EdgeRole) -> Vec<NodeId> {
        self.out_edges[u.index()].iter().filter(|e| e.role == role).map(|e| e.peer).collect()
    }

    /// Every node sharing a connection with `u` in either direction, ascending, deduplicated.
    pub fn neighbors(&self, u: NodeId) -> Vec<NodeId> {
        let mut all: Vec<NodeId> = self.out_edges[u.index()]
            .iter()
            .map(|e| e.peer)
            .chain(self.in_edges[u.index()].iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn edge_delay(&self, u: NodeId, v: NodeId) -> S {
        self.latency.edge_delay(u, v)
    }

    fn check_node(&self, u: NodeId) -> Result<(), GraphError> {
        if u.index() < self.n_nodes() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(u))
        }
    }

    /// Opens `u -> v`. Fails without mutating if either endpoint is saturated.
    pub fn connect(&mut self, u: NodeId, v: NodeId, role: EdgeRole) -> Result<(), GraphError> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(GraphError::SelfEdge(u));
        }
        if self.has_edge(u, v) {
            return Err(GraphError::DuplicateEdge(u, v));
        }
        if self.out_degree(u) >= self.max_out {
            return Err(GraphError::OutSaturated(u, self.out_degree(u)));
        }
        if !self.has_spare_in(v) {
            return Err(GraphError::InSaturated(v, self.in_degree(v)));
        }
        self.out_edges[u.index()].push(OutEdge { peer: v, role });
        self.in_edges[v.index()].push(u);
        Ok(())
    }

    /// Closes `u -> v`; returns whether the edge existed.
    pub fn disconnect(&mut self, u: NodeId, v: NodeId) -> bool {
        let outs = &mut self.out_edges[u.index()];
        let Some(pos) = outs.iter().position(|e| e.peer == v) else {
            return false;
        };
        outs.remove(pos);
        let ins = &mut self.in_edges[v.index()];
        if let Some(pos) = ins.iter().position(|&w| w == u) {
            ins.remove(pos);
        }
        true
    }

    /// Drops every out-edge of `u`, returning them in their previous order.
    pub fn clear_out_edges(&mut self, u: NodeId) -> Vec<OutEdge> {
        let edges = std::mem::take(&mut self.out_edges[u.index()]);
        for e in &edges {
            let ins = &mut self.in_edges[e.peer.index()];
            if let Some(pos) = ins.iter().position(|&w| w == u) {
                ins.remove(pos);
            }
        }
        edges
    }

    pub fn set_role(&mut self, u: NodeId, v: NodeId, role: EdgeRole) -> bool {
        match self.out_edges[u.index()].iter_mut().find(|e| e.peer == v) {
            Some(e) => {
                e.role = role;
                true
            }
            None => false,
        }
    }

    /// Verifies degree caps, in/out view consistency, and absence of self or duplicate edges.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        let n = self.n_nodes();
        let mut expected_in = vec![Vec::new(); n];
        for (u, outs) in self.out_edges.iter().enumerate() {
            if outs.len() > self.max_out {
                return Err(GraphError::Invariant(format!("node {u} has out-degree {} > {}", outs.len(), self.max_out)));
            }
            for (k, e) in outs.iter().enumerate() {
                if e.peer.index() >= n {
                    return Err(GraphError::Invariant(format!("edge {u} -> {} leaves the graph", e.peer)));
                }
                if e.peer.index() == u {
                    return Err(GraphError::Invariant(format!("self-edge on {u}")));
                }
                if outs[..k].iter().any(|f| f.peer == e.peer) {
                    return Err(GraphError::Invariant(format!("duplicate edge {u} -> {}", e.peer)));
                }
                expected_in[e.peer.index()].push(NodeId(u));
            }
        }
        for (v, ins) in self.in_edges.iter().enumerate() {
            if ins.len() > self.max_in {
                return Err(GraphError::Invariant(format!("node {v} has in-degree {} > {}", ins.len(), self.max_in)));
            }
            let mut have = ins.clone();
            have.sort_unstable();
            expected_in[v].sort_unstable();
            if have != expected_in[v] {
                return Err(GraphError::Invariant(format!("in-edge view of node {v} disagrees with out-edges")));
            }
        }
        Ok(())
    }

    /// Flat `(u, v, role)` list in node order, used for digests and equality checks.
    pub fn edge_list(&self) -> Vec<(NodeId, NodeId, EdgeRole)> {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(u, outs)| outs.iter().map(move |e| (NodeId(u), e.peer, e.role)))
            .collect()
    }
}

/// Random overlay in which every node opens exactly `max_out` exploitation edges to
/// distinct peers, each chosen uniformly among nodes that still have in-capacity.
/// Placement that runs out of capacity restarts, up to [`MAX_GENERATION_ATTEMPTS`] times.
pub fn generate_random_graph<S: Scalar>(
    n: usize,
    max_out: usize,
    max_in: usize,
    kind: &LatencyKind<S>,
    node_delay_ms: S,
    seed: u64,
) -> Result<NetworkGraph<S>, GraphError> {
    if n < max_out + 1 {
        return Err(GraphError::Infeasible { n, max_out, max_in, attempts: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latency = match kind {
        LatencyKind::Planar2d { plane_size } => {
            let size = plane_size.as_f64();
            let positions = (0..n)
                .map(|_| (S::lit(rng.gen_range(0.0..=size)), S::lit(rng.gen_range(0.0..=size))))
                .collect();
            LatencyModel::planar(positions, *plane_size, node_delay_ms)?
        }
        LatencyKind::Measured { matrix } => {
            if matrix.len() != n {
                return Err(GraphError::InvalidLatency(format!(
                    "measured matrix covers {} nodes, graph needs {n}",
                    matrix.len()
                )));
            }
            LatencyModel::measured(matrix.clone(), node_delay_ms)?
        }
    };

    'attempt: for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut g = NetworkGraph::empty(max_out, max_in, latency.clone());
        for u in 0..n {
            let candidates: Vec<NodeId> =
                (0..n).filter(|&v| v != u && g.in_degree(NodeId(v)) < max_in).map(NodeId).collect();
            if candidates.len() < max_out {
                continue 'attempt;
            }
            let picks: Vec<NodeId> = candidates.choose_multiple(&mut rng, max_out).copied().collect();
            for v in picks {
                g.connect(NodeId(u), v, EdgeRole::Exploit)?;
            }
        }
        return Ok(g);
    }
    Err(GraphError::Infeasible { n, max_out, max_in, attempts: MAX_GENERATION_ATTEMPTS })
}
