use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EdgeRole, NetworkGraph, NodeId};
use crate::scalar::{self, Scalar};

/// Which connections a shortest-path query may traverse. Both variants treat
/// connections as bidirectional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFilter {
    /// Every connection; this is how blocks actually flood.
    All,
    /// Only out-edges holding the exploitation role; used to score topologies.
    ExploitOnly,
}

#[derive(Debug, Clone, Copy)]
struct Frontier<S> {
    dist: S,
    node: NodeId,
}

impl<S: Scalar> PartialEq for Frontier<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Scalar> Eq for Frontier<S> {}

// BinaryHeap is a max-heap; reverse both keys so the closest, lowest-id node pops first.
impl<S: Scalar> Ord for Frontier<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        scalar::cmp(other.dist, self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl<S: Scalar> PartialOrd for Frontier<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Undirected adjacency restricted by `filter`; parallel connections are kept.
pub(crate) fn adjacency<S: Scalar>(g: &NetworkGraph<S>, filter: EdgeFilter) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); g.n_nodes()];
    for u in g.nodes() {
        for e in g.out_edges(u) {
            if filter == EdgeFilter::ExploitOnly && e.role != EdgeRole::Exploit {
                continue;
            }
            adj[u.index()].push(e.peer);
            adj[e.peer.index()].push(u);
        }
    }
    adj
}

/// Single-source Dijkstra distances in milliseconds. Traversing `x -> y` costs
/// `edge_delay(x, y)`; unreachable nodes are `+inf`.
pub fn shortest_paths<S: Scalar>(g: &NetworkGraph<S>, src: NodeId, filter: EdgeFilter) -> Vec<S> {
    let adj = adjacency(g, filter);
    let mut dist = vec![S::infinity(); g.n_nodes()];
    dist[src.index()] = S::zero();
    let mut heap = BinaryHeap::from([Frontier { dist: S::zero(), node: src }]);
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node.index()] {
            continue;
        }
        for &next in &adj[node.index()] {
            let candidate = d + g.edge_delay(node, next);
            if candidate < dist[next.index()] {
                dist[next.index()] = candidate;
                heap.push(Frontier { dist: candidate, node: next });
            }
        }
    }
    dist
}
