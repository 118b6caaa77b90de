use crate::netgraph::{shortest_paths, EdgeFilter, NetworkGraph, NodeId};
use crate::scalar::{self, Scalar};

/// Share of publishing mass a broadcast must reach.
pub const COVERAGE: f64 = 0.9;
const COVERAGE_SLACK: f64 = 1e-12;

/// Smallest distance whose publishers jointly hold at least [`COVERAGE`] of the mass.
/// `+inf` if that mass is unreachable.
pub fn coverage_distance<S: Scalar>(dist_and_prob: &mut [(S, f64)]) -> S {
    dist_and_prob.sort_by(|a, b| scalar::cmp(a.0, b.0));
    let mut acc = 0.0;
    for &(d, p) in dist_and_prob.iter() {
        acc += p;
        if acc >= COVERAGE - COVERAGE_SLACK {
            return d;
        }
    }
    S::infinity()
}

/// Coverage distance over exploitation edges minus the same with a direct
/// connection to every publisher.
pub fn wasted_latency<S: Scalar>(g: &NetworkGraph<S>, node: NodeId, publish_prob: &[f64]) -> S {
    let dist = shortest_paths(g, node, EdgeFilter::ExploitOnly);
    let publishers: Vec<(NodeId, f64)> =
        publish_prob.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (NodeId(i), p)).collect();
    let mut topo: Vec<(S, f64)> = publishers.iter().map(|&(p, w)| (dist[p.index()], w)).collect();
    let mut direct: Vec<(S, f64)> =
        publishers.iter().map(|&(p, w)| (if p == node { S::zero() } else { g.edge_delay(node, p) }, w)).collect();
    let topo = coverage_distance(&mut topo);
    if !topo.is_finite() {
        log::warn!("node {node}: 90% of publishing mass unreachable over exploitation edges");
        return S::infinity();
    }
    topo - coverage_distance(&mut direct)
}

/// Per-publisher gap between the exploit-only distance and a direct connection.
pub fn optimality_gaps<S: Scalar>(g: &NetworkGraph<S>, node: NodeId, publishers: &[NodeId]) -> Vec<S> {
    let dist = shortest_paths(g, node, EdgeFilter::ExploitOnly);
    publishers.iter().map(|&p| if p == node { S::zero() } else { dist[p.index()] - g.edge_delay(node, p) }).collect()
}

/// `λ(e) / λ(0)`; a zero initial gap gives 0 for a zero current gap and `+inf` otherwise.
pub fn gap_ratio(lambda: f64, lambda0: f64) -> f64 {
    if lambda0 > 0.0 {
        lambda / lambda0
    } else if lambda <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
