use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{stream_seed, Agent, ExperimentConfig, HarnessError, PubDist, Stream, Topology};
use crate::netgraph::{generate_random_graph, sample_cities, EdgeRole, LatencyKind, NetworkGraph, NodeId, Propagation};
use crate::selector::apply_decision;
use crate::simcore::{draw_publishers, run_epoch_with_publishers, sample_publishers, PublisherDist, Strategy};

/// Everything a run starts from. Paired runs clone the same scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub graph: NetworkGraph<f64>,
    pub publish_prob: Vec<f64>,
    pub adapters: Vec<NodeId>,
    /// Publisher of every round, per epoch.
    pub publishers_per_epoch: Vec<Vec<NodeId>>,
}

impl Scenario {
    /// Hex SHA-256 over the topology, latency model, roles and round publishers.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let g = &self.graph;
        h.update((g.n_nodes() as u64).to_le_bytes());
        for (u, v, role) in g.edge_list() {
            h.update((u.index() as u64).to_le_bytes());
            h.update((v.index() as u64).to_le_bytes());
            h.update([matches!(role, EdgeRole::Exploit) as u8]);
        }
        match g.latency().propagation() {
            Propagation::Planar { positions, .. } => {
                for (x, y) in positions {
                    h.update(x.to_le_bytes());
                    h.update(y.to_le_bytes());
                }
            }
            Propagation::Measured { matrix } => matrix.iter().flatten().for_each(|x| h.update(x.to_le_bytes())),
        }
        h.update(g.latency().node_delay_ms().to_le_bytes());
        self.publish_prob.iter().for_each(|p| h.update(p.to_le_bytes()));
        self.adapters.iter().for_each(|a| h.update((a.index() as u64).to_le_bytes()));
        for epoch in &self.publishers_per_epoch {
            epoch.iter().for_each(|p| h.update((p.index() as u64).to_le_bytes()));
        }
        hex::encode(h.finalize())
    }
}

/// Marks each adapter's last out-edge as its exploration slot.
fn assign_explore_slots(g: &mut NetworkGraph<f64>, adapters: &[NodeId], n_explore: usize) {
    for &a in adapters {
        let peers: Vec<NodeId> = g.out_edges(a).iter().map(|e| e.peer).collect();
        for &p in peers.iter().rev().take(n_explore) {
            g.set_role(a, p, EdgeRole::Explore);
        }
    }
}

fn pre_draw(cfg: &ExperimentConfig, probs: &[f64], seed: u64) -> Vec<Vec<NodeId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Draws, 0));
    (0..cfg.epochs).map(|_| draw_publishers(probs, cfg.rounds_per_epoch, &mut rng)).collect()
}

fn random_graph(cfg: &ExperimentConfig, kind: &LatencyKind<f64>, seed: u64) -> Result<NetworkGraph<f64>, HarnessError> {
    Ok(generate_random_graph(cfg.n_nodes, cfg.max_out(), cfg.max_in, kind, cfg.node_delay_ms, stream_seed(seed, Stream::Graph, 0))?)
}

/// Comparison scenario for one seed. `cities` is the full measured matrix for the
/// measured topology.
pub fn comparison_scenario(cfg: &ExperimentConfig, seed: u64, cities: Option<&[Vec<f64>]>) -> Result<Scenario, HarnessError> {
    let kind = match cfg.topology {
        Topology::Random2d => LatencyKind::Planar2d { plane_size: cfg.plane_size },
        Topology::Measured => {
            let cities = cities.ok_or_else(|| HarnessError::Config("measured topology needs a latency matrix".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Cities, 0));
            LatencyKind::Measured { matrix: sample_cities(cities, cfg.n_nodes, &mut rng)? }
        }
    };
    let mut graph = random_graph(cfg, &kind, seed)?;
    let mut nodes: Vec<NodeId> = graph.nodes().collect();
    nodes.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Adapters, 0)));
    let mut adapters = nodes[..cfg.n_adapters].to_vec();
    adapters.sort();
    let pub_seed = stream_seed(seed, Stream::Publishers, 0);
    let dist = match cfg.pub_dist {
        PubDist::Exp => PublisherDist::Exponential { count: cfg.n_publishers },
        PubDist::Unif => PublisherDist::Uniform { count: cfg.n_publishers },
        PubDist::Fixed => {
            let mut rest = nodes[cfg.n_adapters..].to_vec();
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(pub_seed));
            rest.truncate(cfg.n_publishers);
            PublisherDist::FixedSet(rest)
        }
    };
    let publish_prob = sample_publishers(cfg.n_nodes, &dist, pub_seed)?;
    assign_explore_slots(&mut graph, &adapters, cfg.n_explore);
    let publishers_per_epoch = pre_draw(cfg, &publish_prob, seed);
    Ok(Scenario { seed, graph, publish_prob, adapters, publishers_per_epoch })
}

/// Single-adapter scenario whose optimum is a direct connection to each of
/// `n_publishers` equally likely publishers. Publishers are drawn among nodes
/// that can still accept the adapter's connection.
pub fn optimal_scenario(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario, HarnessError> {
    let kind = LatencyKind::Planar2d { plane_size: cfg.plane_size };
    let mut graph = random_graph(cfg, &kind, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Adapters, 0));
    let mut nodes: Vec<NodeId> = graph.nodes().collect();
    nodes.shuffle(&mut rng);
    let adapter = nodes[0];
    let publishers: Vec<NodeId> = nodes[1..]
        .iter()
        .copied()
        .filter(|&p| graph.has_spare_in(p) || graph.has_edge(adapter, p))
        .take(cfg.n_publishers)
        .collect();
    if publishers.len() < cfg.n_publishers {
        return Err(HarnessError::Config(format!("only {} nodes can accept the adapter", publishers.len())));
    }
    let publish_prob = sample_publishers(cfg.n_nodes, &PublisherDist::FixedSet(publishers), 0)?;
    assign_explore_slots(&mut graph, &[adapter], cfg.n_explore);
    let publishers_per_epoch = pre_draw(cfg, &publish_prob, seed);
    Ok(Scenario { seed, graph, publish_prob, adapters: vec![adapter], publishers_per_epoch })
}

/// Connections an adapter actually holds after an epoch boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionRow {
    pub epoch: usize,
    pub node: NodeId,
    pub exploit: Vec<NodeId>,
    pub explore: Vec<NodeId>,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub decisions: Vec<DecisionRow>,
    /// JSON lines of completion dumps, when enabled.
    pub dumps: Vec<String>,
    pub learns: usize,
    pub ambiguous_cells: usize,
}

/// Runs every epoch of `scenario` with all adapters on `strategy`. `observe` sees
/// the topology in effect during each epoch before its rounds are played.
pub fn run_scenario<F>(
    scenario: &Scenario,
    strategy: Strategy,
    cfg: &ExperimentConfig,
    mut observe: F,
) -> Result<RunLog, HarnessError>
where
    F: FnMut(usize, &NetworkGraph<f64>),
{
    let mut g = scenario.graph.clone();
    let mut agents: Vec<Agent> = scenario
        .adapters
        .iter()
        .map(|&a| Agent::new(a, strategy, stream_seed(scenario.seed, Stream::Pool, a.index() as u64)))
        .collect();
    let mut log = RunLog::default();
    for (epoch, publishers) in scenario.publishers_per_epoch.iter().enumerate() {
        observe(epoch, &g);
        if strategy == Strategy::Static || agents.is_empty() {
            continue;
        }
        let first_round = (epoch * cfg.rounds_per_epoch) as u64;
        let batches = run_epoch_with_publishers(&g, &scenario.adapters, epoch, first_round, publishers)?;
        let graph = &g;
        let steps: Vec<_> = agents
            .par_iter_mut()
            .zip(batches.into_values().collect::<Vec<_>>())
            .map(|(agent, batch)| agent.end_epoch(graph, batch, epoch, cfg))
            .collect::<Result<_, _>>()?;
        for (agent, step) in agents.iter_mut().zip(steps) {
            if let Some(dump) = step.dump {
                log.dumps.push(serde_json::to_string(&serde_json::json!({
                    "seed": scenario.seed, "epoch": epoch, "node": agent.node, "completion": dump,
                }))?);
            }
            log.learns += step.learned as usize;
            log.ambiguous_cells += step.ambiguous;
            let Some(decision) = step.decision else { continue };
            let applied = apply_decision(&mut g, agent.node, &decision, &mut agent.pool);
            log.decisions.push(DecisionRow { epoch, node: agent.node, exploit: applied.exploit, explore: applied.explore });
        }
    }
    Ok(log)
}
