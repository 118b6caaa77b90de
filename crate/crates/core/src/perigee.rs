//! Memoryless subset-scoring baseline: pick the exploit subset of current peers
//! whose best member per block gives the lowest aggregate delivery time.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgraph::{NetworkGraph, NodeId};
use crate::scalar::{self, Scalar};
use crate::selector::{DepletingPool, SelectorDecision};
use crate::simcore::{EpochBatch, RelTime};
use crate::stats::percentile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Sum,
    /// 90th percentile with linear interpolation.
    #[default]
    P90,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerigeeError {
    #[error("{available} peers cannot fill {n_exploit} exploit slots")]
    TooFewPeers { available: usize, n_exploit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetScore<S> {
    pub subset: Vec<NodeId>,
    pub score: S,
}

/// Per-block relative times of the peer set with symbolic or absent records
/// replaced by the block's worst measurement plus one millisecond. Blocks with
/// no measurement at all are dropped.
fn block_costs<S: Scalar>(batch: &EpochBatch<S>) -> Vec<BTreeMap<NodeId, S>> {
    let mut out = Vec::new();
    for b in &batch.blocks {
        let measured: Vec<(NodeId, S)> = b
            .records
            .iter()
            .filter_map(|r| match r.rel_time {
                RelTime::Measured(t) => Some((r.peer, t)),
                RelTime::Symbolic => None,
            })
            .collect();
        if measured.is_empty() {
            continue;
        }
        let penalty = measured.iter().map(|&(_, t)| t).fold(S::neg_infinity(), S::max) + S::one();
        let mut costs: BTreeMap<NodeId, S> = batch.peer_set.iter().map(|&p| (p, penalty)).collect();
        costs.extend(measured);
        out.push(costs);
    }
    out
}

/// Scores every `n_exploit`-subset of the batch's peer set in lexicographic order.
pub fn score_subsets<S: Scalar>(batch: &EpochBatch<S>, n_exploit: usize, aggregate: Aggregate) -> Result<Vec<SubsetScore<S>>, PerigeeError> {
    let mut peers = batch.peer_set.clone();
    peers.sort();
    peers.dedup();
    if peers.len() < n_exploit {
        return Err(PerigeeError::TooFewPeers { available: peers.len(), n_exploit });
    }
    let blocks = block_costs(batch);
    Ok(peers
        .into_iter()
        .combinations(n_exploit)
        .map(|subset| {
            let mut per_block: Vec<S> =
                blocks.iter().map(|c| subset.iter().map(|p| c[p]).fold(S::infinity(), S::min)).collect();
            let score = match aggregate {
                Aggregate::Sum => per_block.iter().copied().sum(),
                Aggregate::P90 => {
                    per_block.sort_by(|a, b| scalar::cmp(*a, *b));
                    percentile(&per_block, 0.9).unwrap_or_else(S::zero)
                }
            };
            SubsetScore { subset, score }
        })
        .collect())
}

/// Lowest-scoring subset (first in lexicographic order on ties) plus
/// exploration draws from `pool`.
pub fn perigee_select<S: Scalar>(
    g: &NetworkGraph<S>,
    batch: &EpochBatch<S>,
    n_exploit: usize,
    n_explore: usize,
    aggregate: Aggregate,
    pool: &mut DepletingPool,
) -> Result<(SelectorDecision, Vec<SubsetScore<S>>), PerigeeError> {
    let owner = pool.owner();
    let mut filtered = batch.clone();
    filtered.peer_set.retain(|&p| p != owner);
    let scored = score_subsets(&filtered, n_exploit, aggregate)?;
    let best = scored
        .iter()
        .reduce(|best, s| if s.score < best.score { s } else { best })
        .map(|s| s.subset.clone())
        .unwrap_or_default();
    let mut decision = crate::selector::explore_only(g, best, pool, n_explore);
    // fallbacks for rejected targets: remaining subsets' members in score order
    let mut order: Vec<&SubsetScore<S>> = scored.iter().collect();
    order.sort_by(|a, b| scalar::cmp(a.score, b.score));
    for s in order {
        for &p in &s.subset {
            if !decision.ranked.iter().any(|&(v, _)| v == p) {
                decision.ranked.push((p, 0));
            }
        }
    }
    Ok((decision, scored))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_random_graph, LatencyKind};
    use crate::simcore::{BlockRecords, DeliveryRecord};

    fn batch(peers: &[usize], rows: &[&[Option<f64>]]) -> EpochBatch<f64> {
        EpochBatch {
            epoch_id: 0,
            peer_set: peers.iter().map(|&p| NodeId(p)).collect(),
            blocks: rows
                .iter()
                .enumerate()
                .map(|(k, row)| BlockRecords {
                    block: k as u64,
                    records: peers
                        .iter()
                        .zip(row.iter())
                        .map(|(&p, v)| DeliveryRecord {
                            peer: NodeId(p),
                            block: k as u64,
                            rel_time: v.map_or(RelTime::Symbolic, RelTime::Measured),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn four_peers_give_four_subsets() {
        let b = batch(&[1, 2, 3, 4], &[&[Some(0.0), Some(1.0), Some(2.0), Some(3.0)]]);
        assert_eq!(score_subsets(&b, 3, Aggregate::P90).unwrap().len(), 4);
    }

    #[test]
    fn dominant_peer_least_subset_wins() {
        let rows: Vec<[Option<f64>; 4]> =
            (0..5).map(|k| [Some(10.0 + k as f64), Some(5.0), Some(0.0), Some(7.0)]).collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| &r[..]).collect();
        let b = batch(&[1, 2, 3, 4], &refs);
        let scored = score_subsets(&b, 3, Aggregate::P90).unwrap();
        for s in &scored {
            assert_eq!(s.score == 0.0, s.subset.contains(&NodeId(3)));
        }
        let g = generate_random_graph(10, 4, 8, &LatencyKind::Planar2d { plane_size: 500.0 }, 20.0, 0).unwrap();
        let mut pool = DepletingPool::new(NodeId(0), 0);
        let (d, _) = perigee_select(&g, &b, 3, 1, Aggregate::P90, &mut pool).unwrap();
        assert_eq!(d.exploit, vec![NodeId(1), NodeId(2), NodeId(3)]);
    }

    #[test]
    fn symbolic_costs_worst_plus_one() {
        let b = batch(&[1, 2], &[&[None, Some(8.0)], &[Some(0.0), None]]);
        let costs = block_costs(&b);
        assert_eq!(costs[0][&NodeId(1)], 9.0);
        assert_eq!(costs[1][&NodeId(2)], 1.0);
        let all_symbolic = batch(&[1, 2], &[&[None, None]]);
        assert!(block_costs(&all_symbolic).is_empty());
    }

    #[test]
    fn too_few_peers() {
        let b = batch(&[1, 2], &[&[Some(0.0), Some(1.0)]]);
        assert!(score_subsets(&b, 3, Aggregate::P90).is_err());
    }
}
