#![allow(dead_code)]

use goldfish::completer::{assign_neighbors, NeighborAssignment, Temperature};
use goldfish::netgraph::{EdgeFilter, EdgeRole, NetworkGraph, NodeId};
use goldfish::obsmatrix::{CellClass, ObservationMatrix};
use goldfish::simcore::{BlockRecords, DeliveryRecord, EpochBatch, RelTime};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Two epochs of four blocks: peers {1,2,4} then {1,2,3}. Symbolic cells sit at
/// rows 2, 5 and 8 (1-based) like the worked example layout.
pub fn table_batches() -> Vec<EpochBatch<f64>> {
    let epoch = |id: usize, peers: [usize; 3], rows: [[Option<f64>; 3]; 4], first: u64| EpochBatch {
        epoch_id: id,
        peer_set: peers.iter().map(|&p| NodeId(p)).collect(),
        blocks: rows
            .iter()
            .enumerate()
            .map(|(k, row)| BlockRecords {
                block: first + k as u64,
                records: peers
                    .iter()
                    .zip(row)
                    .map(|(&p, t)| DeliveryRecord {
                        peer: NodeId(p),
                        block: first + k as u64,
                        rel_time: t.map_or(RelTime::Symbolic, RelTime::Measured),
                    })
                    .collect(),
            })
            .collect(),
    };
    vec![
        epoch(
            0,
            [1, 2, 4],
            [
                [Some(0.0), Some(30.0), Some(55.0)],
                [None, Some(0.0), None],
                [Some(0.0), Some(32.0), Some(51.0)],
                [Some(12.0), Some(40.0), Some(0.0)],
            ],
            0,
        ),
        epoch(
            1,
            [1, 2, 3],
            [
                [None, Some(0.0), None],
                [Some(0.0), Some(28.0), Some(70.0)],
                [Some(0.0), Some(28.0), Some(66.0)],
                [None, Some(0.0), Some(9.0)],
            ],
            4,
        ),
    ]
}

/// Exhaustive simple-path search; sums hops in path order like a forward relaxation.
pub fn brute_force_distances(g: &NetworkGraph<f64>, src: NodeId, filter: EdgeFilter) -> Vec<f64> {
    let n = g.n_nodes();
    let mut adj = vec![Vec::new(); n];
    for u in g.nodes() {
        for e in g.out_edges(u) {
            if filter == EdgeFilter::ExploitOnly && e.role != EdgeRole::Exploit {
                continue;
            }
            adj[u.index()].push(e.peer);
            adj[e.peer.index()].push(u);
        }
    }
    let mut best = vec![f64::INFINITY; n];
    let mut on_path = vec![false; n];
    fn walk(g: &NetworkGraph<f64>, adj: &[Vec<NodeId>], u: NodeId, d: f64, on_path: &mut [bool], best: &mut [f64]) {
        best[u.index()] = best[u.index()].min(d);
        on_path[u.index()] = true;
        for &v in &adj[u.index()] {
            if !on_path[v.index()] {
                walk(g, adj, v, d + g.edge_delay(u, v), on_path, best);
            }
        }
        on_path[u.index()] = false;
    }
    walk(g, &adj, src, 0.0, &mut on_path, &mut best);
    best
}

/// Noiseless instance: `truth[i][j] = base[j] + shift[i]`, with up to `max_removed`
/// of the cells hidden so that every hidden cell still has a qualifying neighbour.
pub struct ShiftedInstance {
    pub matrix: ObservationMatrix<f64>,
    pub truth: Vec<Vec<f64>>,
}

pub fn shifted_instance<R: Rng>(rng: &mut R, p: usize, q: usize, max_removed: f64, k: usize) -> ShiftedInstance {
    let base: Vec<f64> = (0..q).map(|_| rng.gen_range(0.0..300.0)).collect();
    let truth: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let s = rng.gen_range(-100.0..100.0);
            base.iter().map(|b| b + s).collect()
        })
        .collect();
    let budget = ((p * q) as f64 * max_removed).floor() as usize;
    loop {
        let n_remove = rng.gen_range(1..=budget.max(1));
        let mut hidden = vec![vec![false; q]; p];
        for _ in 0..n_remove {
            hidden[rng.gen_range(0..p)][rng.gen_range(0..q)] = true;
        }
        let cells = truth
            .iter()
            .zip(&hidden)
            .map(|(row, h)| {
                row.iter().zip(h).map(|(&v, &gone)| if gone { (CellClass::Missing, None) } else { (CellClass::Observed, Some(v)) }).collect()
            })
            .collect();
        let mut matrix = ObservationMatrix::from_cells(cells, vec![0; p], (0..q).map(NodeId).collect());
        matrix.classify_missing(k);
        let counts = matrix.counts();
        if counts.infeasible == 0 && counts.estimable + counts.ambiguous > 0 {
            return ShiftedInstance { matrix, truth };
        }
    }
}

pub fn assignment(matrix: &ObservationMatrix<f64>, k: usize) -> NeighborAssignment<f64> {
    assign_neighbors(matrix, k, Temperature::MeanVariance)
}

/// Minimiser of the weighted quadratic objective solved as one stacked linear
/// least-squares system in `(a, c)`. Returns raw-frame estimates `a_v - c_row(v)`.
pub fn least_squares_raw(matrix: &ObservationMatrix<f64>, asg: &NeighborAssignment<f64>, reg_weight: f64) -> Vec<f64> {
    let s = asg.cells.len();
    let p = matrix.n_rows();
    let n = s + p;
    let c = |i: usize| s + i;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for (v, cell) in asg.cells.iter().enumerate() {
        let r = cell.row;
        for nb in &cell.neighbors {
            let o = nb.row;
            let sw = nb.weight.sqrt();
            for j in 0..matrix.n_cols() {
                if matrix.observed(r, j) && matrix.observed(o, j) {
                    let d = matrix.value(o, j).unwrap() - matrix.value(r, j).unwrap();
                    rows.push((vec![(c(o), sw), (c(r), -sw)], -sw * d));
                }
            }
            let target = matrix.value(o, cell.col).unwrap();
            rows.push((vec![(c(o), sw), (v, -sw)], -sw * target));
        }
    }
    let sl = reg_weight.sqrt();
    for x in 0..n {
        rows.push((vec![(x, sl)], 0.0));
    }
    let mut jac = DMatrix::<f64>::zeros(rows.len(), n);
    let mut rhs = DVector::<f64>::zeros(rows.len());
    for (i, (entries, b)) in rows.iter().enumerate() {
        for &(col, val) in entries {
            jac[(i, col)] += val;
        }
        rhs[i] = *b;
    }
    let x = jac.svd(true, true).solve(&rhs, 1e-14).expect("svd solve");
    asg.cells.iter().enumerate().map(|(v, cell)| x[v] - x[c(cell.row)]).collect()
}
