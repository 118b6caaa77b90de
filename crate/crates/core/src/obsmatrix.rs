//! Partially observed block × peer matrix built from consecutive epoch batches.
//!
//! Rows are blocks in epoch order, columns are the union of the epochs' peer sets.
//! A cell is observed (numeric relative time), symbolically known (the peer got
//! the block from us first), or missing. Missing cells are refined by how many
//! other rows could serve as nearest neighbours for interpolating them.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::netgraph::NodeId;
use crate::scalar::Scalar;
use crate::simcore::{EpochBatch, RelTime};

/// Minimum number of commonly observed peers two rows need to be compared.
pub const MIN_COMMON_PEERS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("no epoch batches to build a matrix from")]
    NoBatches,
    #[error("matrix dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Observed,
    SymbolicallyKnown,
    /// Missing, not yet refined by [`ObservationMatrix::classify_missing`].
    Missing,
    Estimable,
    Ambiguous,
    Infeasible,
}

impl CellClass {
    pub fn is_missing(self) -> bool {
        matches!(self, CellClass::Missing | CellClass::Estimable | CellClass::Ambiguous | CellClass::Infeasible)
    }

    /// Missing cells the completer assigns a variable to.
    pub fn is_estimated(self) -> bool {
        matches!(self, CellClass::Estimable | CellClass::Ambiguous)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub observed: usize,
    pub symbolic: usize,
    pub missing: usize,
    pub estimable: usize,
    pub ambiguous: usize,
    pub infeasible: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.observed + self.symbolic + self.missing + self.estimable + self.ambiguous + self.infeasible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix<S> {
    values: Vec<Vec<S>>,
    classes: Vec<Vec<CellClass>>,
    row_epoch: Vec<usize>,
    col_peer: Vec<NodeId>,
}

impl<S: Scalar> ObservationMatrix<S> {
    /// Assembles a matrix from explicit cells; observed cells carry `Some(value)`.
    /// Unobserved entries of `values` are zero-filled.
    pub fn from_cells(
        cells: Vec<Vec<(CellClass, Option<S>)>>,
        row_epoch: Vec<usize>,
        col_peer: Vec<NodeId>,
    ) -> Self {
        let q = col_peer.len();
        assert_eq!(cells.len(), row_epoch.len(), "one epoch label per row");
        let mut values = Vec::with_capacity(cells.len());
        let mut classes = Vec::with_capacity(cells.len());
        for row in cells {
            assert_eq!(row.len(), q, "every row spans all columns");
            values.push(row.iter().map(|(c, v)| if *c == CellClass::Observed { v.unwrap_or_default() } else { S::zero() }).collect());
            classes.push(row.iter().map(|(c, _)| *c).collect());
        }
        Self { values, classes, row_epoch, col_peer }
    }

    /// Concatenates batches along the block axis; the peer axis is the union of
    /// peer sets in first-seen order.
    pub fn build(batches: &[EpochBatch<S>]) -> Result<Self, MatrixError> {
        if batches.is_empty() {
            return Err(MatrixError::NoBatches);
        }
        let mut col_peer: Vec<NodeId> = Vec::new();
        let mut col_of: HashMap<NodeId, usize> = HashMap::new();
        for b in batches {
            let mut fresh: Vec<NodeId> = b.peer_set.iter().copied().filter(|p| !col_of.contains_key(p)).collect();
            fresh.sort_unstable();
            fresh.dedup();
            for p in fresh {
                col_of.insert(p, col_peer.len());
                col_peer.push(p);
            }
        }
        let q = col_peer.len();
        let mut values = Vec::new();
        let mut classes = Vec::new();
        let mut row_epoch = Vec::new();
        for b in batches {
            for blk in &b.blocks {
                let mut vrow = vec![S::zero(); q];
                let mut crow = vec![CellClass::Missing; q];
                for r in &blk.records {
                    let j = col_of[&r.peer];
                    match r.rel_time {
                        RelTime::Measured(t) => {
                            vrow[j] = t;
                            crow[j] = CellClass::Observed;
                        }
                        RelTime::Symbolic => crow[j] = CellClass::SymbolicallyKnown,
                    }
                }
                values.push(vrow);
                classes.push(crow);
                row_epoch.push(b.epoch_id);
            }
        }
        Ok(Self { values, classes, row_epoch, col_peer })
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_peer.len()
    }

    pub fn col_peer(&self) -> &[NodeId] {
        &self.col_peer
    }

    pub fn row_epoch(&self) -> &[usize] {
        &self.row_epoch
    }

    pub fn class(&self, i: usize, j: usize) -> CellClass {
        self.classes[i][j]
    }

    /// Observation indicator.
    pub fn observed(&self, i: usize, j: usize) -> bool {
        self.classes[i][j] == CellClass::Observed
    }

    /// Observed value, or `None` for any other class.
    pub fn value(&self, i: usize, j: usize) -> Option<S> {
        self.observed(i, j).then(|| self.values[i][j])
    }

    /// Row with unobserved entries zero-filled.
    pub fn row_values(&self, i: usize) -> &[S] {
        &self.values[i]
    }

    pub fn observed_count(&self, i: usize) -> usize {
        self.classes[i].iter().filter(|&&c| c == CellClass::Observed).count()
    }

    pub fn symbolic_count(&self, i: usize) -> usize {
        self.classes[i].iter().filter(|&&c| c == CellClass::SymbolicallyKnown).count()
    }

    /// Columns observed in both rows, ascending.
    pub fn common_observed(&self, r: usize, i: usize) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.observed(r, j) && self.observed(i, j)).collect()
    }

    /// Rows that may serve as neighbours for missing cell `(r, u)`: another row that
    /// observed column `u` and shares at least two observed peers with row `r`.
    pub fn qualifying_rows(&self, r: usize, u: usize) -> Vec<usize> {
        if self.observed_count(r) < MIN_COMMON_PEERS {
            return Vec::new();
        }
        (0..self.n_rows())
            .filter(|&i| i != r && self.observed(i, u) && self.common_observed(r, i).len() >= MIN_COMMON_PEERS)
            .collect()
    }

    /// Refines every missing cell into estimable (≥ `k` qualifying rows), ambiguous
    /// (1..k) or infeasible (none, or the row has fewer than two observations).
    pub fn classify_missing(&mut self, k: usize) {
        let k = k.max(1);
        for r in 0..self.n_rows() {
            for u in 0..self.n_cols() {
                if !self.classes[r][u].is_missing() {
                    continue;
                }
                let n = self.qualifying_rows(r, u).len();
                self.classes[r][u] = match n {
                    0 => CellClass::Infeasible,
                    n if n < k => CellClass::Ambiguous,
                    _ => CellClass::Estimable,
                };
            }
        }
    }

    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for row in &self.classes {
            for class in row {
                match class {
                    CellClass::Observed => c.observed += 1,
                    CellClass::SymbolicallyKnown => c.symbolic += 1,
                    CellClass::Missing => c.missing += 1,
                    CellClass::Estimable => c.estimable += 1,
                    CellClass::Ambiguous => c.ambiguous += 1,
                    CellClass::Infeasible => c.infeasible += 1,
                }
            }
        }
        c
    }

    /// One line per row; cells are `t=<ms>`, `S`, `*` (unrefined), `E`, `A` or `X`.
    /// Header lines record the column peers and row epochs.
    pub fn render_debug(&self) -> String {
        let mut out = String::new();
        let peers: Vec<String> = self.col_peer.iter().map(|p| p.to_string()).collect();
        let epochs: Vec<String> = self.row_epoch.iter().map(|e| e.to_string()).collect();
        writeln!(out, "# peers={}", peers.join(",")).unwrap();
        writeln!(out, "# epochs={}", epochs.join(",")).unwrap();
        for i in 0..self.n_rows() {
            let cells: Vec<String> = (0..self.n_cols())
                .map(|j| match self.classes[i][j] {
                    CellClass::Observed => format!("t={}", self.values[i][j]),
                    CellClass::SymbolicallyKnown => "S".into(),
                    CellClass::Missing => "*".into(),
                    CellClass::Estimable => "E".into(),
                    CellClass::Ambiguous => "A".into(),
                    CellClass::Infeasible => "X".into(),
                })
                .collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        out
    }

    /// Reads the [`render_debug`](Self::render_debug) format. Refined missing markers
    /// come back as unrefined missing cells; headers are optional.
    pub fn parse_debug(text: &str) -> Result<Self, MatrixError> {
        let mut peers: Option<Vec<NodeId>> = None;
        let mut epochs: Option<Vec<usize>> = None;
        let mut rows: Vec<Vec<(CellClass, Option<S>)>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: String| MatrixError::Parse { line: lineno + 1, msg };
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                let list = |s: &str| -> Result<Vec<usize>, MatrixError> {
                    s.split(',').filter(|x| !x.is_empty()).map(|x| x.trim().parse().map_err(|e| err(format!("{x:?}: {e}")))).collect()
                };
                if let Some(v) = header.strip_prefix("peers=") {
                    peers = Some(list(v)?.into_iter().map(NodeId).collect());
                } else if let Some(v) = header.strip_prefix("epochs=") {
                    epochs = Some(list(v)?);
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|cell| match cell {
                    "S" => Ok((CellClass::SymbolicallyKnown, None)),
                    "*" | "E" | "A" | "X" => Ok((CellClass::Missing, None)),
                    _ => cell
                        .strip_prefix("t=")
                        .and_then(|v| v.parse::<f64>().ok())
                        .map(|v| (CellClass::Observed, Some(S::lit(v))))
                        .ok_or_else(|| err(format!("unrecognised cell {cell:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(err(format!("row has {} cells, expected {}", row.len(), first.len())));
                }
            }
            rows.push(row);
        }
        let q = rows.first().map_or(0, Vec::len);
        let peers = peers.unwrap_or_else(|| (0..q).map(NodeId).collect());
        let epochs = epochs.unwrap_or_else(|| vec![0; rows.len()]);
        if peers.len() != q || epochs.len() != rows.len() {
            return Err(MatrixError::Parse { line: 0, msg: "header sizes disagree with the cell grid".into() });
        }
        Ok(Self::from_cells(rows, epochs, peers))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::simcore::{BlockRecords, DeliveryRecord};

    /// Table-style two-epoch fixture: peers n1..n4 are NodeIds 1..4; epoch 0 is
    /// connected to {1,2,4}, epoch 1 to {1,2,3}. `None` marks a symbolic record.
    pub fn two_epoch_batches() -> Vec<EpochBatch<f64>> {
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
}
