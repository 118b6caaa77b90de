//! K-nearest-neighbour matrix completion with per-row offsets.
//!
//! Relative times in different rows have different zero points, so rows are not
//! directly comparable. The completer learns one offset `c_i` per row and one
//! value `a_v` per estimated cell, both in a common reference frame, by pulling
//! each row toward its K most similar rows on the peers both observed. Similarity
//! is the unbiased variance of the element-wise difference ("differential
//! variance"): rows that differ by a constant shift have variance zero.

mod problem;
mod solver;

use serde::Serialize;

use crate::obsmatrix::{CellClass, ObservationMatrix};
use crate::scalar::{self, Scalar};

pub use problem::{CompletionProblem, ResidualNorm, SolverConfig};
pub use solver::{solve, CompletedMatrix, CompletionDump, CompletionError, Optimizer, DIVERGENCE_WINDOW, MAX_HALVINGS};

/// Default number of nearest neighbours.
pub const DEFAULT_K: usize = 2;
/// Lower bound for the adaptive softmax temperature.
pub const MIN_TEMPERATURE: f64 = 1e-6;

/// Unbiased variance of `m_r[j] - m_i[j]` over columns observed in both rows;
/// `None` when fewer than two columns are shared.
pub fn differential_variance<S: Scalar>(t: &ObservationMatrix<S>, r: usize, i: usize) -> Option<S> {
    let diffs: Vec<S> = t
        .common_observed(r, i)
        .into_iter()
        .map(|j| t.row_values(r)[j] - t.row_values(i)[j])
        .collect();
    if diffs.len() < 2 {
        return None;
    }
    let n = S::from_usize(diffs.len()).expect("count fits the scalar");
    let mean = diffs.iter().copied().sum::<S>() / n;
    let ss: S = diffs.iter().map(|&d| (d - mean) * (d - mean)).sum();
    Some(ss / (n - S::one()))
}

/// Softmax temperature for neighbour weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature<S> {
    Fixed(S),
    /// Mean of the selected neighbours' variances, floored at [`MIN_TEMPERATURE`].
    MeanVariance,
}

impl<S> Default for Temperature<S> {
    fn default() -> Self {
        Temperature::MeanVariance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor<S> {
    pub row: usize,
    pub variance: S,
    pub weight: S,
}

/// Neighbours chosen for one estimated cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAssignment<S> {
    pub row: usize,
    pub col: usize,
    #[serde(skip)]
    pub class: CellClass,
    pub neighbors: Vec<Neighbor<S>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NeighborAssignment<S> {
    pub cells: Vec<CellAssignment<S>>,
}

impl<S> NeighborAssignment<S> {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Normalised `exp(-g/τ)` weights.
pub fn softmax_weights<S: Scalar>(variances: &[S], temperature: S) -> Vec<S> {
    let floor = variances.iter().copied().fold(S::infinity(), S::min);
    let raw: Vec<S> = variances.iter().map(|&g| (-(g - floor) / temperature).exp()).collect();
    let total: S = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Picks up to `k` qualifying rows with the smallest differential variance for every
/// estimable or ambiguous cell. Ties go to the lower row index. Expects
/// [`ObservationMatrix::classify_missing`] to have run.
pub fn assign_neighbors<S: Scalar>(t: &ObservationMatrix<S>, k: usize, temperature: Temperature<S>) -> NeighborAssignment<S> {
    let mut cells = Vec::new();
    for r in 0..t.n_rows() {
        for col in 0..t.n_cols() {
            let class = t.class(r, col);
            if !class.is_estimated() {
                continue;
            }
            let mut ranked: Vec<(usize, S)> = t
                .qualifying_rows(r, col)
                .into_iter()
                .filter_map(|i| differential_variance(t, r, i).map(|g| (i, g)))
                .collect();
            ranked.sort_by(|a, b| scalar::cmp(a.1, b.1).then(a.0.cmp(&b.0)));
            ranked.truncate(k.max(1));
            if ranked.is_empty() {
                continue;
            }
            let variances: Vec<S> = ranked.iter().map(|&(_, g)| g).collect();
            let tau = match temperature {
                Temperature::Fixed(tau) => tau,
                Temperature::MeanVariance => {
                    let n = S::from_usize(variances.len()).expect("count fits the scalar");
                    (variances.iter().copied().sum::<S>() / n).max(S::lit(MIN_TEMPERATURE))
                }
            };
            let weights = softmax_weights(&variances, tau);
            let neighbors = ranked
                .into_iter()
                .zip(weights)
                .map(|((row, variance), weight)| Neighbor { row, variance, weight })
                .collect();
            cells.push(CellAssignment { row: r, col, class, neighbors });
        }
    }
    NeighborAssignment { cells }
}
