use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GraphError, NodeId};
use crate::scalar::Scalar;

/// Where one-way propagation delays come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation<S> {
    /// Nodes on a square plane; one coordinate unit is one millisecond of propagation.
    Planar { positions: Vec<(S, S)>, plane_size: S },
    /// Explicit N×N propagation matrix in milliseconds.
    Measured { matrix: Vec<Vec<S>> },
}

/// Per-edge delay model: a fixed per-hop node delay plus propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel<S> {
    propagation: Propagation<S>,
    node_delay_ms: S,
}

impl<S: Scalar> LatencyModel<S> {
    pub fn planar(positions: Vec<(S, S)>, plane_size: S, node_delay_ms: S) -> Result<Self, GraphError> {
        check_node_delay(node_delay_ms)?;
        if !(plane_size > S::zero()) {
            return Err(GraphError::InvalidLatency(format!("plane size {plane_size} must be positive")));
        }
        for (i, &(x, y)) in positions.iter().enumerate() {
            let inside = |c: S| c >= S::zero() && c <= plane_size;
            if !inside(x) || !inside(y) {
                return Err(GraphError::InvalidLatency(format!(
                    "node {i} at ({x}, {y}) lies outside [0, {plane_size}]^2"
                )));
            }
        }
        Ok(Self { propagation: Propagation::Planar { positions, plane_size }, node_delay_ms })
    }

    pub fn measured(matrix: Vec<Vec<S>>, node_delay_ms: S) -> Result<Self, GraphError> {
        check_node_delay(node_delay_ms)?;
        validate_matrix(&matrix)?;
        Ok(Self { propagation: Propagation::Measured { matrix }, node_delay_ms })
    }

    pub fn propagation(&self) -> &Propagation<S> {
        &self.propagation
    }

    pub fn node_delay_ms(&self) -> S {
        self.node_delay_ms
    }

    pub fn n_nodes(&self) -> usize {
        match &self.propagation {
            Propagation::Planar { positions, .. } => positions.len(),
            Propagation::Measured { matrix } => matrix.len(),
        }
    }

    pub fn propagation_ms(&self, u: NodeId, v: NodeId) -> S {
        match &self.propagation {
            Propagation::Planar { positions, .. } => {
                let (ux, uy) = positions[u.index()];
                let (vx, vy) = positions[v.index()];
                (ux - vx).hypot(uy - vy)
            }
            Propagation::Measured { matrix } => matrix[u.index()][v.index()],
        }
    }

    /// Delay of one hop from `u` to `v`: node delay plus propagation.
    pub fn edge_delay(&self, u: NodeId, v: NodeId) -> S {
        self.node_delay_ms + self.propagation_ms(u, v)
    }
}

fn check_node_delay<S: Scalar>(d: S) -> Result<(), GraphError> {
    if d >= S::zero() && d.is_finite() {
        Ok(())
    } else {
        Err(GraphError::InvalidLatency(format!("node delay {d} must be finite and >= 0")))
    }
}

fn validate_matrix<S: Scalar>(matrix: &[Vec<S>]) -> Result<(), GraphError> {
    let n = matrix.len();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(GraphError::InvalidLatency(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !(x >= S::zero()) || !x.is_finite() {
                return Err(GraphError::InvalidLatency(format!("entry ({i},{j}) = {x} is not a finite non-negative delay")));
            }
            if i == j && x != S::zero() {
                return Err(GraphError::InvalidLatency(format!("diagonal entry ({i},{i}) = {x} must be 0")));
            }
        }
    }
    Ok(())
}

/// Parses a measured-latency CSV: a `# nodes=<N>` header followed by N rows of N
/// comma-separated delays in milliseconds. Asymmetric pairs are averaged.
pub fn parse_latency_csv<S: Scalar>(text: &str) -> Result<Vec<Vec<S>>, GraphError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| GraphError::LatencyFile("empty file".into()))?;
    let n: usize = header
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix("nodes="))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| GraphError::LatencyFile(format!("bad header {header:?}, expected `# nodes=<N>`")))?;

    let mut matrix = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map(S::lit)
                    .map_err(|e| GraphError::LatencyFile(format!("row {i}: cannot parse {cell:?}: {e}")))
            })
            .collect::<Result<Vec<S>, _>>()?;
        matrix.push(row);
    }
    if matrix.len() != n {
        return Err(GraphError::LatencyFile(format!("header announces {n} rows, found {}", matrix.len())));
    }
    validate_matrix(&matrix)?;

    let two = S::lit(2.0);
    let mut asymmetric = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix[i][j] != matrix[j][i] {
                asymmetric += 1;
                let mean = (matrix[i][j] + matrix[j][i]) / two;
                matrix[i][j] = mean;
                matrix[j][i] = mean;
            }
        }
    }
    if asymmetric > 0 {
        log::warn!("latency matrix had {asymmetric} asymmetric pairs; averaged");
    }
    Ok(matrix)
}

pub fn load_latency_csv<S: Scalar>(path: &Path) -> Result<Vec<Vec<S>>, GraphError> {
    let text = fs::read_to_string(path)
        .map_err(|e| GraphError::LatencyFile(format!("{}: {e}", path.display())))?;
    parse_latency_csv(&text)
}

/// Picks `n` cities out of a larger measured matrix with a seeded permutation and
/// returns the induced sub-matrix.
pub fn sample_cities<S: Scalar, R: Rng + ?Sized>(
    matrix: &[Vec<S>],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<S>>, GraphError> {
    if n > matrix.len() {
        return Err(GraphError::InvalidLatency(format!(
            "cannot sample {n} cities from a {}-city matrix",
            matrix.len()
        )));
    }
    let mut rows: Vec<usize> = (0..matrix.len()).collect();
    rows.shuffle(rng);
    rows.truncate(n);
    Ok(rows.iter().map(|&i| rows.iter().map(|&j| matrix[i][j]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(points: &[(f64, f64)]) -> LatencyModel<f64> {
        LatencyModel::planar(points.to_vec(), 500.0, 20.0).unwrap()
    }

    #[test]
    fn planar_three_four_five() {
        let m = planar(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(m.edge_delay(NodeId(0), NodeId(1)), 25.0);
    }

    #[test]
    fn co_located_nodes_pay_only_node_delay() {
        let m = planar(&[(0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(m.edge_delay(NodeId(0), NodeId(1)), 20.0);
    }

    #[test]
    fn measured_entry_plus_node_delay() {
        let m = LatencyModel::measured(vec![vec![0.0, 37.0], vec![37.0, 0.0]], 20.0).unwrap();
        assert_eq!(m.edge_delay(NodeId(0), NodeId(1)), 57.0);
    }

    #[test]
    fn rejects_out_of_plane_and_bad_matrix() {
        assert!(LatencyModel::planar(vec![(501.0, 0.0)], 500.0, 20.0).is_err());
        assert!(LatencyModel::<f64>::measured(vec![vec![1.0]], 20.0).is_err());
        assert!(LatencyModel::<f64>::measured(vec![vec![0.0, -1.0], vec![1.0, 0.0]], 20.0).is_err());
        assert!(LatencyModel::<f64>::measured(vec![vec![0.0, 1.0]], 20.0).is_err());
        assert!(LatencyModel::planar(vec![(0.0, 0.0)], 500.0, -1.0).is_err());
    }

    #[test]
    fn csv_parses_and_averages_asymmetry() {
        let text = "# nodes=3\n0,10,20\n12,0,5\n20,5,0\n";
        let m: Vec<Vec<f64>> = parse_latency_csv(text).unwrap();
        assert_eq!(m[0][1], 11.0);
        assert_eq!(m[1][0], 11.0);
        assert_eq!(m[1][2], 5.0);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(parse_latency_csv::<f64>("").is_err());
        assert!(parse_latency_csv::<f64>("nodes=2\n0,1\n1,0").is_err());
        assert!(parse_latency_csv::<f64>("# nodes=3\n0,1\n1,0").is_err());
        assert!(parse_latency_csv::<f64>("# nodes=2\n0,x\n1,0").is_err());
        assert!(parse_latency_csv::<f64>("# nodes=2\n1,1\n1,0").is_err());
    }

    #[test]
    fn sampled_cities_keep_pairwise_delays() {
        use rand::SeedableRng;
        let full: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..6).map(|j| (i as f64 - j as f64).abs() * 10.0).collect())
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sub = sample_cities(&full, 4, &mut rng).unwrap();
        assert_eq!(sub.len(), 4);
        for (i, row) in sub.iter().enumerate() {
            assert_eq!(row[i], 0.0);
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, sub[j][i]);
            }
        }
        assert!(sample_cities(&full, 7, &mut rng).is_err());
    }
}
