use super::NeighborAssignment;
use crate::obsmatrix::ObservationMatrix;
use crate::scalar::Scalar;

/// Norm applied to each masked residual vector and to the regularisers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualNorm {
    /// Squared Euclidean norm; makes the objective quadratic.
    #[default]
    SquaredL2,
    /// Plain Euclidean norm; the subgradient at zero is taken as zero.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<S> {
    pub reg_weight: S,
    pub max_steps: usize,
    /// Initial step for plain gradient descent.
    pub step_size: S,
    /// Stop once the relative loss improvement of a step falls below this.
    pub tolerance: S,
    pub residual: ResidualNorm,
    pub optimizer: super::Optimizer,
}

impl<S: Scalar> Default for SolverConfig<S> {
    fn default() -> Self {
        Self {
            reg_weight: S::lit(1e-4),
            max_steps: 2000,
            step_size: S::lit(0.05),
            tolerance: S::lit(1e-8),
            residual: ResidualNorm::SquaredL2,
            optimizer: super::Optimizer::ConjugateGradient,
        }
    }
}

/// One `(cell, neighbour row)` pair of the objective, with observed data pre-gathered.
#[derive(Debug, Clone)]
pub(crate) struct Term<S> {
    pub cell: usize,
    pub row: usize,
    pub nbr: usize,
    pub weight: S,
    /// `T[nbr][j] - T[row][j]` over the commonly observed columns.
    pub diffs: Vec<S>,
    /// `T[nbr][col(cell)]`, observed by construction.
    pub target: S,
}

/// Objective over missing-cell estimates `a` and per-row offsets `c`:
///
/// `Σ_v Σ_{o∈N(v)} w(v,o)·‖r_{v,o}‖² + λ(‖a‖² + ‖c‖²)` where `r_{v,o}` has one
/// entry `T[o][j] + c_o − T[r][j] − c_r` per column `j` observed in both rows and
/// one entry `T[o][col] + c_o − a_v` for the estimated column.
#[derive(Debug, Clone)]
pub struct CompletionProblem<'m, S> {
    pub(crate) matrix: &'m ObservationMatrix<S>,
    pub(crate) assignment: NeighborAssignment<S>,
    pub(crate) terms: Vec<Term<S>>,
    pub a: Vec<S>,
    pub c: Vec<S>,
    pub config: SolverConfig<S>,
}

impl<'m, S: Scalar> CompletionProblem<'m, S> {
    /// Problem with all variables at zero.
    pub fn new(matrix: &'m ObservationMatrix<S>, assignment: NeighborAssignment<S>, config: SolverConfig<S>) -> Self {
        let mut terms = Vec::new();
        for (v, cell) in assignment.cells.iter().enumerate() {
            for n in &cell.neighbors {
                let (r, o) = (cell.row, n.row);
                let diffs = matrix
                    .common_observed(r, o)
                    .into_iter()
                    .map(|j| matrix.row_values(o)[j] - matrix.row_values(r)[j])
                    .collect();
                terms.push(Term { cell: v, row: r, nbr: o, weight: n.weight, diffs, target: matrix.row_values(o)[cell.col] });
            }
        }
        Self {
            a: vec![S::zero(); assignment.cells.len()],
            c: vec![S::zero(); matrix.n_rows()],
            matrix,
            assignment,
            terms,
            config,
        }
    }

    pub fn matrix(&self) -> &ObservationMatrix<S> {
        self.matrix
    }

    pub fn assignment(&self) -> &NeighborAssignment<S> {
        &self.assignment
    }

    /// Number of estimated cells.
    pub fn n_cells(&self) -> usize {
        self.a.len()
    }

    pub fn loss(&self) -> S {
        self.loss_at(&self.a, &self.c)
    }

    pub fn gradient(&self) -> (Vec<S>, Vec<S>) {
        self.gradient_at(&self.a, &self.c)
    }

    pub fn loss_at(&self, a: &[S], c: &[S]) -> S {
        let norm = self.config.residual;
        let mut total = S::zero();
        for t in &self.terms {
            let shift = c[t.nbr] - c[t.row];
            let mut ss: S = t.diffs.iter().map(|&d| (d + shift) * (d + shift)).sum();
            let last = t.target + c[t.nbr] - a[t.cell];
            ss += last * last;
            total += t.weight * apply_norm(norm, ss);
        }
        let reg_a: S = a.iter().map(|&x| x * x).sum();
        let reg_c: S = c.iter().map(|&x| x * x).sum();
        total + self.config.reg_weight * (apply_norm(norm, reg_a) + apply_norm(norm, reg_c))
    }

    /// Exact gradient of [`loss_at`](Self::loss_at) with respect to `(a, c)`.
    pub fn gradient_at(&self, a: &[S], c: &[S]) -> (Vec<S>, Vec<S>) {
        let norm = self.config.residual;
        let two = S::lit(2.0);
        let mut ga = vec![S::zero(); a.len()];
        let mut gc = vec![S::zero(); c.len()];
        for t in &self.terms {
            let shift = c[t.nbr] - c[t.row];
            let last = t.target + c[t.nbr] - a[t.cell];
            let common_sum: S = t.diffs.iter().map(|&d| d + shift).sum();
            // d(loss)/d(residual) = scale * residual
            let scale = match norm {
                ResidualNorm::SquaredL2 => two * t.weight,
                ResidualNorm::L2 => {
                    let ss: S = t.diffs.iter().map(|&d| (d + shift) * (d + shift)).sum::<S>() + last * last;
                    if ss > S::zero() {
                        t.weight / ss.sqrt()
                    } else {
                        S::zero()
                    }
                }
            };
            gc[t.nbr] += scale * (common_sum + last);
            gc[t.row] -= scale * common_sum;
            ga[t.cell] -= scale * last;
        }
        let lambda = self.config.reg_weight;
        let reg_scale = |v: &[S]| match norm {
            ResidualNorm::SquaredL2 => two * lambda,
            ResidualNorm::L2 => {
                let n = v.iter().map(|&x| x * x).sum::<S>().sqrt();
                if n > S::zero() {
                    lambda / n
                } else {
                    S::zero()
                }
            }
        };
        let (sa, sc) = (reg_scale(a), reg_scale(c));
        for (g, &x) in ga.iter_mut().zip(a) {
            *g += sa * x;
        }
        for (g, &x) in gc.iter_mut().zip(c) {
            *g += sc * x;
        }
        (ga, gc)
    }
}

fn apply_norm<S: Scalar>(norm: ResidualNorm, sum_of_squares: S) -> S {
    match norm {
        ResidualNorm::SquaredL2 => sum_of_squares,
        ResidualNorm::L2 => sum_of_squares.sqrt(),
    }
}
