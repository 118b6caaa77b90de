use serde::Serialize;
use thiserror::Error;

use super::problem::{CompletionProblem, ResidualNorm};
use super::{CellAssignment, Neighbor, NeighborAssignment};
use crate::obsmatrix::CellClass;
use crate::scalar::Scalar;

/// Consecutive loss increases that count as divergence for gradient descent.
pub const DIVERGENCE_WINDOW: usize = 10;
/// Step halvings allowed before gradient descent gives up.
pub const MAX_HALVINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Conjugate gradient with exact line search. Only valid for the quadratic
    /// objective; with [`ResidualNorm::L2`] the solver falls back to descent.
    #[default]
    ConjugateGradient,
    /// Fixed-step gradient descent with step halving on divergence.
    GradientDescent,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompletionError {
    #[error("gradient descent diverged after {halvings} step halvings (last step {step})")]
    Diverged { halvings: usize, step: f64 },
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
}

/// Solver output in the common reference frame.
#[derive(Debug, Clone)]
pub struct CompletedMatrix<S> {
    /// `t + c_row` for observed cells, `a_v` for estimated cells, `None` elsewhere.
    pub values: Vec<Vec<Option<S>>>,
    pub offsets: Vec<S>,
    pub estimates: Vec<S>,
    pub cells: Vec<CellAssignment<S>>,
    pub initial_loss: S,
    pub final_loss: S,
    pub ambiguous_count: usize,
    pub steps: usize,
}

impl<S: Scalar> CompletedMatrix<S> {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<S> {
        self.values[i][j]
    }

    /// Estimate of cell `v` in its own row's measurement frame, `a_v - c_row`.
    pub fn raw_estimate(&self, v: usize) -> S {
        self.estimates[v] - self.offsets[self.cells[v].row]
    }

    pub fn to_dump(&self) -> CompletionDump {
        let f = |x: &S| x.as_f64();
        CompletionDump {
            assignment: NeighborAssignment {
                cells: self
                    .cells
                    .iter()
                    .map(|c| CellAssignment {
                        row: c.row,
                        col: c.col,
                        class: c.class,
                        neighbors: c
                            .neighbors
                            .iter()
                            .map(|n| Neighbor { row: n.row, variance: n.variance.as_f64(), weight: n.weight.as_f64() })
                            .collect(),
                    })
                    .collect(),
            },
            estimates: self.estimates.iter().map(f).collect(),
            offsets: self.offsets.iter().map(f).collect(),
            initial_loss: self.initial_loss.as_f64(),
            final_loss: self.final_loss.as_f64(),
            ambiguous_count: self.ambiguous_count,
            steps: self.steps,
            values: self.values.iter().map(|r| r.iter().map(|v| v.map(|x| x.as_f64())).collect()).collect(),
        }
    }
}

/// JSON-friendly snapshot of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct CompletionDump {
    pub assignment: NeighborAssignment<f64>,
    pub estimates: Vec<f64>,
    pub offsets: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub ambiguous_count: usize,
    pub steps: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Minimises the loss from `A = 0, C = 0` and assembles the completed matrix.
pub fn solve<S: Scalar>(mut problem: CompletionProblem<'_, S>) -> Result<CompletedMatrix<S>, CompletionError> {
    let n_a = problem.a.len();
    let mut x = vec![S::zero(); n_a + problem.c.len()];
    let initial_loss = eval(&problem, &x);
    let steps = if problem.terms.is_empty() {
        0
    } else {
        let quadratic = problem.config.residual == ResidualNorm::SquaredL2;
        match problem.config.optimizer {
            Optimizer::ConjugateGradient if quadratic => conjugate_gradient(&problem, &mut x)?,
            _ => gradient_descent(&problem, &mut x)?,
        }
    };
    let (a, c) = x.split_at(n_a);
    problem.a = a.to_vec();
    problem.c = c.to_vec();
    let final_loss = problem.loss();
    Ok(assemble(problem, initial_loss, final_loss, steps))
}

fn eval<S: Scalar>(p: &CompletionProblem<'_, S>, x: &[S]) -> S {
    let (a, c) = x.split_at(p.a.len());
    p.loss_at(a, c)
}

fn grad<S: Scalar>(p: &CompletionProblem<'_, S>, x: &[S]) -> Vec<S> {
    let (a, c) = x.split_at(p.a.len());
    let (mut ga, gc) = p.gradient_at(a, c);
    ga.extend(gc);
    ga
}

fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

fn converged<S: Scalar>(prev: S, cur: S, tol: S) -> bool {
    let scale = prev.abs().max(S::min_positive_value());
    (prev - cur) / scale < tol
}

fn conjugate_gradient<S: Scalar>(p: &CompletionProblem<'_, S>, x: &mut [S]) -> Result<usize, CompletionError> {
    let dim = x.len();
    let tiny = S::epsilon() * S::epsilon();
    let mut loss = eval(p, x);
    let mut g = grad(p, x);
    let mut d: Vec<S> = g.iter().map(|&v| -v).collect();
    let mut probe = vec![S::zero(); dim];
    for step in 1..=p.config.max_steps {
        let gg = dot(&g, &g);
        if gg <= tiny || loss == S::zero() {
            return Ok(step - 1);
        }
        // Hessian-vector product; exact because the objective is quadratic.
        for k in 0..dim {
            probe[k] = x[k] + d[k];
        }
        let g_probe = grad(p, &probe);
        let curvature: S = d.iter().zip(g_probe.iter().zip(&g)).map(|(&dk, (&gp, &gk))| dk * (gp - gk)).sum();
        if !(curvature > S::zero()) {
            return Ok(step - 1);
        }
        let alpha = -dot(&g, &d) / curvature;
        for k in 0..dim {
            x[k] += alpha * d[k];
        }
        let next = eval(p, x);
        if !next.is_finite() {
            return Err(CompletionError::NonFinite { step });
        }
        let g_next = grad(p, x);
        let done = converged(loss, next, p.config.tolerance);
        loss = next;
        if done {
            return Ok(step);
        }
        // Polak-Ribiere with automatic restart every `dim` steps
        let beta = if step % dim == 0 {
            S::zero()
        } else {
            let num: S = g_next.iter().zip(&g).map(|(&gn, &go)| gn * (gn - go)).sum();
            (num / gg).max(S::zero())
        };
        for k in 0..dim {
            d[k] = -g_next[k] + beta * d[k];
        }
        if dot(&d, &g_next) >= S::zero() {
            d.iter_mut().zip(&g_next).for_each(|(dk, &gk)| *dk = -gk);
        }
        g = g_next;
    }
    Ok(p.config.max_steps)
}

fn gradient_descent<S: Scalar>(p: &CompletionProblem<'_, S>, x: &mut [S]) -> Result<usize, CompletionError> {
    let start = x.to_vec();
    let mut step_size = p.config.step_size;
    let mut halvings = 0;
    'restart: loop {
        x.copy_from_slice(&start);
        let mut loss = eval(p, x);
        let mut best = (loss, x.to_vec());
        let mut rising = 0;
        for step in 1..=p.config.max_steps {
            let g = grad(p, x);
            if dot(&g, &g) <= S::epsilon() * S::epsilon() {
                break;
            }
            for (xk, gk) in x.iter_mut().zip(&g) {
                *xk -= step_size * *gk;
            }
            let next = eval(p, x);
            if !next.is_finite() || next > loss {
                rising += 1;
                if rising >= DIVERGENCE_WINDOW || !next.is_finite() {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(CompletionError::Diverged { halvings: MAX_HALVINGS, step: step_size.as_f64() });
                    }
                    step_size = step_size / S::lit(2.0);
                    log::debug!("descent diverging at step {step}; step size now {step_size}");
                    continue 'restart;
                }
            } else {
                rising = 0;
            }
            let done = next <= loss && converged(loss, next, p.config.tolerance);
            loss = next;
            if loss < best.0 {
                best = (loss, x.to_vec());
            }
            if done {
                x.copy_from_slice(&best.1);
                return Ok(step);
            }
        }
        x.copy_from_slice(&best.1);
        return Ok(p.config.max_steps);
    }
}

fn assemble<S: Scalar>(p: CompletionProblem<'_, S>, initial_loss: S, final_loss: S, steps: usize) -> CompletedMatrix<S> {
    let t = p.matrix;
    let mut values: Vec<Vec<Option<S>>> = (0..t.n_rows())
        .map(|i| (0..t.n_cols()).map(|j| t.value(i, j).map(|v| v + p.c[i])).collect())
        .collect();
    for (cell, &a) in p.assignment.cells.iter().zip(&p.a) {
        values[cell.row][cell.col] = Some(a);
    }
    let ambiguous_count = p.assignment.cells.iter().filter(|c| c.class == CellClass::Ambiguous).count();
    CompletedMatrix {
        values,
        offsets: p.c,
        estimates: p.a,
        cells: p.assignment.cells,
        initial_loss,
        final_loss,
        ambiguous_count,
        steps,
    }
}
