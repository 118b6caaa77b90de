//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{assignment, brute_force_distances, least_squares_raw, shifted_instance, table_batches};
use goldfish::completer::{solve, CompletionProblem, ResidualNorm, SolverConfig};
use goldfish::harness::{self, ExperimentConfig, PubDist};
use goldfish::netgraph::{generate_random_graph, shortest_paths, EdgeFilter, EdgeRole, LatencyKind};
use goldfish::obsmatrix::{ClassCounts, ObservationMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RECOVERY_TOL_MS: f64 = 1e-2;
const RECOVERY_REG: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const MIN_RETAINED: f64 = 0.80;
const MIN_NEAR: f64 = 0.50;
const MAX_RATIO: f64 = 0.95;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > budget {
        o.pass = false;
    }
    o.detail = format!("{}; {:.1}s of {}s", o.detail, took.as_secs_f64(), budget.as_secs());
    o
}

fn table_counts() -> Outcome {
    let mut t = ObservationMatrix::build(&table_batches()).unwrap();
    t.classify_missing(2);
    let c = t.counts();
    let want = ClassCounts { observed: 19, symbolic: 5, missing: 0, estimable: 5, ambiguous: 0, infeasible: 3 };
    Outcome { pass: c == want, detail: format!("{c:?}") }
}

fn exact_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_truth, mut worst_oracle, mut max_steps, mut cells) = (0.0f64, 0.0f64, 0, 0);
    for _ in 0..50 {
        let p = rng.gen_range(4..=20);
        let q = rng.gen_range(3..=8);
        let inst = shifted_instance(&mut rng, p, q, 0.3, 2);
        let asg = assignment(&inst.matrix, 2);
        let oracle = least_squares_raw(&inst.matrix, &asg, RECOVERY_REG);
        let cfg = SolverConfig { reg_weight: RECOVERY_REG, max_steps: 2000, ..SolverConfig::default() };
        let done = solve(CompletionProblem::new(&inst.matrix, asg, cfg)).unwrap();
        max_steps = max_steps.max(done.steps);
        for (v, cell) in done.cells.iter().enumerate() {
            let raw = done.raw_estimate(v);
            worst_truth = worst_truth.max((raw - inst.truth[cell.row][cell.col]).abs());
            worst_oracle = worst_oracle.max((raw - oracle[v]).abs());
            cells += 1;
        }
    }
    Outcome {
        pass: worst_truth < RECOVERY_TOL_MS && worst_oracle < RECOVERY_TOL_MS && max_steps <= 2000,
        detail: format!("{cells} cells, max error {worst_truth:.2e} vs truth, {worst_oracle:.2e} vs oracle, {max_steps} steps"),
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = rng.gen_range(4..=15);
        let q = rng.gen_range(3..=8);
        let inst = shifted_instance(&mut rng, p, q, 0.3, 2);
        let asg = assignment(&inst.matrix, 2);
        let cfg = SolverConfig { reg_weight: 1e-2, residual: ResidualNorm::SquaredL2, ..SolverConfig::default() };
        let problem = CompletionProblem::new(&inst.matrix, asg, cfg);
        let a: Vec<f64> = (0..problem.n_cells()).map(|_| rng.gen_range(-200.0..200.0)).collect();
        let c: Vec<f64> = (0..p).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let (ga, gc) = problem.gradient_at(&a, &c);
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in 0..a.len() {
            let (mut up, mut down) = (a.clone(), a.clone());
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            let fd = (problem.loss_at(&up, &c) - problem.loss_at(&down, &c)) / (2.0 * FD_STEP);
            diff += (fd - ga[i]).powi(2);
            norm += ga[i] * ga[i];
        }
        for i in 0..c.len() {
            let (mut up, mut down) = (c.clone(), c.clone());
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            let fd = (problem.loss_at(&a, &up) - problem.loss_at(&a, &down)) / (2.0 * FD_STEP);
            diff += (fd - gc[i]).powi(2);
            norm += gc[i] * gc[i];
        }
        worst = worst.max(diff.sqrt() / norm.sqrt().max(1.0));
    }
    Outcome { pass: worst <= FD_REL_TOL, detail: format!("worst relative error {worst:.2e}") }
}

fn dijkstra_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..30 {
        let n = rng.gen_range(3..=10);
        let max_out = rng.gen_range(1..=(n - 1).min(3));
        let mut g = generate_random_graph(n, max_out, max_out + 2, &LatencyKind::Planar2d { plane_size: 500.0 }, 20.0, rng.gen()).unwrap();
        for u in g.nodes().collect::<Vec<_>>() {
            for v in g.peers_with_role(u, EdgeRole::Exploit) {
                if rng.gen_bool(0.3) {
                    g.set_role(u, v, EdgeRole::Explore);
                }
            }
        }
        for filter in [EdgeFilter::All, EdgeFilter::ExploitOnly] {
            for src in g.nodes() {
                mismatches += (shortest_paths(&g, src, filter) != brute_force_distances(&g, src, filter)) as usize;
            }
        }
    }
    Outcome { pass: mismatches == 0, detail: format!("{mismatches} mismatching sources") }
}

fn optimal_config() -> ExperimentConfig {
    ExperimentConfig { n_nodes: 100, n_publishers: 3, pub_dist: PubDist::Fixed, n_adapters: 1, epochs: 300, seeds: vec![0], ..Default::default() }
}

fn comparison_config() -> ExperimentConfig {
    ExperimentConfig { n_nodes: 100, pub_dist: PubDist::Exp, n_adapters: 32, epochs: 100, seeds: (1..=10).collect(), ..Default::default() }
}

fn optimal_summary() -> (harness::OptimalReport, Vec<u8>) {
    let report = harness::run_global_optimal_study(&optimal_config(), 30, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    harness::write_optimal(&report, dir.path()).unwrap();
    let bytes = fs::read(dir.path().join("summary.json")).unwrap();
    (report, bytes)
}

fn comparison_summary() -> (harness::ComparisonReport, Vec<u8>) {
    let report = harness::run_comparison_study(&comparison_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    harness::write_comparison(&report, dir.path()).unwrap();
    let bytes = fs::read(dir.path().join("summary.json")).unwrap();
    (report, bytes)
}

fn main() -> ExitCode {
    harness::init_threads();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 matrix classification of the two-epoch example", timed(Duration::from_secs(1), table_counts)));
    results.push(("2 exact recovery of shifted rows", timed(Duration::from_secs(30), exact_recovery)));
    results.push(("3 analytic gradient vs central differences", timed(Duration::from_secs(10), gradient_check)));
    results.push(("4 Dijkstra vs exhaustive simple paths", timed(Duration::from_secs(10), dijkstra_oracle)));

    let mut optimal_bytes = Vec::new();
    let c5 = timed(Duration::from_secs(30 * 60), || {
        let (r, bytes) = optimal_summary();
        optimal_bytes = bytes;
        Outcome {
            pass: r.retained_fraction >= MIN_RETAINED && r.near_fraction >= MIN_NEAR,
            detail: format!(
                "retained {:.1}% (need {:.0}%), near {:.1}% (need {:.0}%)",
                100.0 * r.retained_fraction,
                100.0 * MIN_RETAINED,
                100.0 * r.near_fraction,
                100.0 * MIN_NEAR
            ),
        }
    });
    results.push(("5 global-optimal study", c5));

    let mut comparison_bytes = Vec::new();
    let c6 = timed(Duration::from_secs(60 * 60), || {
        let (r, bytes) = comparison_summary();
        comparison_bytes = bytes;
        let ratio = r.final_ratio.unwrap_or(f64::INFINITY);
        let (first, last) = (r.left_epoch0_mean.unwrap_or(f64::NAN), r.left_final_mean.unwrap_or(f64::NAN));
        Outcome {
            pass: r.paired && ratio < MAX_RATIO && last < first,
            detail: format!(
                "ratio {ratio} (need < {MAX_RATIO}), goldfish {first} -> {last} ms, perigee {} ms, paired {}",
                r.right_final_mean.unwrap_or(f64::NAN),
                r.paired
            ),
        }
    });
    results.push(("6 comparison against the baseline", c6));

    let c7 = timed(Duration::from_secs(90 * 60), || {
        let same_optimal = optimal_summary().1 == optimal_bytes;
        let same_comparison = comparison_summary().1 == comparison_bytes;
        Outcome {
            pass: same_optimal && same_comparison,
            detail: format!("optimal summary identical: {same_optimal}, comparison summary identical: {same_comparison}"),
        }
    });
    results.push(("7 determinism of reruns", c7));

    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
