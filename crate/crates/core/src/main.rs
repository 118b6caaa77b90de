use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use goldfish::completer::{assign_neighbors, solve, CompletionProblem, SolverConfig, Temperature};
use goldfish::harness::{self, ExperimentConfig, PubDist, Residual, Topology};
use goldfish::obsmatrix::ObservationMatrix;
use goldfish::perigee::Aggregate;

#[derive(Parser)]
#[command(name = "goldfish", version, about = "P2P broadcast simulator with adaptive peer selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single adapter, few equally likely publishers: how fast is the direct-connection optimum found?
    Optimal(OptimalArgs),
    /// Goldfish against Perigee on paired scenarios.
    Compare(CompareArgs),
    /// Complete a dumped observation matrix and print the result as JSON.
    Complete(CompleteArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 40)]
    rounds: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    reg_weight: f64,
    #[arg(long, value_enum, default_value = "squared")]
    residual_norm: NormArg,
    #[arg(long, default_value_t = 500.0)]
    plane_size: f64,
    #[arg(long, default_value_t = 20.0)]
    node_delay: f64,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long, default_value_t = 2)]
    cadence: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimalArgs {
    #[arg(long, default_value_t = 30)]
    graphs: usize,
    #[arg(long, default_value_t = 3)]
    publishers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum, default_value = "random2d")]
    topology: TopologyArg,
    #[arg(long)]
    latency_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exp")]
    pub_dist: DistArg,
    #[arg(long, default_value_t = 100)]
    publishers: usize,
    #[arg(long, default_value_t = 32)]
    adapters: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "p90")]
    perigee_aggregate: AggregateArg,
    /// Also write every completion as JSON lines.
    #[arg(long)]
    dump_completions: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    matrix_file: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    reg_weight: f64,
    #[arg(long, value_enum, default_value = "squared")]
    residual_norm: NormArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TopologyArg {
    Random2d,
    Measured,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DistArg {
    Exp,
    Unif,
    Fixed,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum NormArg {
    Squared,
    L2,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AggregateArg {
    Sum,
    P90,
}

impl From<NormArg> for Residual {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Squared => Residual::Squared,
            NormArg::L2 => Residual::L2,
        }
    }
}

fn base_config(c: &Common, default_epochs: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_nodes: c.nodes,
        epochs: c.epochs.unwrap_or(default_epochs),
        rounds_per_epoch: c.rounds,
        k: c.k,
        max_steps: c.max_steps,
        reg_weight: c.reg_weight,
        residual: c.residual_norm.into(),
        plane_size: c.plane_size,
        node_delay_ms: c.node_delay,
        window: c.window,
        cadence: c.cadence,
        ..ExperimentConfig::default()
    }
}

fn optimal(args: OptimalArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        n_publishers: args.publishers,
        pub_dist: PubDist::Fixed,
        n_adapters: 1,
        seeds: vec![args.seed],
        ..base_config(&args.common, 300)
    };
    let report = harness::run_global_optimal_study(&cfg, args.graphs, args.seed)?;
    harness::write_optimal(&report, &args.common.out)?;
    println!(
        "{} graphs: {:.1}% hold the optimum from epoch {}, {:.1}% stay near it from epoch {}",
        report.n_graphs,
        100.0 * report.retained_fraction,
        harness::RETAIN_EPOCH,
        100.0 * report.near_fraction,
        harness::NEAR_EPOCH
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let cfg = ExperimentConfig {
        topology: match args.topology {
            TopologyArg::Random2d => Topology::Random2d,
            TopologyArg::Measured => Topology::Measured,
        },
        latency_file: args.latency_file,
        n_publishers: args.publishers,
        pub_dist: match args.pub_dist {
            DistArg::Exp => PubDist::Exp,
            DistArg::Unif => PubDist::Unif,
            DistArg::Fixed => PubDist::Fixed,
        },
        n_adapters: args.adapters,
        seeds: args.seeds,
        perigee_aggregate: match args.perigee_aggregate {
            AggregateArg::Sum => Aggregate::Sum,
            AggregateArg::P90 => Aggregate::P90,
        },
        dump_completions: args.dump_completions,
        ..base_config(&args.common, 100)
    };
    let report = harness::run_comparison_study(&cfg)?;
    harness::write_comparison(&report, &args.common.out)?;
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v}"));
    println!(
        "final epoch mean wasted latency: goldfish {} ms, perigee {} ms, ratio {}",
        show(report.left_final_mean),
        show(report.right_final_mean),
        show(report.final_ratio)
    );
    Ok(())
}

fn complete(args: CompleteArgs) -> Result<()> {
    let text = fs::read_to_string(&args.matrix_file).with_context(|| format!("reading {}", args.matrix_file.display()))?;
    let mut t = ObservationMatrix::<f64>::parse_debug(&text)?;
    t.classify_missing(args.k);
    let assignment = assign_neighbors(&t, args.k, Temperature::MeanVariance);
    let config = SolverConfig {
        reg_weight: args.reg_weight,
        max_steps: args.max_steps,
        residual: Residual::from(args.residual_norm).into(),
        ..SolverConfig::default()
    };
    let completed = solve(CompletionProblem::new(&t, assignment, config))?;
    println!("{}", serde_json::to_string_pretty(&completed.to_dump())?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    harness::init_threads();
    match Cli::parse().command {
        Command::Optimal(a) => optimal(a),
        Command::Compare(a) => compare(a),
        Command::Complete(a) => complete(a),
    }
}
