use std::path::PathBuf;
use std::process::ExitCode;

use backflow_core::controller::Algorithm;
use backflow_sim::dump::{run_with_rules, write_dump};
use backflow_sim::plan::{load_plan, ExperimentPlan, Preset, SweepKind, TopologySource};
use backflow_sim::runner::run_plan;
use backflow_sim::scenario::{Distribution, RunSpec};
use backflow_sim::{fixtures, Result, SimError};
use clap::{Parser, Subcommand};

/// Backpressure inter-domain traffic-engineering simulator.
///
/// Without a subcommand, runs the plan given by --plan, or every sweep of
/// the preset (one subdirectory per sweep) when no plan is given.
#[derive(Parser, Debug)]
#[command(name = "backflow", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment plan (TOML).
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Parallel simulation workers.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Defaults for anything the plan leaves unspecified.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the built-in topologies as text files.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run once and write the final rules and the forwarding walks they induce.
    Dump {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "fbpr+nhops")]
        algorithm: String,
        /// Built-in fixture name or topology directory.
        #[arg(long, default_value = "europe25")]
        topology: String,
        /// Mean router load, bytes per second.
        #[arg(long)]
        load: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `linear` or `skewed:<asn>`.
        #[arg(long, default_value = "linear")]
        distribution: String,
        /// Prefixes per AS; 0 routes whole ASes.
        #[arg(long, default_value_t = 0)]
        prefixes: usize,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run_suite(args: &RunArgs) -> Result<bool> {
    let plans: Vec<(ExperimentPlan, PathBuf)> = match &args.plan {
        Some(p) => vec![(load_plan(p, args.preset)?, args.out.clone())],
        None => SweepKind::ALL.iter().map(|&s| (args.preset.plan(s), args.out.join(s.name()))).collect(),
    };
    for (plan, _) in &plans {
        plan.validate()?;
    }
    let mut clean = true;
    for (plan, out) in &plans {
        let summary = run_plan(plan, out, args.workers)?;
        for f in &summary.failures {
            eprintln!("run {} failed: {}", f.run_id, f.error);
        }
        clean &= summary.failures.is_empty();
        println!("{}: {} runs, {} failed -> {}", plan.name, summary.runs, summary.failures.len(), out.display());
    }
    Ok(clean)
}

fn run_dump(cmd: &Command) -> Result<()> {
    let Command::Dump { out, algorithm, topology, load, seed, distribution, prefixes, preset } = cmd else {
        unreachable!()
    };
    let alg: Algorithm = algorithm.parse().map_err(|_| SimError::UnknownAlgorithm(algorithm.clone()))?;
    let mut spec: RunSpec = preset.base_spec();
    spec.algorithm = alg;
    spec.seed = *seed;
    spec.n_prefixes = *prefixes;
    spec.distribution = Distribution::parse(distribution)?;
    if let Some(l) = load {
        spec.load = *l;
    }
    let base = TopologySource::parse(topology, None).load()?;
    let run = run_with_rules(&base, &spec)?;
    write_dump(out, &run)?;
    println!("{} rules in force at the end of the run -> {}", run.report.final_rules.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        None => run_suite(&cli.run),
        Some(Command::Fixtures { out }) => fixtures::write_builtin(out).map(|_| true),
        Some(cmd @ Command::Dump { .. }) => run_dump(cmd).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
