//! `nanocarrier`: grow tumours, cut scenarios, simulate treatments and
//! optimise nanoparticle designs.

mod commands;
mod config;
mod solution;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use nanocarrier::NanoparticleDesign;

use commands::{RunContext, ScenarioSource, WorstCase};
use config::{BackendKind, PipelineConfig};

const DEFAULT_OUT: &str = "results";

#[derive(Parser)]
#[command(name = "nanocarrier", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Drawn at random and printed when neither this nor
    /// `master_seed` is given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for simulations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, one chain per line.
    #[arg(long, conflicts_with = "worst_case")]
    scenarios: Option<PathBuf>,
    /// Built-in worst-case chain.
    #[arg(long, value_enum)]
    worst_case: Option<WorstCase>,
}

impl From<ScenarioArgs> for ScenarioSource {
    fn from(a: ScenarioArgs) -> Self {
        Self {
            file: a.scenarios,
            worst_case: a.worst_case,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Grow a tumour and write its snapshot.
    Grow {
        /// Live cells to grow to; overrides `tumour.target_cell_count`.
        #[arg(long)]
        target: Option<usize>,
        /// Also write the oxygen field.
        #[arg(long)]
        oxygen: bool,
    },
    /// Cut 1-D scenarios out of a snapshot, or emit a worst case.
    Sample {
        #[arg(long, conflicts_with = "worst_case", required_unless_present = "worst_case")]
        snapshot: Option<PathBuf>,
        #[arg(long, value_enum)]
        worst_case: Option<WorstCase>,
        /// Number of scenarios; overrides `scenario.n`.
        #[arg(long)]
        n: Option<usize>,
        /// Chain depth in cells or `auto`; overrides `scenario.depth`.
        #[arg(long, value_parser = parse_depth)]
        depth: Option<Option<usize>>,
    },
    /// Simulate designs on scenarios and report kills.
    Simulate {
        #[command(flatten)]
        scenarios: ScenarioArgs,
        /// `D,k_a,NP0,E`; repeat for a second species. Defaults to the
        /// reference design for the chosen worst case.
        #[arg(long, value_parser = parse_design)]
        design: Vec<NanoparticleDesign>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        /// Runs per scenario.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Write a trajectory CSV per run.
        #[arg(long)]
        trajectory: bool,
    },
    /// Search for the best design and write a result bundle.
    Optimize {
        /// Replace the tissue fitness with a convex test objective.
        #[arg(long)]
        mock: bool,
    },
    /// Re-evaluate a solution on a scenario set.
    Evaluate {
        /// `best.toml` from an optimisation bundle.
        #[arg(long, conflicts_with = "design")]
        solution: Option<PathBuf>,
        #[arg(long, value_parser = parse_design)]
        design: Vec<NanoparticleDesign>,
        #[command(flatten)]
        scenarios: ScenarioArgs,
        /// Runs per scenario.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
    },
}

fn parse_depth(s: &str) -> Result<Option<usize>, String> {
    if s == "auto" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(d) if d > 0 => Ok(Some(d)),
        _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
    }
}

fn parse_design(s: &str) -> Result<NanoparticleDesign, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [d, ka, np0, e] = v[..] else {
        return Err(format!("expected D,k_a,NP0,E, got {} values", v.len()));
    };
    NanoparticleDesign::new(d, ka, np0, e).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let config = PipelineConfig::load(cli.common.config.as_deref())?;
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(anyhow!("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let seed = cli.common.seed.or(config.master_seed).unwrap_or_else(rand::random);
    println!("seed {seed}");
    let out = cli
        .common
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = RunContext { config, seed, out };
    match cli.command {
        Command::Grow { target, oxygen } => commands::grow(ctx, target, oxygen),
        Command::Sample {
            snapshot,
            worst_case,
            n,
            depth,
        } => commands::sample(ctx, snapshot, worst_case, n, depth),
        Command::Simulate {
            scenarios,
            design,
            backend,
            replicates,
            trajectory,
        } => commands::simulate_cmd(ctx, scenarios.into(), design, backend, replicates, trajectory),
        Command::Optimize { mock } => commands::optimize(ctx, mock),
        Command::Evaluate {
            solution,
            design,
            scenarios,
            seeds,
        } => commands::evaluate(ctx, solution, design, scenarios.into(), seeds),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
