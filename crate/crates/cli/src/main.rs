//! `pathoed`: sample, optimize, brute-force, and gradient-check path policies
//! on a navigation mesh.

mod bruteforce;
mod failure;
mod gradcheck;
mod optimize;
mod sample;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pathoed_core::optimizer::BaselineSampling;
use pathoed_core::{Criterion, LagMode, Mode, PolicyKind, StepSchedule};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "pathoed", version, about = "Policy-gradient path design on navigation meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root seed; every command is deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for sampling and utility evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw paths from a policy and write them with their log-probabilities to paths.txt.
    Sample {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Number of paths to draw.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Optimize a policy; writes trace.csv, optimal_params.json, and result.json.
    Optimize {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        utility: UtilityArgs,
        #[command(flatten)]
        optimizer: OptimizerArgs,
    },
    /// Evaluate every feasible path; writes bruteforce.csv.
    Bruteforce {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        utility: UtilityArgs,
        /// Path length (defaults to the instance's path length).
        #[arg(long)]
        length: Option<usize>,
        /// Largest number of feasible paths to enumerate.
        #[arg(long, default_value_t = pathoed_core::policy::DEFAULT_SUPPORT_CAP)]
        cap: usize,
    },
    /// Check analytic gradients against finite differences and the score identity.
    Gradcheck {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        check: gradcheck::CheckArgs,
        /// Optional utility for the baseline variance comparison.
        #[arg(long)]
        utility_table: Option<PathBuf>,
        /// Criterion for the baseline variance comparison on an --instance.
        #[arg(long)]
        criterion: Option<Criterion>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct MeshArgs {
    /// Mesh edge-list file (vertex count, then one "from to" arc per line, 1-based).
    #[arg(long, group = "source")]
    pub mesh: Option<PathBuf>,
    /// 4-connected grid, e.g. "3x3".
    #[arg(long, group = "source")]
    pub grid: Option<String>,
    /// Rectangular hole "row,col,height,width" removed from --grid; repeatable.
    #[arg(long = "hole", requires = "grid")]
    pub holes: Vec<String>,
    /// Bayesian desk instance (JSON); supplies both mesh and utility.
    #[arg(long, group = "source")]
    pub instance: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PolicyArgs {
    /// Policy parameter file (JSON). Defaults to all parameters 1/2.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// first | higher | generalized
    #[arg(long, default_value = "first")]
    pub kind: PolicyKind,
    /// Markov order k (default 1 for first-order, 2 otherwise).
    #[arg(long)]
    pub order: Option<usize>,
    /// opt | fixed, for lag weights not given in the policy file.
    #[arg(long)]
    pub lag_mode: Option<LagMode>,
    /// Path length n (defaults to the instance's path length).
    #[arg(long)]
    pub length: Option<usize>,
    /// Force every path to start at this 1-based vertex.
    #[arg(long)]
    pub start: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct UtilityArgs {
    /// Utility table "path,utility" (1-based, dash-joined paths).
    #[arg(long)]
    pub utility_table: Option<PathBuf>,
    /// D | A | E, used with --instance.
    #[arg(long, default_value = "D")]
    pub criterion: Criterion,
    /// min | max
    #[arg(long, default_value = "min")]
    pub mode: Mode,
}

#[derive(Args, Debug, Clone)]
pub struct OptimizerArgs {
    /// Ensemble size per iteration.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Batches used to estimate the baseline.
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    /// independent | reuse
    #[arg(long, default_value = "independent")]
    pub baseline_sampling: BaselineSampling,
    /// Initial step size in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// const | sqrt
    #[arg(long, default_value = "const")]
    pub schedule: StepSchedule,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Stop once the parameter update norm falls below this.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Paths drawn from the optimized policy to pick the returned design.
    #[arg(long, default_value_t = 32)]
    pub final_samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    match cli.command {
        Command::Sample { mesh, policy, samples } => sample::run(&mesh, &policy, samples, cli.seed, &cli.out_dir),
        Command::Optimize { mesh, policy, utility, optimizer } => {
            optimize::run(&mesh, &policy, &utility, &optimizer, cli.seed, &cli.out_dir)
        }
        Command::Bruteforce { mesh, utility, length, cap } => {
            bruteforce::run(&mesh, &utility, length, cap, &cli.out_dir)
        }
        Command::Gradcheck { mesh, policy, check, utility_table, criterion } => {
            gradcheck::run(&mesh, &policy, &check, utility_table.as_deref(), criterion, cli.seed)
        }
    }
}
