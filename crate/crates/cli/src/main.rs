//! `powergame`: Nash and Stackelberg equilibria of power control games.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a solver
//! fails or does not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use powergame::channel::{normalize, sample_admissible_channel, DEFAULT_REJECTION_CAP};
use powergame::game::iterative_waterfilling;
use powergame::harness::{reproduce_example, run_experiment, write_outcome, ExperimentSpec};
use powergame::stackelberg::{algorithm1_dual, dual_bound, exhaustive_stackelberg, interference_free_bound};
use powergame::{
    ChannelError, ChannelRealization, GameConfig, HarnessError, LeaderProblem, NormalizedChannel, RayleighProfile,
    SolverError, StackelbergResult, Topology,
};

/// Seed used when none is given.
const DEFAULT_SEED: u64 = 20_090_101;

#[derive(Debug, Parser)]
#[command(
    name = "powergame",
    version,
    about = "Nash and Stackelberg power allocation on interference channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ChannelArgs {
    /// Channel realization JSON (`num_users`, `num_bins`, `gain[j][k][f]`, `noise[k][f]`).
    #[arg(long)]
    channel: PathBuf,
    /// Power budgets, comma separated; a single value applies to every user.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    budget: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Dual,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nash equilibrium by iterative water-filling.
    Nash {
        #[command(flatten)]
        input: ChannelArgs,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Leader's Stackelberg allocation.
    Stackelberg {
        #[command(flatten)]
        input: ChannelArgs,
        #[arg(long, value_enum, default_value = "dual")]
        method: MethodArg,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        /// 1-based index of the leader.
        #[arg(long, default_value_t = 1)]
        leader: usize,
    },
    /// Interference-free rate bound and Lagrangian dual bound of the leader.
    Bounds {
        #[command(flatten)]
        input: ChannelArgs,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        #[arg(long, default_value_t = 1)]
        leader: usize,
    },
    /// Reproduce one of the two worked examples.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Monte-Carlo comparison of the Nash and Stackelberg rates.
    Montecarlo {
        /// Experiment spec JSON.
        #[arg(long)]
        config: PathBuf,
        /// Directory for trials.csv, summary.json and the CDF files.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the spec's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Sample a diagonally dominant channel and print it as JSON.
    GenChannel {
        #[arg(long, default_value_t = 2)]
        users: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 0.5)]
        cross_power: f64,
        #[arg(long, default_value_t = 1.0)]
        direct_power: f64,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Solver(_) => 2,
        }
    }
}

impl From<ChannelError> for Failure {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::RejectionCapExceeded { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solver(e) => e.into(),
            HarnessError::Channel(e) => e.into(),
            HarnessError::Spec(_) | HarnessError::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_channel(input: &ChannelArgs) -> Result<(NormalizedChannel, Vec<f64>), Failure> {
    let path = &input.channel;
    let ch =
        ChannelRealization::from_json(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let nc = normalize(&ch)?;
    let budgets = match input.budget[..] {
        [b] => vec![b; ch.num_users],
        _ if input.budget.len() == ch.num_users => input.budget.clone(),
        _ => {
            return Err(Failure::Usage(format!(
                "{} budgets given for {} users",
                input.budget.len(),
                ch.num_users
            )))
        }
    };
    if budgets.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Failure::Usage("budgets must be positive".into()));
    }
    Ok((nc, budgets))
}

fn leader_index(leader: usize, num_users: usize) -> Result<usize, Failure> {
    if leader == 0 || leader > num_users {
        return Err(Failure::Usage(format!("--leader must lie in 1..={num_users}")));
    }
    Ok(leader - 1)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types always serialize") + "\n"
}

#[derive(Serialize)]
struct BoundsReport {
    leader: usize,
    interference_free_bits: f64,
    interference_free_allocation: Vec<f64>,
    dual_bound_bits: f64,
    mu_star: f64,
    dual_total_power: f64,
    grid_step: f64,
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Nash {
            input,
            tolerance,
            max_iters,
        } => {
            let (nc, budgets) = load_channel(&input)?;
            let mut cfg = GameConfig::new(budgets);
            cfg.iw_tolerance = tolerance;
            if let Some(m) = max_iters {
                cfg.iw_max_iters = m;
            }
            let ne = iterative_waterfilling(&nc, &cfg, None).map_err(|e| Failure::Usage(e.to_string()))?;
            if !ne.converged {
                return Err(Failure::Solver(format!(
                    "iterative water-filling did not converge in {} rounds\n{}",
                    ne.iterations,
                    json(&ne)
                )));
            }
            Ok(json(&ne))
        }
        Command::Stackelberg {
            input,
            method,
            grid_step,
            leader,
        } => {
            let (nc, budgets) = load_channel(&input)?;
            let leader = leader_index(leader, nc.num_users())?;
            let prob = LeaderProblem::new(nc, leader, budgets, grid_step);
            let mut results: Vec<StackelbergResult> = Vec::new();
            if matches!(method, MethodArg::Exhaustive | MethodArg::Both) {
                results.push(exhaustive_stackelberg(&prob)?);
            }
            if matches!(method, MethodArg::Dual | MethodArg::Both) {
                results.push(algorithm1_dual(&prob)?);
            }
            Ok(json(&results))
        }
        Command::Bounds {
            input,
            grid_step,
            leader,
        } => {
            let (nc, budgets) = load_channel(&input)?;
            let leader = leader_index(leader, nc.num_users())?;
            let prob = LeaderProblem::new(nc, leader, budgets, grid_step);
            let (alloc, r_max) = interference_free_bound(&prob)?;
            let dual = dual_bound(&prob, grid_step)?;
            Ok(json(&BoundsReport {
                leader: leader + 1,
                interference_free_bits: r_max,
                interference_free_allocation: alloc.power,
                dual_bound_bits: dual.dual_value_bits,
                mu_star: dual.mu_star,
                dual_total_power: dual.total_power,
                grid_step,
            }))
        }
        Command::Example { which, json: as_json } => {
            let report = reproduce_example(which)?;
            Ok(if as_json { json(&report) } else { report.to_table() })
        }
        Command::Montecarlo {
            config,
            out,
            threads,
            seed,
            trials,
        } => {
            let mut spec = ExperimentSpec::from_json(&read(&config)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            spec.validate()?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::Usage(e.to_string()))?;
            }
            let outcome = run_experiment(&spec)?;
            let written = write_outcome(&outcome, spec.topology.num_users, &out)?;
            let mut msg = String::new();
            for p in written {
                msg += &format!("{}\n", p.display());
            }
            Ok(msg)
        }
        Command::GenChannel {
            users,
            bins,
            cross_power,
            direct_power,
            noise,
            seed,
            out,
        } => {
            let topology = Topology {
                num_users: users,
                num_bins: bins,
                direct_power,
                cross_power,
                noise,
            };
            let draw = sample_admissible_channel(&RayleighProfile::default(), &topology, seed, DEFAULT_REJECTION_CAP)?;
            let text = draw.channel.to_json() + "\n";
            match out {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Solver(m) => eprintln!("solver failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
