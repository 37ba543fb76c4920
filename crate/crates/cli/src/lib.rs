//! Command-line front end for `aa-core`: scenario and constraint files in,
//! CSV artifacts and a run manifest out.

pub mod commands;
pub mod dto;
pub mod experiments;
pub mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "aa", version, about = "Adjustable-autonomy strategies, MDPs and constrained policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for CSV artifacts and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also write whitespace-separated `.dat` files next to each CSV.
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    /// Scenario JSON (instance, delay or auction).
    #[arg(long, alias = "mdp")]
    pub scenario: PathBuf,
    /// Time step used to compile a problem instance into an MDP.
    #[arg(long, default_value_t = 1.0)]
    pub grid_step: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected utility of one strategy.
    Eval {
        #[arg(long, alias = "mdp")]
        scenario: PathBuf,
        /// Strategy text such as `H(5)D(8)A`, or a file holding it.
        #[arg(long)]
        strategy: String,
        /// Treat the strategy as a skeleton and optimize its transfer times.
        #[arg(long)]
        optimize: bool,
    },
    /// Best strategy up to a length.
    Search {
        #[arg(long, alias = "mdp")]
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
    },
    /// Compile a scenario into an MDP and dump it.
    Build(ScenarioArg),
    /// Optimal policy, optionally under constraints.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
    /// Check a policy against constraints by reachability.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        constraints: PathBuf,
        /// Policy CSV written by `solve`; solved here when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Count the actions an optimal policy prescribes.
    Census {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
    /// Census of the delay MDP across values of one parameter.
    Sweep {
        /// Delay scenario; the reference scenario when omitted.
        #[arg(long, alias = "mdp")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Monte-Carlo execution of the optimal policy.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay bid streams against the auction policy and the eA rule.
    Auction {
        /// Auction scenario; the reference scenario when omitted.
        #[arg(long, alias = "mdp")]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of bid streams.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
    },
    /// Reproduction bundles.
    Experiment {
        which: Experiment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Timed repetitions per solve (fig15).
        #[arg(long, default_value_t = 201)]
        runs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Fig10,
    Fig11,
    Fig14,
    Fig15,
    Table5,
    Table6,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 success, 2 bad usage or input, 3 numeric failure, 1 when
/// an artifact cannot be written.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
