//! The `sphereflow` command line.
//!
//! Exit status: 0 on success, 1 when a tolerance is not met, 2 for
//! configuration errors, 3 for runtime errors. With several `--config`
//! files the largest status wins.

pub mod commands;
pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

pub use commands::{Outcome, Status};
pub use config::ScenarioConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SPHEREFLOW_OUT";
pub const DEFAULT_OUT: &str = "sphereflow-out";

#[derive(Debug, Parser)]
#[command(
    name = "sphereflow",
    version,
    about = "Curvature flows of convex hypersurfaces in the sphere"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file (JSON); repeat to run several.
    #[arg(long = "config", required = true)]
    pub configs: Vec<PathBuf>,
    /// Worker threads for independent scenarios.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output root; defaults to $SPHEREFLOW_OUT, then ./sphereflow-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a flow and write series, metadata, snapshots and plots.
    Run(ScenarioArgs),
    /// Compare a contracting flow with the expanding flow of its dual.
    DualCheck(ScenarioArgs),
    /// Audit concavity and class (K) properties on random curvatures.
    ConcavityAudit {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a spherical run with the closed-form solution.
    Benchmark(ScenarioArgs),
}

fn out_root(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn fan_out(args: ScenarioArgs, cmd: fn(&Path, &Path) -> Outcome) -> Vec<Outcome> {
    let root = out_root(args.out);
    let configs = args.configs;
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; configs.len()]);
    let next = AtomicUsize::new(0);
    let workers = args.jobs.clamp(1, configs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = configs.get(i) else { break };
                let outcome = cmd(path, &root);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|o| o.expect("every config was processed"))
        .collect()
}

/// Executes a parsed command line, returning one outcome per scenario.
pub fn execute(cli: Cli) -> Vec<Outcome> {
    match cli.command {
        Command::Run(args) => fan_out(args, commands::cmd_run),
        Command::DualCheck(args) => fan_out(args, commands::cmd_dual_check),
        Command::Benchmark(args) => fan_out(args, commands::cmd_benchmark),
        Command::ConcavityAudit {
            n,
            samples,
            seed,
            out,
        } => vec![commands::cmd_concavity_audit(
            n,
            samples,
            seed,
            &out_root(out),
        )],
    }
}

/// Entry point of the binary: parses `args`, runs, prints one line per
/// scenario and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Status::ConfigError as i32
            } else {
                0
            };
        }
    };
    let outcomes = execute(cli);
    let mut status = Status::Ok;
    for o in &outcomes {
        if o.status == Status::Ok {
            println!("{}", o.message);
        } else {
            eprintln!("{}", o.message);
        }
        status = status.max(o.status);
    }
    status as i32
}
