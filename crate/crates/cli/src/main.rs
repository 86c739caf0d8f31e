//! Command-line front end of the benchmark harness.
//!
//! Exit status: 0 on success, 2 for configuration or argument errors, 3 when
//! a run fails or results cannot be read or written.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use drawbar::bench::{self, Arm, BenchError, Config, NodeProcessArgs, RunOptions, RunParams};
use drawbar::payload::Serialization;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "harness", version, about = "Periodic sensor-stream benchmark over named data and pub/sub")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one arm and write its results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        arm: Arm,
        #[arg(long, default_value = "bytes")]
        serialization: Serialization,
        /// Run length in seconds; fractions allowed.
        #[arg(long, default_value = "10", value_parser = parse_seconds)]
        duration: Duration,
        /// Any value that fits a TOML integer (0 to 2^63 - 1).
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Simulated links and a virtual clock instead of sockets.
        #[arg(long, conflicts_with = "processes")]
        sim: bool,
        /// One operating-system process per node.
        #[arg(long)]
        processes: bool,
    },
    /// Compare runs: one row per stream, one column per run.
    Summarize {
        #[arg(long = "in", required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
        /// Also write the comparison as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Also check what this arm needs.
        #[arg(long)]
        arm: Option<Arm>,
    },
    /// Run a single node of a multi-process run.
    #[command(hide = true)]
    Node {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        arm: Arm,
        #[arg(long)]
        serialization: Serialization,
        #[arg(long)]
        duration_us: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        node: String,
        #[arg(long)]
        epoch_unix_us: u64,
        #[arg(long)]
        report: PathBuf,
    },
}

fn parse_seconds(s: &str) -> Result<Duration, String> {
    let secs: f64 = s.parse().map_err(|_| format!("{s:?} is not a number of seconds"))?;
    if !(secs.is_finite() && secs >= 0.0) {
        return Err("duration must be a non-negative number of seconds".into());
    }
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

fn fail(e: BenchError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, arm, serialization, duration, seed, out, sim, processes } => {
            let config = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            let node_exe = if processes {
                match std::env::current_exe() {
                    Ok(exe) => Some(exe),
                    Err(e) => return fail(BenchError::Runtime(format!("cannot locate own executable: {e}"))),
                }
            } else {
                None
            };
            let options = RunOptions { params: RunParams { arm, serialization, duration, seed }, out, sim, node_exe };
            match bench::run(&config, &options) {
                Ok(outcome) => {
                    for e in outcome.manifest.warnings.iter().chain(&outcome.manifest.errors) {
                        eprintln!("warning: {e}");
                    }
                    let table = bench::compare(&[(outcome.manifest.clone(), outcome.summaries.clone())]);
                    print!("{}", table.to_text());
                    println!("results in {}", outcome.dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Summarize { dirs, csv } => {
            let table = match bench::summarize_dirs(&dirs) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            print!("{}", table.to_text());
            if let Some(path) = csv {
                if let Err(e) = std::fs::write(&path, table.to_csv()) {
                    return fail(BenchError::Output(format!("{}: {e}", path.display())));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config, arm } => {
            let config = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            let arms: Vec<Arm> = arm.map_or(Arm::ALL.to_vec(), |a| vec![a]);
            let mut runnable = Vec::new();
            for a in &arms {
                match bench::check(&config, *a) {
                    Ok(()) => runnable.push(a.as_str()),
                    Err(e) if arm.is_some() => return fail(e),
                    Err(e) => eprintln!("note: {a} arm unavailable: {e}"),
                }
            }
            println!(
                "ok: {} nodes, {} faces, {} routes, {} streams; arms: {}",
                config.nodes.len(),
                config.faces.len(),
                config.routes.len(),
                config.streams.len(),
                runnable.join(", ")
            );
            ExitCode::SUCCESS
        }
        Command::Node { config, arm, serialization, duration_us, seed, node, epoch_unix_us, report } => {
            let args = NodeProcessArgs {
                config,
                params: RunParams { arm, serialization, duration: Duration::from_micros(duration_us), seed },
                node,
                epoch_unix_us,
                report,
            };
            match bench::run_node_process(&args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    }
}
