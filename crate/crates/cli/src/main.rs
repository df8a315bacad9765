use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use isslab_cli::{run_many, Command, Options, Status};

/// Simulate parabolic scenarios and check their stability bounds.
#[derive(Parser, Debug)]
#[command(name = "isslab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// Scenario file; repeat to run several scenarios concurrently.
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,

    /// Output directory for CSV artifacts.
    #[arg(long, default_value = "isslab-out")]
    out: PathBuf,

    /// Absolute check tolerance; replaces the grid-dependent default.
    #[arg(long)]
    tol: Option<f64>,

    /// Seed for randomized probes.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { Status::Config.code() } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(Status::Config.code() as u8);
        }
    }
    let defaults = Options::default();
    let opts = Options {
        out: args.out,
        tol: args.tol,
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let outcomes = run_many(args.command, &args.config, &opts);
    let mut status = Status::Pass;
    for (path, outcome) in args.config.iter().zip(&outcomes) {
        if args.config.len() > 1 {
            println!("== {}", path.display());
        }
        for line in &outcome.lines {
            if line.starts_with("error:") {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
        }
        status = status.max(outcome.status);
    }
    ExitCode::from(status.code() as u8)
}
