//! `gridforge`: controller design, loop analysis, scenario simulation and the
//! acceptance suite from the command line.
//!
//! Exit codes: 0 success, 1 parse or I/O error, 2 infeasible design,
//! 3 singular loop, 4 numerical abort, 5 acceptance failure.
//! Diagnostics go to stderr; stdout lists the files written, one per line.

mod analyze;
mod design;
mod failure;
mod simulate;
mod verify;

use clap::{Parser, Subcommand};
use failure::Failure;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gridforge", version, about = "Hybrid-source inverter control design and microgrid simulation")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a controller from a design spec (TOML).
    Design {
        spec: PathBuf,
        #[arg(long, default_value = "gridforge-out")]
        out: PathBuf,
        /// `key=value` override applied after parsing (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Frequency-domain analysis of a controller on a line.
    Analyze {
        /// Controller JSON written by `design`.
        controller: PathBuf,
        /// Line resistance (ohm).
        #[arg(long)]
        r: f64,
        /// Line reactance at `omega0` (ohm).
        #[arg(long)]
        x: f64,
        /// PCC voltage amplitude (V).
        #[arg(long, default_value_t = 170.0)]
        v2: f64,
        /// Nominal frequency (rad/s).
        #[arg(long, default_value_t = gridforge::microgrid::scenario::NOMINAL_OMEGA)]
        omega0: f64,
        #[arg(long, default_value = "gridforge-out")]
        out: PathBuf,
    },
    /// Run scenarios; each argument is a file or a bundled scenario name.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long, default_value = "gridforge-out")]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Record every N-th control tick.
        #[arg(long)]
        decimate: Option<usize>,
        /// Recorded in the output metadata; changes nothing numeric.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, default_value = "gridforge-out")]
        out: PathBuf,
        /// Run only these criteria (repeatable).
        #[arg(long)]
        only: Vec<usize>,
        /// Scale the simulated voltage compensators in the droop runs
        /// (negative control).
        #[arg(long, default_value_t = 1.0)]
        perturb_gain: f64,
    },
}

/// Worker count for batch work: `GRIDFORGE_THREADS` if set, else all cores.
fn threads() -> usize {
    std::env::var("GRIDFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    match cli.command {
        Command::Design { spec, out, sets } => design::run(&spec, &out, &sets),
        Command::Analyze {
            controller,
            r,
            x,
            v2,
            omega0,
            out,
        } => analyze::run(&controller, r, x, v2, omega0, &out),
        Command::Simulate {
            scenarios,
            out,
            mut sets,
            decimate,
            seed,
        } => {
            if let Some(n) = decimate {
                sets.push(format!("sim.decimate={n}"));
            }
            if let Some(s) = seed {
                sets.push(format!("sim.seed={s}"));
            }
            simulate::run(&scenarios, &out, &sets, threads())
        }
        Command::Verify { out, only, perturb_gain } => verify::run(&out, &only, perturb_gain, threads()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
