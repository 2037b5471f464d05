//! `cellflow` — run, sweep, and validate traffic-control scenarios.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invariant
//! violation detected during a checked run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use cellflow_core::geometry::validate_partition;
use cellflow_core::harness::{
    emit_csv, parse_config, run, HarnessError, RunOptions, Scenario, SweepParam, SweepRow,
    SweepSpec,
};
use cellflow_core::protocol::initial_state;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cellflow",
    version,
    about = "Simulator for self-stabilizing traffic control of colored discs on polygonal cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario for its configured horizon.
    Run {
        /// Scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a JSON-lines trace (one record per round) to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the run's throughput row(s) as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Evaluate safety invariants every round; any violation aborts
        /// the run with exit code 2.
        #[arg(long)]
        check: bool,
    },
    /// Run repetitions of a scenario across a list of parameter values.
    Sweep {
        /// Base scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Which parameter to vary: rs, v, l, K, p_f, p_r, turns,
        /// overlap_fraction, or n_colors.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seeded repetitions per value (seeds are consecutive from the
        /// configured base seed).
        #[arg(long, default_value_t = 1)]
        reps: u32,
        /// Output CSV path.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Validate a configuration and its tessellation without simulating.
    Check {
        /// Scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &HarnessError) -> u8 {
    match e {
        HarnessError::InvariantViolation { .. } => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            seed,
            trace,
            csv,
            check,
        } => cmd_run(&config, seed, trace.as_deref(), csv.as_deref(), check),
        Command::Sweep {
            config,
            param,
            values,
            reps,
            csv,
        } => cmd_sweep(&config, param, values, reps, &csv),
        Command::Check { config } => cmd_check(&config),
    }
}

fn load_scenario(path: &std::path::Path) -> Result<Scenario, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn cmd_run(
    config: &std::path::Path,
    seed: Option<u64>,
    trace: Option<&std::path::Path>,
    csv: Option<&std::path::Path>,
    check: bool,
) -> Result<(), HarnessError> {
    let mut scenario = load_scenario(config)?;
    if let Some(seed) = seed {
        scenario.config.seed = seed;
    }
    let mut trace_file = match trace {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let result = run(
        &scenario,
        RunOptions {
            check,
            prefail: Vec::new(),
            trace: trace_file.as_mut().map(|w| w as &mut dyn Write),
        },
    );
    if let Some(mut w) = trace_file {
        w.flush()?;
    }
    let result = result?;

    println!("seed {}  rounds {}", result.seed, result.rounds);
    for (spec, (consumed, rate)) in scenario
        .config
        .colors
        .iter()
        .zip(result.consumed.iter().zip(&result.throughput))
    {
        println!("  {}: consumed {consumed}  throughput {rate:.6}", spec.name);
    }
    println!(
        "summed throughput {:.6}  failures {}  recoveries {}",
        result.summed_throughput, result.failures, result.recoveries
    );

    if let Some(path) = csv {
        // A single run is reported as a one-point sweep over its horizon.
        let row = SweepRow {
            param: "K".into(),
            value: scenario.config.horizon as f64,
            seed: result.seed,
            per_color: scenario
                .config
                .colors
                .iter()
                .zip(&result.throughput)
                .map(|(c, &t)| (c.name.clone(), t))
                .collect(),
            summed: result.summed_throughput,
            failures: result.failures,
            recoveries: result.recoveries,
        };
        let mut w = BufWriter::new(File::create(path)?);
        emit_csv(&[row], &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_sweep(
    config: &std::path::Path,
    param: SweepParam,
    values: Vec<f64>,
    reps: u32,
    csv: &std::path::Path,
) -> Result<(), HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Parse("sweep needs at least one value".into()));
    }
    let base = load_scenario(config)?;
    let rows = cellflow_core::harness::sweep(&SweepSpec {
        base,
        param,
        values,
        reps,
    })?;
    let mut w = BufWriter::new(File::create(csv)?);
    emit_csv(&rows, &mut w)?;
    w.flush()?;
    println!("wrote {} rows to {}", rows.len(), csv.display());
    Ok(())
}

fn cmd_check(config: &std::path::Path) -> Result<(), HarnessError> {
    let scenario = load_scenario(config)?;
    let report = validate_partition(&scenario.partition, &scenario.config.params);
    print!("{report}");
    if !report.all_passed() {
        return Err(HarnessError::Parse(
            "partition fails feasibility validation".into(),
        ));
    }
    // Builds the full initial state, which re-validates every semantic
    // constraint (color cells exist, spawn sites fit, probabilities in
    // range) without running any rounds.
    initial_state(scenario.partition.clone(), scenario.config.clone())?;
    println!("configuration ok");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_violations_map_to_exit_2_and_config_errors_to_1() {
        let violation = HarnessError::InvariantViolation {
            round: 7,
            violations: Vec::new(),
        };
        assert_eq!(exit_code_for(&violation), 2);
        assert_eq!(exit_code_for(&HarnessError::Parse("bad".into())), 1);
    }
}
