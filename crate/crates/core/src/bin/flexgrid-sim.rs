use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexgrid_sim::engine::run_with_trace;
use flexgrid_sim::experiment::{
    aggregate_csv, parse_sweep_config, preset, rows_to_csv, run_point, run_sweep, SweepOptions, SweepSpec, PRESETS,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "flexgrid-sim", version, about = "Flexible-grid optical network slot-width simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of a config (a single point may be traced).
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per event to stderr (single-run configs only).
        #[arg(long)]
        trace: bool,
    },
    /// Run a sweep config and write its CSV.
    Sweep {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean and standard error per grid point of a sweep CSV.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a bundled config (lists the names when none is given).
    Preset { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = default_parallelism())]
    parallelism: usize,
    /// Write 0 in the wall_ms column so output is byte-reproducible.
    #[arg(long)]
    no_wall_time: bool,
    /// Verify spectrum consistency every N events.
    #[arg(long)]
    check_interval: Option<u64>,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

enum Failure {
    Config(String),
    Runs(usize),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_spec(args: &RunArgs) -> Result<SweepSpec, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let base = args.config.parent().map(Path::to_path_buf);
    let mut spec = parse_sweep_config(&text, base.as_deref())
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if args.check_interval == Some(0) {
        return Err(Failure::Config("--check-interval must be positive".into()));
    }
    spec.check_interval = args.check_interval;
    Ok(spec)
}

fn options(args: &RunArgs) -> SweepOptions {
    SweepOptions { parallelism: args.parallelism.max(1), record_wall_time: !args.no_wall_time }
}

fn emit(csv: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, csv),
        None => io::stdout().write_all(csv.as_bytes()),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, out, trace } => {
            let spec = load_spec(&common)?;
            let (csv, errors) = if trace {
                let points = spec.points();
                if points.len() != 1 {
                    return Err(Failure::Config(format!(
                        "--trace needs a single-run config, got {} runs",
                        points.len()
                    )));
                }
                // Traced run first, then the regular row for the CSV.
                let config = spec.sim_config(&points[0]).map_err(|e| Failure::Config(e.to_string()))?;
                let stderr = io::stderr();
                let mut lock = stderr.lock();
                if let Err(e) = run_with_trace(&config, Some(&mut lock)) {
                    eprintln!("run failed: {e}");
                }
                let row = run_point(&spec, &points[0], !common.no_wall_time);
                let errors = usize::from(row.is_error());
                (rows_to_csv(&[row]), errors)
            } else {
                let output = run_sweep(&spec, options(&common));
                let errors = output.error_count();
                (output.csv, errors)
            };
            emit(&csv, out.as_deref())?;
            if errors > 0 {
                return Err(Failure::Runs(errors));
            }
        }
        Command::Sweep { common, out } => {
            let spec = load_spec(&common)?;
            let output = run_sweep(&spec, options(&common));
            emit(&output.csv, Some(&out))?;
            if output.error_count() > 0 {
                return Err(Failure::Runs(output.error_count()));
            }
        }
        Command::Aggregate { input, out } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", input.display())))?;
            let csv = aggregate_csv(&text).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
            fs::write(&out, csv)?;
        }
        Command::Preset { name } => match name.as_deref() {
            None => {
                for (n, _) in PRESETS {
                    println!("{n}");
                }
            }
            Some(n) => match preset(n) {
                Some(text) => print!("{text}"),
                None => {
                    let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                    return Err(Failure::Config(format!("unknown preset `{n}`; available: {}", names.join(", "))));
                }
            },
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runs(n)) => {
            eprintln!("error: {n} run(s) failed; see the status column");
            ExitCode::from(EXIT_RUN_FAILED)
        }
    }
}
