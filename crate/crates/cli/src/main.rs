use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairllc_cli::{
    cmd_analyze, cmd_gen, cmd_run, cmd_sweep, load_config, parse_analyses, CliError, Emit, Overrides, SweepAxis,
};

#[derive(Parser)]
#[command(name = "pairllc", version, about = "Shared-LLC simulator with pairwise instruction/data management")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file (input for run/sweep/analyze, output for gen).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { trace: self.trace.clone(), out: self.out.clone(), seed: self.seed, ..Overrides::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace and its manifest.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one configuration.
    Run {
        #[command(flatten)]
        common: Common,
        /// Report format: json or csv.
        #[arg(long, default_value = "json")]
        emit: String,
        /// Also write the final pair table.
        #[arg(long)]
        dump_pairtable: bool,
        /// Also write the per-access event log.
        #[arg(long)]
        dump_events: bool,
    },
    /// Vary one parameter and write one CSV row per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// k | threshold_fixed | pair_table_entries | llc_capacity | llc_associativity
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Worker threads (default: sequential).
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Offline analyses of a trace or an event log.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Event log written by `run --dump-events`.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Comma-separated subset of: profile, reuse, conditional, belady, stall.
        #[arg(long, value_delimiter = ',')]
        analyses: Vec<String>,
    },
}

fn dispatch(cmd: Command) -> Result<Vec<PathBuf>, CliError> {
    match cmd {
        Command::Gen { common } => cmd_gen(&load_config(common.config.as_deref(), &common.overrides())?),
        Command::Run { common, emit, dump_pairtable, dump_events } => {
            let emit: Emit = emit.parse().map_err(CliError::Config)?;
            let ov = Overrides { dump_pairtable, dump_events, ..common.overrides() };
            let cfg = load_config(common.config.as_deref(), &ov)?;
            Ok(cmd_run(&cfg, emit)?.files)
        }
        Command::Sweep { common, axis, values, parallel } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = load_config(common.config.as_deref(), &common.overrides())?;
            Ok(vec![cmd_sweep(&cfg, axis, &values, parallel)?.1])
        }
        Command::Analyze { common, events, analyses } => {
            let kinds = parse_analyses(&analyses)?;
            let cfg = load_config(common.config.as_deref(), &common.overrides())?;
            Ok(vec![cmd_analyze(&cfg, events.as_deref(), &kinds)?.1])
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
