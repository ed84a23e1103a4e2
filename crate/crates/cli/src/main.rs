//! `apa`: run power allocation experiments from TOML files.
//!
//! Exit status: 0 on success, 1 when the command line or the config is
//! invalid, 2 when a run, an oracle check or writing the output fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use apa_core::config::{load_config, Overrides};
use apa_core::harness::{run, ExperimentResult, ExperimentSpec, OutputFormat};
use apa_core::oracle::{run_oracles, OracleSizes};
use apa_core::output::{emit_result, render};
use apa_core::parallel::{worker_count, WORKERS_ENV};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "apa",
    version,
    about = "MSE-based adaptive power allocation experiments for MU-MIMO downlink",
    after_help = format!("Set {WORKERS_ENV}=<n> to limit the number of worker threads (default: all cores).")
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write its table
    Run(CommonArgs),
    /// Parse and validate the config, then print the effective spec
    Validate(CommonArgs),
    /// Check gradients, the grid-search optimum and invariants on the config's system
    Oracle(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML)
    config: PathBuf,
    /// Override system.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Output format (default from [output].format, else csv)
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (default from [output].path, else stdout)
    #[arg(long)]
    out: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentSpec, u8> {
        let overrides = Overrides {
            seed: self.seed,
            trials: self.trials,
            format: self.format.map(Into::into),
            out: self.out.clone(),
        };
        load_config(&self.config, &overrides).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_INVALID
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => args.load().and_then(|spec| execute(&spec)),
        Command::Validate(args) => args.load().map(|spec| {
            out(&format!("{}: ok\n{}\n", args.config.display(), spec.to_json_pretty()));
        }),
        Command::Oracle(args) => args.load().and_then(|spec| oracle(&spec)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

/// Writes to stdout, tolerating a closed pipe (`apa run ... | head`).
fn out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn execute(spec: &ExperimentSpec) -> Result<(), u8> {
    eprintln!(
        "running {} with {} trials on {} worker(s)",
        spec.kind.as_str(),
        spec.trials,
        worker_count()
    );
    let result = run(spec).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    })?;
    let written = match &spec.output_path {
        Some(path) => emit_result(&result, spec.format, path).map(|()| Some(path.clone())),
        None => render(&result, spec.format).map(|text| {
            out(&text);
            None
        }),
    };
    match written {
        Ok(path) => {
            summarize(&result, path.as_deref());
            Ok(())
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_RUNTIME)
        }
    }
}

fn summarize(result: &ExperimentResult, path: Option<&str>) {
    let table = result.table();
    eprintln!(
        "{} rows x {} columns in {:.2} s",
        table.n_rows(),
        table.columns.len(),
        result.metadata.wall_time_s
    );
    if let Some(last) = table.n_rows().checked_sub(1) {
        for column in &table.columns {
            eprintln!("  {:<14} last = {:.6}", column.name, column.values[last]);
        }
    }
    let failed: usize = result.metadata.failures.values().sum();
    if failed > 0 {
        eprintln!("  {failed} failed trial(s); see failures.* in the metadata");
    }
    if let Some(path) = path {
        eprintln!("wrote {path}");
    }
}

fn oracle(spec: &ExperimentSpec) -> Result<(), u8> {
    let sizes = match spec.trials {
        // a small --trials gives a quick smoke check
        t if t < 100 => OracleSizes {
            gradient: t,
            search: t.min(50),
            reduction: t.min(20),
            norm: t.min(10),
            ..OracleSizes::default()
        },
        _ => OracleSizes::default(),
    };
    let report = run_oracles(&spec.system, &spec.precoders, sizes).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    })?;
    out(&format!("{report}\n"));
    if report.all_passed() {
        Ok(())
    } else {
        Err(EXIT_RUNTIME)
    }
}
