use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use urc_core::cli::{self, Body, Command, OutputFormat};
use urc_core::report::{emit_csv, emit_json};
use urc_core::Error;

/// Reliability analysis toolkit: finite-blocklength links, latency budgets,
/// service tiers and multi-user contention.
#[derive(Debug, Parser)]
#[command(name = "urc", version)]
struct Args {
    /// Subcommand; must match the body of the scenario file.
    #[arg(value_enum)]
    command: Command,

    /// Scenario file (TOML, or JSON if it starts with `{`).
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file; stdout when absent in both flags and config.
    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<OutputFormat>,

    /// Worker threads for Monte Carlo stages. Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// rsc only: write the per-sample selection time series here (CSV).
    #[arg(long)]
    timeseries: Option<PathBuf>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn execute(args: Args) -> Result<(), (Error, &'static str)> {
    let text = fs::read(&args.config).map_err(|e| {
        let e = std::io::Error::new(e.kind(), format!("{}: {e}", args.config.display()));
        (Error::Io(e), "config")
    })?;
    let mut config = cli::parse_config(&text).map_err(|e| (e, "config"))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    if let Some(path) = &args.output {
        config.output.path = Some(path.display().to_string());
    }
    if let Some(path) = &args.timeseries {
        match &mut config.body {
            Body::Rsc(b) => b.timeseries_path = Some(path.display().to_string()),
            _ => {
                return Err((
                    Error::InvalidArgument("--timeseries applies to the rsc subcommand only".into()),
                    "cli",
                ))
            }
        }
    }

    let module = args.command.module();
    let report = cli::run(args.command, &config, args.threads).map_err(|e| {
        let origin = if matches!(e, Error::Config { .. }) { "config" } else { module };
        (e, origin)
    })?;
    let bytes = match config.output.format {
        OutputFormat::Json => emit_json(&report),
        OutputFormat::Csv => emit_csv(&report),
    }
    .map_err(|e| (e, "report"))?;

    for (path, contents) in &report.extra_files {
        write_file(Path::new(path), contents).map_err(|e| (e, "report"))?;
    }
    match &config.output.path {
        Some(path) => write_file(Path::new(path), &bytes).map_err(|e| (e, "report"))?,
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| (Error::Io(e), "report"))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, origin)) => {
            eprintln!("error[{origin}]: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
