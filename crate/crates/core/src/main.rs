use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use udn_coverage::sweep::{self, Engine, OutputFormat, RunConfig, SweepError, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "udn-coverage", version, about = "Coverage sweeps for ultra-dense LOS/NLOS cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every cell of a configuration and write the results.
    Run(RunArgs),
    /// Check a configuration and list its grid without computing anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output file; defaults to the config's output.path, else stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Comma-separated engine list overriding the config.
    #[arg(long, value_delimiter = ',', value_parser = parse_engine)]
    engines: Option<Vec<Engine>>,
    /// Fill the wall_ms column (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ValidateArgs {
    config: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_engine)]
    engines: Option<Vec<Engine>>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse()
}

fn run(args: RunArgs) -> Result<(), SweepError> {
    let cfg = RunConfig::from_path(&args.config, args.engines.as_deref())?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let format = args.format.unwrap_or(cfg.format);
    let outcome = sweep::execute(&cfg, workers, args.timing)?;

    let path = args.output.or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
    let sink: Box<dyn Write> = match &path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| SweepError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    sweep::write_rows(&outcome.rows, format, sink)?;

    let mut first = None;
    for (cell, err) in outcome.failures {
        eprintln!("error: cell {cell}: {err}");
        first.get_or_insert(SweepError::Numerical {
            cell: cell.to_string(),
            source: err,
        });
    }
    first.map_or(Ok(()), Err)
}

fn validate(args: ValidateArgs) -> Result<(), SweepError> {
    let cfg = RunConfig::from_path(&args.config, args.engines.as_deref())?;
    print!("{}", cfg.report());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
