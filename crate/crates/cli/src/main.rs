use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qem_cli::{parse_config, run, Command, RunConfig};

const EXIT_INVALID: u8 = 2;

/// Build and verify conformally flat generalized m-quasi-Einstein metrics.
#[derive(Debug, Parser)]
#[command(name = "qem", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the JSON report (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the per-point CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    grid: Option<usize>,
}

fn load(args: &Args) -> Result<RunConfig, String> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => "{}".to_string(),
    };
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    match cfg.command {
        Some(c) if c != args.command => {
            return Err(format!(
                "config says command {c:?} but {:?} was requested",
                args.command
            ))
        }
        _ => cfg.command = Some(args.command),
    }
    if let Some(seed) = args.seed {
        cfg.grid.seed = seed;
    }
    if let Some(tol) = args.tol {
        cfg.tol = Some(tol);
    }
    if let Some(count) = args.grid {
        cfg.grid.count = count;
    }
    if let Some(out) = &args.out {
        cfg.output.report = Some(out.display().to_string());
    }
    if let Some(csv) = &args.csv {
        cfg.output.csv = Some(csv.display().to_string());
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("qem: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qem: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let written = match &cfg.output.report {
        Some(path) => outcome.report.write(path.as_ref()),
        None => outcome.report.to_json().map(|s| print!("{s}")),
    }
    .and_then(|_| match &cfg.output.csv {
        Some(path) => outcome.table.write_csv(path.as_ref()),
        None => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("qem: {e}");
        return ExitCode::from(EXIT_INVALID);
    }
    if let Some(b) = &outcome.breach {
        eprintln!("qem: tolerance breach: {b}");
    }
    ExitCode::from(outcome.status.code())
}
