mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Config, ConfigError};

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_AMBIGUOUS: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(
    name = "qscatter",
    version,
    about = "Far-field correlators of one- and two-photon light scattered by a weak dielectric"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for synthetic noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// The three resolution curves: red, black, green.
    Fig1 {
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Scan a scenario over separation or frequency.
    Scan,
    /// Recover the separation from a frequency scan.
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Closed form against brute-force quadrature over angular widths.
    Oracle,
    /// Visibility, extrema spacing and domain of a scanned signal.
    Visibility {
        #[arg(long)]
        data: PathBuf,
        /// `lo,hi` window for the extrema spacing.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a < b {
        Ok((a, b))
    } else {
        Err("window bounds must be ordered".into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_VALIDATION;
    }
    if let Some(e) = err.downcast_ref::<qscatter::Error>() {
        return core_code(e);
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return EXIT_VALIDATION;
    }
    EXIT_IO
}

fn core_code(e: &qscatter::Error) -> u8 {
    use qscatter::Error as E;
    match e {
        E::NotConverged { .. } | E::Unidentifiable { .. } | E::NoExtrema { .. } => EXIT_NUMERICAL,
        E::AtPoint { source, .. } => core_code(source),
        E::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Writes via a sibling temporary file so a failed run leaves nothing behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<commands::Output> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!(ConfigError {
                line: None,
                field: Some("threads".into()),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let base = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    match &cli.command {
        Command::Fig1 { chi, points } => {
            commands::fig1(&cfg, *chi, *points, cli.format.unwrap_or(Format::Csv))
        }
        Command::Scan => commands::scan(&cfg, &base, cli.seed, cli.format.unwrap_or(Format::Csv)),
        Command::Fit { data } => {
            commands::fit_cmd(&cfg, &base, data, cli.format.unwrap_or(Format::Json))
        }
        Command::Oracle => commands::oracle(&cfg, &base, cli.format.unwrap_or(Format::Json)),
        Command::Visibility { data, window } => {
            commands::visibility(&cfg, data, *window, cli.format.unwrap_or(Format::Json))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.out {
        Some(p) => write_atomic(p, &out.bytes),
        None => std::io::stdout().write_all(&out.bytes).map_err(Into::into),
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_IO);
    }
    if out.ambiguous {
        eprintln!("fit is ambiguous: several separations fit within tolerance (see `candidates`)");
        return ExitCode::from(EXIT_AMBIGUOUS);
    }
    ExitCode::SUCCESS
}
