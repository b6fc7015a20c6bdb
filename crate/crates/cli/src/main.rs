//! `ruelle`: critical data, summability, the critical-value relation, the
//! verification suite and field rasters from a JSON run configuration.
//!
//! Exit codes: 0 success, 1 failed check or numerical failure, 2 usage error.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ruelle_core::Error;

use crate::config::{parse_complex, parse_schedule, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ruelle", version, about = "Transfer-operator experiments for entire maps P1 + P2(sin(P3))")]
struct Cli {
    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent; a file prefix for `field`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Critical-point search radius.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Maximum orbit length for the series.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Comma-separated increasing x values in [0, 1).
    #[arg(long = "x-schedule", global = true, value_parser = parse_schedule)]
    x_schedule: Option<Vec<f64>>,
    /// Grid nodes per side for `field`.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Seed for sample-point generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical points, values and residues inside the configured radius.
    Critical,
    /// Classify a point, or every critical value.
    Summability {
        /// RE,IM of the point `a` (its image `f(a)` is iterated).
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        point: Option<[f64; 2]>,
        /// Emit CSV rows instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Ψ coefficients, instability verdict, rank diagnostics and x → 1 trend.
    Relation {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        d1: Option<[f64; 2]>,
    },
    /// Run the verification checks and write their results.
    Verify {
        /// Comma-separated check names; an empty value selects none.
        #[arg(long)]
        check: Option<String>,
        /// Negate the residue of the first critical point (debugging aid).
        #[arg(long, hide = true)]
        inject_b_sign_fault: bool,
    },
    /// CSV grid and PGM raster of log|A(1, d1, z)|.
    Field {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        d1: Option<[f64; 2]>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_) | Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(r) = cli.radius {
        cfg.radius = r;
    }
    if let Some(n) = cli.nmax {
        cfg.n_max = n;
    }
    if let Some(x) = &cli.x_schedule {
        cfg.x_schedule = x.clone();
    }
    if let Some(g) = cli.grid {
        cfg.grid.n = g;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Summability { point: Some(p), .. } => cfg.point = Some(*p),
        Command::Relation { d1: Some(d) } | Command::Field { d1: Some(d) } => cfg.d1 = Some(*d),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Run(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Critical => write(out, &commands::cmd_critical(&cfg)?)?,
        Command::Summability { csv, .. } => write(out, &commands::cmd_summability(&cfg, *csv)?)?,
        Command::Relation { .. } => write(out, &commands::cmd_relation(&cfg)?)?,
        Command::Verify {
            check,
            inject_b_sign_fault,
        } => {
            let names: Vec<String> = match (check, &cfg.checks) {
                (Some(s), _) => s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
                (None, Some(list)) => list.clone(),
                (None, None) => commands::CHECK_NAMES.iter().map(|s| s.to_string()).collect(),
            };
            let results = commands::run_checks(&cfg, &names, *inject_b_sign_fault)?;
            for r in &results {
                eprintln!("{} {}: lhs {:.3e} rhs {:.3e} budget {:.3e}", if r.passed { "pass" } else { "FAIL" }, r.name, r.lhs, r.rhs, r.error_budget);
            }
            write(out, &serde_json::to_string_pretty(&results).map_err(Error::from)?)?;
            return Ok(results.iter().all(|r| r.passed));
        }
        Command::Field { .. } => {
            let field = commands::cmd_field(&cfg)?;
            let prefix = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("field"));
            let with_ext = |ext: &str| {
                let mut s = prefix.clone().into_os_string();
                s.push(ext);
                PathBuf::from(s)
            };
            write(Some(&with_ext(".csv")), &field.csv)?;
            write(Some(&with_ext(".pgm")), &field.pgm)?;
            eprintln!("{} grid rows", field.rows);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
