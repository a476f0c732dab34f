mod artifacts;
mod config;
mod experiments;

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use levelset_core::cell::{cell_lambda, PeriodicProfile};
use levelset_core::oracles::{example_bounded_speed_d, example_bounded_speed_w, example_two_bumps, hopf_lax_w, two_bump_u0};

use crate::config::SchemaError;

const EXIT_SCHEMA: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "levelset", version, about = "Level-set evolution with built-in reinitialization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Artifact directory; defaults to `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the convergence table of an artifact directory.
    Report { dir: PathBuf },
    /// Solve the two-phase cell problem.
    Cell {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        theta: f64,
        /// Rows of the `tau,h,v` table; 0 prints only lambda.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Evaluate an exact solution at `x[,y],t` rows read from stdin.
    Oracle { name: Oracle },
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    TwoBumpsW,
    TwoBumpsD,
    BoundedSpeedW,
    BoundedSpeedD,
    /// Unit-speed solution for the two-bump datum by direct maximization.
    HopfLaxTwoBumps,
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("LEVELSET_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| SchemaError {
                path: "LEVELSET_THREADS".into(),
                message: format!("expected a positive integer, got {v:?}"),
            })?;
            Ok((n > 0).then_some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = config::parse(&text)?;
    cfg.validate()?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    let start = Instant::now();
    let outcome = pool.install(|| experiments::run(&cfg, base_dir))?;
    let total = start.elapsed().as_secs_f64();
    let dir = out.unwrap_or_else(|| Path::new("out").join(&cfg.name));
    artifacts::write(&dir, &cfg, &outcome, total)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", dir.display());
    Ok(())
}

fn cell(a: f64, b: f64, theta: f64, samples: usize) -> Result<()> {
    let profile = PeriodicProfile::two_phase(a, b, theta).map_err(|e| SchemaError {
        path: "theta".into(),
        message: e.to_string(),
    })?;
    let mut out = io::stdout().lock();
    writeln!(out, "lambda = {:?}", cell_lambda(&profile))?;
    if samples >= 2 {
        writeln!(out, "tau,h,v")?;
        for row in experiments::cell_table(&profile, samples) {
            writeln!(out, "{row}")?;
        }
    }
    Ok(())
}

fn oracle(name: Oracle) -> Result<()> {
    let stdin = io::stdin().lock();
    let mut out = io::stdout().lock();
    for (k, line) in stdin.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = match vals {
            Ok(v) if v.len() >= 2 => v,
            // a header row
            Err(_) if k == 0 => continue,
            _ => {
                return Err(SchemaError {
                    path: format!("stdin line {}", k + 1),
                    message: format!("expected `x[,y],t`, got {line:?}"),
                }
                .into())
            }
        };
        let (x, t) = vals.split_at(vals.len() - 1);
        let t = t[0];
        let v = match name {
            Oracle::TwoBumpsW => example_two_bumps(x, t).0,
            Oracle::TwoBumpsD => example_two_bumps(x, t).1,
            Oracle::BoundedSpeedW => example_bounded_speed_w(x, t),
            Oracle::BoundedSpeedD => example_bounded_speed_d(x, t),
            Oracle::HopfLaxTwoBumps => hopf_lax_w(&two_bump_u0, x, t, 2000),
        };
        writeln!(out, "{line},{v:?}")?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SchemaError>() || cause.is::<serde_json::Error>() {
            return EXIT_SCHEMA;
        }
        if let Some(e) = cause.downcast_ref::<levelset_core::Error>() {
            return match e {
                levelset_core::Error::NumericalBlowup { .. } => EXIT_BLOWUP,
                levelset_core::Error::Io(_) => EXIT_IO,
                levelset_core::Error::Config(_) | levelset_core::Error::Data(_) => EXIT_SCHEMA,
                _ => 1,
            };
        }
        if cause.is::<io::Error>() {
            return EXIT_IO;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Report { dir } => artifacts::render_report(&dir).map(|s| print!("{s}")),
        Command::Cell { a, b, theta, samples } => cell(a, b, theta, samples),
        Command::Oracle { name } => oracle(name),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
