//! Batch scenario runner: `simulate <config.toml> --out DIR`.
//!
//! Reads one TOML scenario config, evaluates every sweep point, and writes
//! one result table (CSV or JSON) into the output directory, named after the
//! config `id`. Identical configs reproduce byte-identical files; timing
//! chatter goes to stderr only.
//!
//! Exit codes: 0 success; 1 a sweep point or `--verify` check failed
//! numerically (the table is still written, failed records carry their error
//! string); 2 the config or environment is unusable (nothing is written).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use exciton_battery::Error;
use exciton_battery::config::load_config;
use exciton_battery::runner::{self, OutputFormat};

#[derive(Parser)]
#[command(name = "simulate", version, about = "Evaluate a scenario config and emit result tables")]
struct Cli {
    /// Scenario description (TOML).
    config: PathBuf,

    /// Directory the result table is written into (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Result file format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for sweep points; 0 means one per CPU.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Also run the seeded invariant suite and fail on any violation.
    #[arg(long)]
    verify: bool,
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

/// Config and environment problems exit 2; anything numerical exits 1.
fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::Io(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }

    let started = Instant::now();
    let records = match runner::run(&config, cli.threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let elapsed = started.elapsed();

    let path = match runner::emit(&records, cli.format.into(), &cli.out, &config.id) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };

    let failed: Vec<_> = records.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!(
            "point {} failed: {}",
            r.sweep_index,
            r.error.as_deref().unwrap_or("")
        );
    }
    let slowest = records
        .iter()
        .map(|r| r.wall_time)
        .max()
        .unwrap_or_default();
    eprintln!(
        "evaluated {} point(s) in {:.2?} (slowest {:.2?})",
        records.len(),
        elapsed,
        slowest
    );
    println!(
        "wrote {} ({} record(s), {} failed)",
        path.display(),
        records.len(),
        failed.len()
    );

    let mut verify_failed = false;
    if cli.verify {
        for check in runner::verify_suite(config.seed) {
            let status = if check.passed { "ok" } else { "FAIL" };
            println!("verify {}: {status} — {}", check.name, check.detail);
            verify_failed |= !check.passed;
        }
    }

    if !failed.is_empty() || verify_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
