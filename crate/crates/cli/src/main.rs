use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use glc_lab::{load, run, Subcommand};

/// Discrete Ginzburg-Landau controllability laboratory.
#[derive(Debug, Parser)]
#[command(name = "glc-lab", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// `key = value` configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            eprintln!("{}", Args::command().render_usage());
            return ExitCode::from(2);
        }
    };
    let cfg = match load(args.config.as_deref(), &args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("glc-lab: config error: {e}");
            return ExitCode::from(2);
        }
    };
    for w in &cfg.warnings {
        eprintln!("glc-lab: warning: {w}");
    }
    match run(args.subcommand, &cfg, &args.out) {
        Ok(report) => {
            for s in &report.sections {
                let verdict = if s.passed { "PASS" } else { "FAIL" };
                eprintln!("{verdict} {} ({:.2} s)", s.name, s.wall_seconds);
            }
            for f in report.failed_checks() {
                eprintln!("  {f}");
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("glc-lab: {e}");
            ExitCode::from(3)
        }
    }
}
