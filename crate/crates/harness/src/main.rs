use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use misspec_harness::config::read_config;
use misspec_harness::error::{HarnessError, Result};
use misspec_harness::hard_spec::{generate, parse_hard_spec, write_rejections};
use misspec_harness::instance_file::{read_instance, write_instance};
use misspec_harness::runner::{run, summarize, write_csv};

#[derive(Parser)]
#[command(name = "misspec", about = "Run and check misspecified sparse bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of a config and write the CSV records.
    Run { config: PathBuf },
    /// Like `run`, then print per-point aggregates.
    Sweep { config: PathBuf },
    /// Re-check every invariant of an instance file.
    Validate { instance: PathBuf },
    /// Draw a validated planted-index instance from a spec file.
    GenerateHard { spec: PathBuf, out: PathBuf },
}

fn csv_out(config_output: Option<PathBuf>, records: &[misspec_harness::runner::RunRecord]) -> Result<()> {
    match config_output {
        Some(path) => {
            let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            write_csv(records, BufWriter::new(f))
        }
        None => write_csv(records, std::io::stdout().lock()),
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = read_config(&config)?;
            let records = run(&cfg)?;
            csv_out(cfg.output.clone(), &records)
        }
        Command::Sweep { config } => {
            let cfg = read_config(&config)?;
            let records = run(&cfg)?;
            csv_out(cfg.output.clone(), &records)?;
            for row in summarize(&records) {
                let ratio = row.worst_ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
                eprintln!(
                    "{} d={} s={} epsilon={} k={}: runs={} mean_queries={:.1} max_error={:.4} worst_error/bound={} within_bound={}/{}",
                    row.algorithm.name(),
                    row.d,
                    row.s,
                    row.epsilon,
                    row.k,
                    row.runs,
                    row.mean_queries,
                    row.max_error,
                    ratio,
                    row.satisfied,
                    row.runs
                );
            }
            Ok(())
        }
        Command::Validate { instance } => {
            let file = read_instance(&instance)?;
            let checks = file.check();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            match checks.iter().find(|c| !c.passed) {
                Some(c) => Err(HarnessError::Invariant(c.name.to_string())),
                None => Ok(()),
            }
        }
        Command::GenerateHard { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| HarnessError::io(&spec, e))?;
            let spec = parse_hard_spec(&text, &spec.display().to_string())?;
            let result = generate(&spec)?;
            write_instance(&out, &result.file)?;
            if !result.rejections.is_empty() {
                let path = out.with_extension("rejections.csv");
                let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
                write_rejections(&result.rejections, BufWriter::new(f))?;
            }
            eprintln!("wrote {} (k={}, seed {})", out.display(), result.file.k(), result.seed);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
