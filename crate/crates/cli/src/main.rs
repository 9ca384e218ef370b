//! Experiment runner for the photoacoustic reconstruction toolkit.
//!
//! Verbs: `phantom`, `simulate`, `reconstruct`, `sweep`, `validate`.
//! Exit codes: 0 success, 1 validation failure, 2 config error, 3 I/O error.

use clap::{Parser, Subcommand};
use patfbp_core::config::{preset, ExperimentConfig};
use patfbp_core::pipeline;
use patfbp_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "patfbp", version, about = "Photoacoustic FBP reconstruction experiments")]
struct Cli {
    /// Path to a TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Name of a committed preset (paper-defaults, desk-scale).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the base noise seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (reserved; the current implementation is
    /// single-threaded and accepts only 1).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the configured phantom and write field + preview image.
    Phantom,
    /// Run the forward model and write trace files for all kinds and noise levels.
    Simulate,
    /// Run the reconstruction battery on simulated traces and emit the error table.
    Reconstruct,
    /// Compute error curves over the configured end times.
    Sweep,
    /// Run the validation suites and write a JSON report.
    Validate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => preset("desk-scale")?,
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either --config or --preset, not both".into()))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Io(_) | Error::Format(_) | Error::MissingTrace(_) => 3,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    if cli.threads != 1 {
        return Err(Error::Config(format!(
            "--threads {} not supported; this build is single-threaded",
            cli.threads
        )));
    }
    match cli.command {
        Command::Phantom | Command::Simulate | Command::Reconstruct | Command::Sweep => {
            let cfg = load_config(cli)?;
            let summary = match cli.command {
                Command::Phantom => pipeline::cmd_phantom(&cfg, &cli.out)?,
                Command::Simulate => pipeline::cmd_simulate(&cfg, &cli.out)?,
                Command::Reconstruct => pipeline::cmd_reconstruct(&cfg, &cli.out)?,
                Command::Sweep => pipeline::cmd_sweep(&cfg, &cli.out)?,
                Command::Validate => unreachable!(),
            };
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            for n in &summary.notes {
                println!("note: {n}");
            }
            Ok(0)
        }
        Command::Validate => {
            let report = pipeline::cmd_validate();
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("validation.json");
            std::fs::write(&path, pipeline::report_to_json(&report))?;
            for s in &report.suites {
                println!(
                    "[{}] {:<28} measured {:>12.3e}  tolerance {:>9.1e}  ({:.1}s)",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.measured,
                    s.tolerance,
                    s.seconds
                );
            }
            println!("report: {}", path.display());
            Ok(if report.all_passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
