use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mqpulse_cli::{export_shape, run_analyze, run_optimize, validate_config, ExportFormat};

/// Design and analyze multiple-quantum excitation pulses for spin-3/2
/// nuclei under magic-angle spinning.
#[derive(Parser)]
#[command(name = "mqpulse", version, about)]
struct Cli {
    /// Size of the rayon thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizations described by a TOML config file.
    Optimize {
        config: PathBuf,
        /// Override run.base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Produce quartile/spectrum/energy tables for a completed run
    /// directory.
    Analyze { run_dir: PathBuf },
    /// Convert a stored pulse to a shape file.
    Export {
        pulse: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        /// Output path (default: pulse path with a new extension).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Vendor,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to configure the thread pool")?;
    }

    match cli.command {
        Command::Optimize { config, seed, output } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read {}", config.display()))?;
            let mut cfg = validate_config(&text)?;
            if let Some(seed) = seed {
                cfg.run.base_seed = seed;
            }
            if let Some(output) = output {
                cfg.run.output_dir = output.display().to_string();
            }
            let manifest = run_optimize(&cfg)?;
            println!(
                "completed {} runs ({} failed) in {:.1} s -> {}",
                manifest.runs.len(),
                manifest.failures.len(),
                manifest.wall_seconds_total,
                cfg.run.output_dir
            );
            for rec in &manifest.runs {
                println!(
                    "  {}{} seed {:5}  E[F] = {:.4}  ({} iterations, {})",
                    rec.mode,
                    rec.basis_size.map_or(String::new(), |m| format!("_m{m}")),
                    rec.seed,
                    rec.final_fidelity,
                    rec.iterations,
                    rec.termination
                );
            }
            if manifest.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in &manifest.failures {
                    eprintln!("run failure (seed {}): {}", f.seed, f.message);
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Analyze { run_dir } => {
            let artifacts = run_analyze(&run_dir)?;
            println!("wrote {}", artifacts.quartile_table.display());
            for p in &artifacts.spectrum_tables {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", artifacts.energy_table.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { pulse, format, output } => {
            let format = match format {
                Format::Csv => ExportFormat::Csv,
                Format::Vendor => ExportFormat::Vendor,
            };
            let out = match output {
                Some(p) => p,
                None => {
                    let ext = match format {
                        ExportFormat::Csv => "csv",
                        ExportFormat::Vendor => "vendor.txt",
                    };
                    pulse.with_extension(ext)
                }
            };
            if out == pulse {
                bail!("refusing to overwrite the input pulse file; pass --output");
            }
            export_shape(&pulse, format, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
