use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use photonic_pinn::runner::{cmd_eval, cmd_sweep_bits, cmd_train};

#[derive(Parser)]
#[command(version, about = "Forward-only PINN training on a simulated micro-ring weight bank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with a config file and write curves, grid and checkpoint.
    Train {
        config: PathBuf,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a checkpoint on the configured grid.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Train once per (bit depth, seed) and summarize final errors.
    SweepBits {
        config: PathBuf,
        /// Comma-separated bit depths, e.g. 8,10,full.
        #[arg(long)]
        bits: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train { config, force } => cmd_train(&config, force).map(|r| {
            let last = r.history.records.last();
            println!(
                "iterations={} final_loss={} l2_rel={} l2_abs={} output={}",
                r.history.records.len(),
                last.map(|l| l.loss.total).unwrap_or(f64::NAN),
                r.grid.l2_rel,
                r.grid.l2_abs,
                r.output_dir.display()
            );
        }),
        Command::Eval {
            checkpoint,
            config,
            force,
        } => cmd_eval(&checkpoint, &config, force).map(|g| {
            println!("l2_rel={} l2_abs={}", g.l2_rel, g.l2_abs);
        }),
        Command::SweepBits {
            config,
            bits,
            seeds,
            force,
        } => cmd_sweep_bits(&config, &bits, seeds, force).map(|s| print!("{}", s.to_csv())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
