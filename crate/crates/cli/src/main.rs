use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qfl_cli::config::{load_config, resolve_data_dir};
use qfl_cli::error::{CliError, Result};
use qfl_cli::experiment::run_experiment;
use qfl_cli::output::emit_metrics_csv;
use qfl_cli::plot::emit_plots;
use qfl_cli::presets::{self, PRESETS};
use qfl_core::data::images::inventory;

/// Quantum federated learning simulator.
#[derive(Debug, Parser)]
#[command(name = "qfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of a config file or preset, then write metrics and charts.
    Run {
        /// Path to a TOML config, or a preset name.
        config: String,
        /// Dataset directory; overrides QFL_DATA_DIR and the config.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Results directory; overrides the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Redraw charts from the run directories under OUT_DIR.
    Plot { out_dir: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: String },
    /// Dataset utilities.
    Datasets {
        #[command(subcommand)]
        command: DatasetsCommand,
    },
    /// List built-in presets.
    Presets,
}

#[derive(Debug, Subcommand)]
enum DatasetsCommand {
    /// Report which dataset files under DATA_DIR can be read.
    Check { data_dir: PathBuf },
}

fn run(config: &str, data_dir: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let cfg = presets::resolve(config)?;
    let env = std::env::var_os("QFL_DATA_DIR");
    let data_dir = resolve_data_dir(&cfg, data_dir, env.as_deref());
    let out_dir = out_dir.map_or_else(|| cfg.out_dir.clone(), Path::to_path_buf);
    let records = run_experiment(&cfg, &data_dir)?;
    for r in &records {
        eprintln!(
            "{} seed {}: mean final test accuracy {:.4}, {} messages, {} bytes, {:.1}s",
            r.name,
            r.seed,
            r.mean_final_test_accuracy(),
            r.ledger.messages_sent,
            r.ledger.payload_bytes,
            r.wall_clock_s
        );
    }
    let dir = emit_metrics_csv(&cfg, &records, &out_dir)?;
    println!("{}", dir.display());
    for path in emit_plots(&out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn validate(config: &str) -> Result<()> {
    let path = Path::new(config);
    let cfg = if path.exists() { load_config(path)? } else { presets::resolve(config)? };
    cfg.validate()?;
    println!("{}: ok ({})", cfg.name, cfg.config_hash());
    Ok(())
}

fn check_datasets(data_dir: &Path) -> Result<()> {
    let mut missing = Vec::new();
    for status in inventory(data_dir) {
        match &status.detail {
            Ok(d) => println!("ok      {}  {d}", status.path.display()),
            Err(e) => {
                println!("error   {}  {e}", status.path.display());
                missing.push(status.path.display().to_string());
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("unreadable: {}", missing.join(", "))))
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, data_dir, out_dir } => run(&config, data_dir.as_deref(), out_dir.as_deref()),
        Command::Plot { out_dir } => emit_plots(&out_dir).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
        Command::Validate { config } => validate(&config),
        Command::Datasets {
            command: DatasetsCommand::Check { data_dir },
        } => check_datasets(&data_dir),
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
