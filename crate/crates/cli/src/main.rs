use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod failure;

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "mimtwin", version, about = "Membrane-in-the-middle optomechanics digital twin")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in configuration: measured-heating, no-heating, literature-heating.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cavity, mode, membrane and coupling design figures.
    Design,
    /// Resonance table and coupling-vs-position curve.
    SweepPosition {
        #[arg(long, default_value_t = 24)]
        n_modes: u64,
    },
    /// Full cooling series: spectra, fits, report and plot data.
    SimulateSeries,
    /// Re-fit stored spectrum or error-signal files.
    Fit {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Regress A/P² against power across the fitted files.
        #[arg(long, conflicts_with = "pdh")]
        powerlaw: bool,
        /// Treat inputs as PDH error-signal sweeps and fit the linewidth.
        #[arg(long)]
        pdh: bool,
    },
    /// Print the resolved configuration as JSON.
    ShowConfig,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = commands::load_config(cli.config.as_deref(), cli.preset.as_deref(), cli.seed)?;
    let out = cli.out.clone();
    match cli.command {
        Command::Design => commands::design(&cfg, out.as_deref()),
        Command::SweepPosition { n_modes } => commands::sweep_position(&cfg, n_modes, &commands::out_dir(&cfg, out)),
        Command::SimulateSeries => commands::simulate_series(&cfg, &commands::out_dir(&cfg, out)),
        Command::Fit { files, powerlaw, pdh } => commands::fit(&cfg, &files, powerlaw, pdh, out.as_deref()),
        Command::ShowConfig => commands::emit(&(cfg.to_json() + "\n")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mimtwin: {f}");
            ExitCode::from(f.code())
        }
    }
}
