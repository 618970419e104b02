use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eulerlab::runner::{run, validate, Mode, RunConfig};
use eulerlab::Error;

/// Periodic-box Euler laboratory for vorticity blow-up criteria.
#[derive(Parser)]
#[command(name = "eulerlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration; flags given on the command line override it.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: RunConfig,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a flow with probes and evaluate the functionals and monitors.
    Simulate(Common),
    /// Integrate the aligned-element model for an ensemble of elements.
    Odemodel(Common),
    /// Run the fixed-frame vortex tube scenario.
    Tube(Common),
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

fn load(common: &Common, mode: Mode) -> Result<RunConfig, Error> {
    let base = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.overlay(&common.overrides);
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(Error::Config(format!(
                "mode: config file says `{}` but the `{}` subcommand was used",
                m.name(),
                mode.name()
            )));
        }
    }
    cfg.mode = Some(mode);
    // grid and preset default silently on the command line
    if mode == Mode::Simulate {
        cfg.n.get_or_insert(32);
        cfg.preset.get_or_insert_with(|| "taylor_green".into());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (common, mode) = match &cli.command {
        Command::Simulate(c) => (c, Mode::Simulate),
        Command::Odemodel(c) => (c, Mode::Odemodel),
        Command::Tube(c) => (c, Mode::Tube),
        Command::Validate { config } => {
            let cfg = RunConfig::load(config)?;
            let errs = validate(&cfg);
            if errs.is_empty() {
                println!("{}: ok", config.display());
                return Ok(());
            }
            for e in &errs {
                eprintln!("{}: {e}", config.display());
            }
            return Err(Error::Config(format!("{} problem(s)", errs.len())));
        }
    };
    let cfg = load(common, mode)?;
    let summary = run(&cfg)?;
    println!(
        "wrote {} files to {}",
        summary.manifest.outputs.len() + 1,
        summary.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
