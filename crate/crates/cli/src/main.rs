//! `cvgauss`: runs oscillator, threshold and ring-cavity scenarios and writes
//! CSV tables plus a JSON manifest per run.

mod config;
mod error;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Config, Scenario};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cvgauss", version, about = "Gaussian dynamics of damped oscillators and ring-cavity squeezing")]
struct Cli {
    /// TOML config, or a JSON manifest from an earlier run.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in parameter set: fig2, fig3, fig4, fig5, threshold, ring-cavity.
    #[arg(long)]
    preset: Option<String>,

    /// Output directory.
    #[arg(long, env = "CVGAUSS_OUT_DIR")]
    out: Option<PathBuf>,

    /// Overrides the scenario of the config or preset.
    #[arg(long)]
    scenario: Option<Scenario>,

    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match (&cli.config, &cli.preset, cli.scenario) {
        (Some(path), _, _) => Config::load(path)?,
        (None, Some(name), _) => presets::preset(name).ok_or_else(|| {
            CliError::Config(format!("unknown preset `{name}` (available: {})", presets::NAMES.join(", ")))
        })?,
        (None, None, Some(s)) => presets::for_scenario(s),
        (None, None, None) => {
            return Err(CliError::Config("nothing to run: give --config, --preset or --scenario".into()))
        }
    };
    if let Some(s) = cli.scenario {
        cfg.scenario = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvgauss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn real_main(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let jobs = cfg.jobs()?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let dir = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("cvgauss-out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;

    let mut first_err = None;
    for (job, result) in jobs.iter().zip(run::run_all(&jobs, &dir, cli.jobs)) {
        match result {
            Ok(out) => println!("{}: {} -> {}", out.stem, out.summary, out.files.join(", ")),
            Err(e) => {
                eprintln!("{}: {e}", job.stem);
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}
