use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dpbeam::runner::{cmd_design, cmd_pattern, cmd_simulate, cmd_verify, ExperimentConfig, PatternTarget, VerifyOptions};
use dpbeam::Error;

/// Hybrid beamforming codebooks for dual-polarized planar arrays.
#[derive(Debug, Parser)]
#[command(name = "dpbeam", version)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for the simulation (overrides `simulation.rng_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `dotted.key=value` override, applied after the config file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a codebook and write it to the output directory.
    Design {
        /// Write the matched narrow-beam baseline instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Write a gain raster CSV for one region (`p,q`) or `all`.
    Pattern {
        codebook: PathBuf,
        #[arg(long, default_value = "all")]
        region: String,
        /// Raster points per axis.
        #[arg(long, default_value_t = 257)]
        resolution: usize,
    },
    /// Monte-Carlo data rates of one or more codebooks.
    Simulate {
        #[arg(required = true)]
        codebooks: Vec<PathBuf>,
    },
    /// Numerical checks of the gain identities.
    Verify {
        /// Scale the ideal gain (negative-control hook).
        #[arg(long, default_value_t = 1.0, hide = true)]
        perturb_gain: f64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("simulation.rng_seed={seed}"));
    }
    if let Some(out) = &cli.out {
        let s = out.to_str().ok_or_else(|| Error::Config {
            key: "output_dir".into(),
            message: "path is not valid UTF-8".into(),
        })?;
        overrides.push(format!("output_dir={}", toml::Value::String(s.to_string())));
    }
    ExperimentConfig::load(cli.config.as_deref(), &overrides)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let cfg = load_config(cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Design { baseline } => {
            cmd_design(&cfg, *baseline, &mut out)?;
        }
        Command::Pattern {
            codebook,
            region,
            resolution,
        } => {
            let target: PatternTarget = region.parse()?;
            cmd_pattern(&cfg, codebook, target, (*resolution, *resolution), &mut out)?;
        }
        Command::Simulate { codebooks } => {
            cmd_simulate(&cfg, codebooks, &mut out)?;
        }
        Command::Verify { perturb_gain } => {
            let opts = VerifyOptions {
                g_scale: *perturb_gain,
                ..VerifyOptions::default()
            };
            let report = cmd_verify(&cfg, opts, &mut out)?;
            out.flush()?;
            return Ok(report.all_passed());
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
