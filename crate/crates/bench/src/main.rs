use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cais_bench::config::{builtin_presets, parse_spec, ConfigError, ExperimentSpec};
use cais_bench::suite::{run_suite, HarnessError};
use cais_bench::sweep::{sweep, write_sweep, SweepParam};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cais", version, about = "Covariance adaptive importance sampling benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Master seed, replacing the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicates, replacing the config's `runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "cais-out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write iterations.csv, summary.csv and manifest.txt.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run each config at every value of one parameter and write an MSE table.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// One of sigma, n_t, D, transform, sampler.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the built-in experiment configs.
    Presets,
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentSpec, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| {
        ConfigError::Field { field: path.display().to_string(), message: format!("cannot read config: {e}") }
    })?;
    let mut spec = parse_spec(&text)?;
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    if let Some(runs) = o.runs {
        spec.runs = runs;
    }
    Ok(spec.resolve()?)
}

/// Prints to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let spec = load(&config, &overrides)?;
            let result = run_suite(&spec, overrides.workers, &overrides.out)?;
            let s = &result.summary;
            println!(
                "{} runs={} mse_mean={:.6e} z_hat={:.6e} final_kl={} repairs={} -> {}",
                s.method,
                s.runs,
                s.mse_mean,
                s.z_hat,
                s.final_kl.map_or("n/a".to_string(), |k| format!("{k:.6e}")),
                s.repair_events,
                overrides.out.display()
            );
        }
        Command::Sweep { configs, param, values, overrides } => {
            let param: SweepParam = param.parse()?;
            let specs = configs.iter().map(|c| load(c, &overrides)).collect::<Result<Vec<_>, _>>()?;
            let result = sweep(&specs, param, &values, overrides.workers)?;
            write_sweep(&result, &overrides.out)?;
            let table: Vec<String> = result.table().iter().map(|l| l.join("\t")).collect();
            emit(&table.join("\n"));
        }
        Command::Presets => {
            let listing: Vec<String> =
                builtin_presets().iter().map(|(name, about, text)| format!("# {name}: {about}\n{text}")).collect();
            emit(&listing.join("\n"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
