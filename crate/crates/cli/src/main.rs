use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photon_landscape::{Error, Result};
use scenario::{exit_code, parse_config, parse_values, run_scenario, run_sweep, Scenario};

/// Photon-gas potential landscapes: modes, populations and spectra.
#[derive(Parser)]
#[command(name = "plscape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its outputs.
    Simulate {
        config: PathBuf,
        /// Output directory; defaults to `scenario.out` or `out/<kind>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a scenario without solving it.
    Validate { config: PathBuf },
    /// Run the scenario once per parameter value.
    Sweep {
        config: PathBuf,
        /// Entry to vary, e.g. `geometry.d`.
        #[arg(long)]
        param: String,
        /// `start:stop:step` (inclusive) or a comma list.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut s = parse_config(config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn out_dir(s: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| s.out.clone())
        .unwrap_or_else(|| Path::new("out").join(s.kind.as_str()))
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let s = parse_config(&config)?;
            println!("{}: valid {} scenario", config.display(), s.kind.as_str());
        }
        Command::Simulate { config, out, seed, threads } => {
            set_threads(threads)?;
            let s = load(&config, seed)?;
            let out = out_dir(&s, out);
            let report = run_scenario(&s, &out)?;
            println!("wrote {} files to {}", report.files.len() + 1, out.display());
            for (k, v) in &report.results {
                println!("  {k} = {v}");
            }
        }
        Command::Sweep { config, param, values, out, seed, threads } => {
            set_threads(threads)?;
            let s = load(&config, seed)?;
            let values = parse_values(&values)?;
            let out = out_dir(&s, out);
            let report = run_sweep(&s, &param, &values, &out)?;
            for (v, r) in &report.points {
                match r {
                    Ok(rep) => println!("{param} = {v}: ok ({})", rep.out.display()),
                    Err(e) => eprintln!("{param} = {v}: failed: {e}"),
                }
            }
            if let Some(curve) = &report.coupling {
                println!("J(d) strictly decreasing: {}", curve.is_strictly_decreasing());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
