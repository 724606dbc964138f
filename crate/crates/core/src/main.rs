use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use distkit::dimreduce::{jl_min_dimension, ReductionConfig};
use distkit::distance::DEFAULT_MC_SAMPLES;
use distkit::pipeline::{self, format_value, read_data_matrix, RunConfig};
use distkit::{Error, Result};

#[derive(Parser)]
#[command(name = "distkit", version, about = "Bhattacharyya distances between markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long)]
        vol_window: Option<usize>,
        #[arg(long)]
        sub_universe: Option<usize>,
        /// Base seed for sub-universe sampling and per-cell draws.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Distance between two numeric CSV matrices (rows = variables,
    /// columns = observations).
    Distance {
        first: PathBuf,
        second: PathBuf,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Seed of the random projection and Monte Carlo draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        mc_samples: usize,
    },
    /// Smallest projected dimension that preserves pairwise distances of `n`
    /// points within a factor 1 ± epsilon.
    JlBound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        epsilon: f64,
    },
}

#[derive(Args)]
struct ReductionArgs {
    #[arg(long, value_parser = ["pca", "jl"])]
    reduction: Option<String>,
    #[arg(long)]
    sig_digits: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_parser = ["mvn", "truncated"])]
    family: Option<String>,
}

impl ReductionArgs {
    fn apply(&self, config: &mut RunConfig) -> Result<()> {
        let here = Path::new(".");
        let pairs = [
            ("reduction", self.reduction.clone()),
            ("sig_digits", self.sig_digits.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("family", self.family.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, &v, here)?;
            }
        }
        Ok(())
    }
}

fn run_pipeline(config: RunConfig) -> Result<ExitCode> {
    let outcome = pipeline::run(&config)?;
    for path in &outcome.files {
        println!("{}", path.display());
    }
    if outcome.has_error_cells() {
        error!("some cells could not be computed; see ERR entries in the reports");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, reduction, vol_window, sub_universe, seed, out, format, mc_samples } => {
            let mut cfg = RunConfig::from_file(&config)?;
            reduction.apply(&mut cfg)?;
            let cwd = Path::new(".");
            let overrides = [
                ("vol_window", vol_window.map(|v| v.to_string())),
                ("sub_universe", sub_universe.map(|v| v.to_string())),
                ("seed", seed.map(|v| v.to_string())),
                ("format", format),
                ("mc_samples", mc_samples.map(|v| v.to_string())),
            ];
            for (key, value) in overrides {
                if let Some(v) = value {
                    cfg.set(key, &v, cwd)?;
                }
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            run_pipeline(cfg)
        }
        Command::Distance { first, second, reduction, seed, mc_samples } => {
            let mut cfg = RunConfig { mc_samples, ..Default::default() };
            reduction.apply(&mut cfg)?;
            cfg.reduction.validate()?;
            let read = |p: &Path| -> Result<_> {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                read_data_matrix(&text)
            };
            let (a, b) = (read(&first)?, read(&second)?);
            let reduction = ReductionConfig { jl_seed: seed, ..cfg.reduction };
            let d = pipeline::matrix_distance(&a, &b, &reduction, cfg.family, cfg.mc_samples)?;
            println!("{}", format_value(d));
            Ok(ExitCode::SUCCESS)
        }
        Command::JlBound { n, epsilon } => {
            println!("{}", jl_min_dimension(n, epsilon)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

