use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use ltadmm::harness::{run_experiment, ExperimentConfig};
use ltadmm::oracle::{solve_reference, DEFAULT_TOLERANCE};
use ltadmm::topology::parse_topology_spec;

#[derive(Parser)]
#[command(
    name = "ltadmm",
    version,
    about = "Decentralized ADMM simulator with local training and compressed communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its metrics as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the centralized minimizer of the configured problem.
    SolveRef {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, default_value_t = 5_000_000)]
        max_iterations: usize,
    },
    /// Print the Laplacian spectrum summary and the step-size bound on beta.
    Spectral {
        /// `ring:N`, `complete:N`, `path:N` or `edges:PATH`.
        #[arg(long)]
        topology: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 5)]
        tau: usize,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config =
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            output,
        } => {
            let config = load(&config, seed)?;
            if output.is_none() && config.output.is_none() {
                anyhow::bail!("no output path: pass --output or set `output` in the config");
            }
            let report = run_experiment(config, output.as_deref())?;
            let s = &report.summary;
            info!("ran {} rounds", s.rounds_run);
            println!("rounds_run {}", s.rounds_run);
            println!("final_grad_norm_sq {:e}", s.final_grad_norm_sq);
            println!("min_grad_norm_sq {:e}", s.min_grad_norm_sq);
            if let Some(reached) = s.reached_target {
                println!("reached_target {reached}");
            }
            if let Some(d) = &s.decay {
                println!("decay_median_ratio {}", d.median_ratio);
                println!("decay_r_squared {}", d.r_squared);
            }
        }
        Command::SolveRef {
            config,
            seed,
            tolerance,
            max_iterations,
        } => {
            let config = load(&config, seed)?;
            let topology = config.build_topology()?;
            let problems = config.build_problems(topology.node_count())?;
            let solution = solve_reference(&problems, tolerance, max_iterations)?;
            let x: Vec<String> = solution.x.iter().map(f64::to_string).collect();
            println!("x {}", x.join(" "));
            println!("gradient_norm {:e}", solution.gradient_norm);
            println!("iterations {}", solution.iterations);
        }
        Command::Spectral {
            topology,
            r,
            tau,
            rho,
        } => {
            let info = parse_topology_spec(&topology)?.spectral_info()?;
            println!("lambda_min_nonzero {}", info.lambda_min_nonzero);
            println!("lambda_max {}", info.lambda_max);
            println!("max_degree {}", info.max_degree);
            println!("beta_bound {}", info.max_beta_bound(r, tau, rho)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
