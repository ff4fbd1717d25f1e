use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wtca_cli::bench::{cmd_bench, BenchOptions, Suite};
use wtca_cli::bound::cmd_bound;
use wtca_cli::config::RunConfig;
use wtca_cli::fixture::{self, FixtureOptions};
use wtca_cli::train::cmd_train;
use wtca_cli::{CliError, CliResult};

/// Value function approximations for finite-horizon MDPs with bounds.
#[derive(Parser, Debug)]
#[command(name = "wtca", version)]
struct Cli {
    /// Worker threads; all results are identical for every count.
    #[arg(long, global = true, env = "WTCA_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "WTCA_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit weights with the method of a configuration file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate lower and upper bounds of trained weights.
    Bound {
        #[arg(long)]
        config: PathBuf,
        /// One or more weights.json files.
        #[arg(long, num_args = 1.., required = true)]
        weights: Vec<PathBuf>,
    },
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Emit or check finite instance documents.
    #[command(subcommand)]
    Fixture(FixtureCommand),
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// bermudan-T36, bermudan-T100, ethanol-T24, ethanol-T36 or fixtures.
    suite: String,
    /// Training seconds per method and instance.
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 500)]
    inner: usize,
    /// Only instances whose label contains one of these strings.
    #[arg(long, value_delimiter = ',')]
    instances: Vec<String>,
    /// Record bounds every this many iterations.
    #[arg(long, default_value_t = 0)]
    cadence: usize,
    #[arg(long, default_value_t = 2_000)]
    convergence_paths: usize,
    #[arg(long, default_value_t = 5)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum FixtureCommand {
    /// Write the JSON document of a built-in fixture.
    Emit {
        /// two_stage_stopping, single_action, stopping_chain, switching or random.
        kind: String,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        #[arg(long, default_value_t = 4)]
        atoms: usize,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        #[arg(long, default_value_t = 0.05)]
        payoff_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
        rewards: Vec<f64>,
        /// Write to this file instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Parse a document, build the instance and print its optimal value.
    Validate { file: PathBuf },
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let s = cmd_train(&cfg, &cli.out)?;
            println!("{} on {}: {} iterations, {:.2}s, written to {}", s.method.as_str(), s.instance, s.iterations_run, s.wall_seconds, cli.out.display());
        }
        Command::Bound { config, weights } => {
            let cfg = RunConfig::load(&config)?;
            let s = cmd_bound(&cfg, &weights, &cli.out)?;
            for r in &s.rows {
                println!("{:<6} {:<6} {:?} {:.6} ({:.6})", r.method, r.instance, r.bound, r.mean, r.se);
            }
        }
        Command::Bench(a) => {
            let suite: Suite = a.suite.parse()?;
            let opts = BenchOptions {
                budget_seconds: a.budget_seconds,
                paths: a.paths,
                inner_samples: a.inner,
                instances: a.instances,
                cadence: a.cadence,
                convergence_paths: a.convergence_paths,
                seed: a.seed,
            };
            let s = cmd_bench(suite, &opts, &cli.out)?;
            for r in &s.rows {
                println!("{:<24} {:<6} {:?} {:.6} ({:.6})", r.instance, r.method, r.bound, r.mean, r.se);
            }
        }
        Command::Fixture(FixtureCommand::Emit { kind, horizon, atoms, states, actions, gamma, payoff_scale, seed, rewards, output }) => {
            let opts = FixtureOptions { horizon, atoms, states, actions, gamma, payoff_scale, seed, rewards };
            let text = fixture::emit(&fixture::fixture_spec(&kind, &opts)?)?;
            match output {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
        }
        Command::Fixture(FixtureCommand::Validate { file }) => {
            let v = fixture::validate(&file)?;
            println!("{}: horizon {}, gamma {}, optimal value {:.12}", v.name, v.horizon, v.gamma, v.value);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
