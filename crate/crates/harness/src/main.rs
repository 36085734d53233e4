use clap::{Args, Parser, Subcommand};
use saddle_harness::config::InstanceOnly;
use saddle_harness::estimate::diagnose;
use saddle_harness::solve::write_json;
use saddle_harness::{cmd_estimate, cmd_grid, cmd_solve, cmd_verify, ExperimentConfig, HarnessError, Overrides, Suite, VerifyOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "saddle", version, about = "Primal-dual saddle-point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver of a configuration; write CSV traces and summary.json.
    Solve(RunArgs),
    /// Run only the grid searches of a configuration; write sweeps and grid.json.
    Grid(RunArgs),
    /// Check convergence certificates on seeded random instances.
    Verify {
        /// theorem1, iteration_budget, appendixB, props or svrg_halving.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steps per run (epochs for svrg_halving).
        #[arg(long)]
        iters: Option<usize>,
        /// props: use this multiple of the primal step bound as eta1.
        #[arg(long)]
        eta1_scale: Option<f64>,
        /// Write verify_<suite>.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the constants of an instance and the schedule they imply.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Write estimate.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides outputs.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First seed of the stochastic solvers.
    #[arg(long)]
    seed: Option<u64>,
    /// Grad-unit budget per run.
    #[arg(long)]
    budget: Option<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        Overrides {
            seed: self.seed,
            budget: self.budget,
        }
        .apply(&mut cfg);
        cfg.validate(&self.config.display().to_string())?;
        let out = self.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
        Ok((cfg, out))
    }
}

enum Failure {
    Validation(anyhow::Error),
    Refuted,
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let detail = diagnose(&e);
        let validation = e.is_validation();
        let err = match detail {
            Some(d) => anyhow::Error::new(e).context(d),
            None => anyhow::Error::new(e),
        };
        if validation {
            Failure::Validation(err)
        } else {
            Failure::Runtime(err)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn save(dir: &Option<PathBuf>, file: &str, value: &impl serde::Serialize) -> Result<(), Failure> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_json(&Path::new(dir).join(file), value)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(args) => {
            let (cfg, out) = args.load()?;
            let summary = cmd_solve(&cfg, &out)?;
            for s in &summary.solvers {
                let f = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.3e}"));
                println!(
                    "{:<16} {:?} final dist_x {} slope {} units-to-target {}",
                    s.name,
                    s.status,
                    f(s.final_dist_x),
                    f(s.slope),
                    f(s.units_to_target)
                );
            }
            println!("wrote {}", out.join("summary.json").display());
        }
        Command::Grid(args) => {
            let (cfg, out) = args.load()?;
            let entries = cmd_grid(&cfg, &out)?;
            print_json(&entries).map_err(Failure::Runtime)?;
        }
        Command::Verify {
            suite,
            trials,
            seed,
            iters,
            eta1_scale,
            out,
        } => {
            let suite = Suite::parse(&suite).ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Failure::Validation(anyhow::anyhow!("unknown suite {suite:?}; expected one of {}", names.join(", ")))
            })?;
            if trials == 0 {
                return Err(Failure::Validation(anyhow::anyhow!("--trials must be at least 1")));
            }
            let mut opts = VerifyOptions::new(suite, trials, seed);
            opts.iters = iters;
            opts.eta1_scale = eta1_scale;
            let report = cmd_verify(&opts)?;
            println!("{}", report.line());
            save(&out, &format!("verify_{}.json", suite.name()), &report)?;
            if report.refuted() {
                return Err(Failure::Refuted);
            }
        }
        Command::Estimate { config, out } => {
            let spec = InstanceOnly::load(&config)?;
            let report = cmd_estimate(&spec)?;
            print_json(&report).map_err(Failure::Runtime)?;
            save(&out, "estimate.json", &report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Refuted) => {
            eprintln!("certificate refuted");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {:#}", e.context("run failed"));
            ExitCode::from(1)
        }
    }
}
