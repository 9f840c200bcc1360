use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stmcmc::samplers::KernelKind;
use stmcmc_cli::{compare, gaussian_tail, run, CliError, ExperimentConfig, Overrides};

/// Tempered sampling experiments: prior and posterior failure
/// probabilities, Bayesian updating and model evidence.
///
/// Settings come from a TOML config file. Flags replace single fields; the
/// STMCMC_OUTPUT_DIR environment variable replaces the output directory but
/// loses to --output-dir.
///
/// Exit codes: 0 success, 2 configuration error, 3 run aborted, 1 other.
#[derive(Parser)]
#[command(name = "stmcmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment and write its artifacts.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run configs that differ only in the kernel and tabulate their costs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        /// Directory for the runs and comparison.csv; defaults to the first
        /// config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Print closed-form reference values.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Tail probability of a standard normal coordinate.
    GaussianTail {
        #[arg(long, allow_hyphen_values = true)]
        threshold: f64,
    },
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    kappa_star: Option<f64>,
    #[arg(long)]
    rho_target: Option<f64>,
    #[arg(long, alias = "alpha-star")]
    target_rate: Option<f64>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeat: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            kernel: f.kernel,
            n: f.n,
            kappa: f.kappa,
            kappa_star: f.kappa_star,
            rho_target: f.rho_target,
            target_rate: f.target_rate,
            gain: f.gain,
            seed: f.seed,
            repeat: f.repeat,
            workers: f.workers,
            output_dir: f.output_dir,
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, flags } => {
            let cfg = ExperimentConfig::load(&config, &flags.into())?;
            let m = run(&cfg)?;
            let r = &m.result;
            for rep in &r.repeats {
                let mut line = format!("rep {} seed {}:", rep.rep, rep.seed);
                if let (Some(p), Some(s)) = (rep.probability, rep.sigma) {
                    line += &format!(" p = {p:.4e} +- {s:.2e}");
                }
                if let Some(z) = rep.log_evidence {
                    line += &format!(" log evidence = {z:.4}");
                }
                println!("{line} levels {} evaluations {}", rep.levels(), rep.evaluations);
            }
            for row in &r.ess_table {
                println!(
                    "rho {}: predicted {:.1} simulated {:.1} learning {}",
                    row.rho, row.predicted, row.simulated, row.learning
                );
            }
            if let Some(c) = r.coverage_3sigma {
                println!("3-sigma coverage {c:.3}");
            }
            println!("wrote {} ({:.1} s)", m.output_dir.display(), m.wall_time_s);
        }
        Command::Compare { configs, out, flags } => {
            let o: Overrides = flags.into();
            let cfgs = configs
                .iter()
                .map(|p| ExperimentConfig::load(p, &o))
                .collect::<Result<Vec<_>, _>>()?;
            let out = out.unwrap_or_else(|| cfgs[0].output_dir.clone());
            let rows = compare(&cfgs, &out)?;
            println!("kernel  evaluations  ratio  wall_s  estimate");
            for r in rows {
                println!(
                    "{:<7} {:>11}  {:>5.3}  {:>6.1}  {}",
                    r.kernel.to_string(),
                    r.evaluations,
                    r.evaluation_ratio,
                    r.wall_time_s,
                    r.estimate.map_or("-".into(), |e| format!("{e:.4e}"))
                );
            }
            println!("wrote {}", out.join("comparison.csv").display());
        }
        Command::Validate { config, flags } => {
            let cfg = ExperimentConfig::load(&config, &flags.into())?;
            cfg.validate()?;
            println!("ok: {} config hash {}", cfg.pipeline, cfg.hash());
        }
        Command::Oracle { which: Oracle::GaussianTail { threshold } } => {
            let r = gaussian_tail(threshold);
            println!("P(Z >= {threshold}) = {:.6e}", r.probability);
            println!("levels at level probability 1/2: {}", r.expected_levels);
        }
    }
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
