use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use infoprop::app::{self, Subcommand};
use infoprop::config::{Overrides, RunConfig};

/// Information propagation experiments: simulation, expectation-level
/// solver, mean-field baseline and their comparison.
#[derive(Parser)]
#[command(name = "infoprop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Run the Monte Carlo ensemble and write simulation curves
    Simulate(StageArgs),
    /// Integrate the expectation-level equations
    Theory(StageArgs),
    /// Integrate the SI mean-field baseline
    Meanfield(StageArgs),
    /// Run all three stages and write the joined comparison files
    Compare(StageArgs),
    /// Compare plus the individual stage outputs
    All(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// TOML configuration file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the deterministic per-run RNG streams
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the ensemble (default: INFOPROP_PARALLELISM or 1)
    #[arg(long)]
    parallelism: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of simulation runs
    #[arg(long)]
    runs: Option<usize>,
    /// Number of nodes
    #[arg(long)]
    n: Option<usize>,
    /// Per-edge message rate
    #[arg(long)]
    mu: Option<f64>,
    /// Completion threshold for accepting a run
    #[arg(long)]
    threshold: Option<f64>,
    /// Informed count at which the time origin is set
    #[arg(long)]
    i0: Option<usize>,
    /// Integration steps per log-decade section
    #[arg(long)]
    steps_per_section: Option<usize>,
    /// Distribution kind: power_law, poisson or empirical
    #[arg(long)]
    dist: Option<String>,
    /// Poisson mean degree
    #[arg(long)]
    gamma: Option<f64>,
    /// Power-law exponent
    #[arg(long)]
    gamma_prime: Option<f64>,
    /// Minimum degree
    #[arg(long)]
    k_min: Option<usize>,
    /// Maximum degree (default: natural cutoff)
    #[arg(long)]
    k_max: Option<usize>,
    /// Empirical pmf file ("k probability" rows)
    #[arg(long)]
    empirical: Option<PathBuf>,
}

impl StageArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            parallelism: self.parallelism,
            outputs: self.out.clone(),
            runs: self.runs,
            n: self.n,
            mu: self.mu,
            threshold: self.threshold,
            i0: self.i0,
            steps_per_section: self.steps_per_section,
            kind: self.dist.clone(),
            gamma: self.gamma,
            gamma_prime: self.gamma_prime,
            k_min: self.k_min,
            k_max: self.k_max,
            empirical: self.empirical.clone(),
        }
    }

    fn resolve(&self) -> Result<(RunConfig, PathBuf), infoprop::config::ConfigError> {
        let overrides = self.overrides();
        match &self.config {
            Some(path) => {
                let cfg = RunConfig::from_file(path)?;
                let base = path
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .unwrap_or(Path::new("."))
                    .to_path_buf();
                Ok((overrides.apply(cfg)?, base))
            }
            None => Ok((overrides.into_config()?, PathBuf::from("."))),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = match &cli.command {
        Command::Simulate(a) => (Subcommand::Simulate, a),
        Command::Theory(a) => (Subcommand::Theory, a),
        Command::Meanfield(a) => (Subcommand::Meanfield, a),
        Command::Compare(a) => (Subcommand::Compare, a),
        Command::All(a) => (Subcommand::All, a),
    };

    let (cfg, base) = match args.resolve() {
        Ok(v) => v,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };

    match app::run(sub, &cfg, &base) {
        Ok(summary) => {
            if summary.accepted > 0 || summary.rejected > 0 {
                println!(
                    "accepted {} of {} runs ({} rejected)",
                    summary.accepted,
                    summary.accepted + summary.rejected,
                    summary.rejected
                );
            }
            if let Some(i) = summary.theory_halted_at {
                println!("theory solver halted at i={i:.2} (external connections exhausted)");
            }
            if let Some(cmp) = &summary.comparison {
                for c in &cmp.checkpoints {
                    println!(
                        "{:>3.0}% informed: sim {:.4}, theory {:.4} ({:+.2}%), mean-field {:.4} ({:+.2}%)",
                        c.fraction * 100.0,
                        c.t_sim,
                        c.t_theory,
                        c.theory_dev_rel * 100.0,
                        c.t_meanfield,
                        c.meanfield_dev_rel * 100.0
                    );
                }
            }
            println!(
                "wrote {} files to {}",
                summary.outputs.len(),
                cfg.outputs.display()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
