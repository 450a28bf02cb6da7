use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use privopf::admm::AdmmConfig;
use privopf::privacy::Mechanism;
use privopf_cli::{format_summary, read_summary, run_experiment, ExperimentConfig, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "privopf", version, about = "Locally private load release with distributed AC feasibility restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obfuscate loads and run ADMM for a batch of seeds.
    Run(RunArgs),
    /// Print the table of means from a summary.json.
    Summary { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Laplace,
    Piecewise,
}

#[derive(clap::Args)]
struct RunArgs {
    /// MATPOWER-style case file.
    #[arg(long)]
    case: PathBuf,
    /// CSV `gen_index,p_ref,q_ref` of reference dispatches (per-unit).
    #[arg(long)]
    ref_dispatch: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Indistinguishability distance, per-unit.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Cost band half-width, relative to each reference cost.
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, value_enum, default_value = "laplace")]
    mechanism: MechanismArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 5000)]
    t_max: usize,
    #[arg(long, default_value_t = 100.0)]
    rho_init: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 = one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run all t_max iterations even after both residuals reach the target.
    #[arg(long)]
    no_early_stop: bool,
}

impl RunArgs {
    fn into_config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.case, self.ref_dispatch, self.out);
        cfg.epsilon = self.epsilon;
        cfg.alpha = self.alpha;
        cfg.mechanism = match self.mechanism {
            MechanismArg::Laplace => Mechanism::PolarLaplace,
            MechanismArg::Piecewise => Mechanism::Piecewise,
        };
        cfg.seed = self.seed;
        cfg.num_instances = self.instances;
        cfg.threads = self.threads;
        cfg.admm = AdmmConfig {
            beta: self.beta,
            t_max: self.t_max,
            rho_init: self.rho_init,
            early_stop: !self.no_early_stop,
            ..AdmmConfig::default()
        };
        cfg
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run(args) => match run_experiment(&args.into_config()) {
            Ok(outcome) => {
                print!("{}", format_summary(&outcome.summary));
                for r in outcome.summary.records.iter().filter(|r| r.error.is_some()) {
                    eprintln!("instance {} (seed {}): {}", r.instance, r.seed, r.error.as_deref().unwrap_or_default());
                }
                outcome.exit_code
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Command::Summary { path } => match read_summary(&path) {
            Ok(summary) => {
                print!("{}", format_summary(&summary));
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
    };
    ExitCode::from(code as u8)
}
