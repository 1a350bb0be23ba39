use std::path::PathBuf;
use std::process::ExitCode;

use asaf_cli::{run, Command, Overrides, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "asaf",
    version,
    about = "Smoking-attributable mortality estimation and projection"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    warmup: Option<usize>,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,
    /// Last training year.
    #[arg(long, global = true)]
    train_end: Option<i32>,
    /// Parent of the run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Peto-Lopez ASAF from death counts.
    Estimate,
    /// Double-logistic fits and clear-pattern screen.
    Classify,
    /// Sample the hierarchical model.
    Fit,
    /// Quantile fans of future ASAF.
    Project,
    /// Out-of-sample validation report.
    Validate,
    /// Convergence diagnostics.
    Diagnose,
    /// Hyperparameter sensitivity table.
    Sensitivity,
}

#[derive(ValueEnum, Clone, Copy)]
enum VariantArg {
    Bayes,
    BayesS,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let o = Overrides {
        seed: cli.seed,
        chains: cli.chains,
        iters: cli.iters,
        warmup: cli.warmup,
        variant: cli.variant.map(|v| match v {
            VariantArg::Bayes => "bayes".to_string(),
            VariantArg::BayesS => "bayes-s".to_string(),
        }),
        train_end: cli.train_end,
        out: cli.out,
    };
    let cmd = match cli.command {
        Cmd::Estimate => Command::Estimate,
        Cmd::Classify => Command::Classify,
        Cmd::Fit => Command::Fit,
        Cmd::Project => Command::Project,
        Cmd::Validate => Command::Validate,
        Cmd::Diagnose => Command::Diagnose,
        Cmd::Sensitivity => Command::Sensitivity,
    };
    let result = RunConfig::load(cli.config.as_deref(), &o).and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
