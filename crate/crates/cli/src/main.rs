use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use invlearn_cli::{Overrides, PlantId, RunConfig, EXIT_CONFIG, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "invlearn", version, about = "Certified data-driven output regulation via learned inverse models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; defaults reproduce the selected benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    plant: Option<PlantArg>,
    /// Use the noisy dataset/measurement setting.
    #[arg(long, global = true)]
    noisy: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training trajectories.
    Collect,
    /// Fit the inverse model and build the level-set families.
    Build,
    /// Run the closed loop from every initial condition.
    Simulate,
    /// Run the property suites; exit 1 if any fails.
    Verify,
    /// Print the collected reports.
    Report,
    /// collect, build and simulate in one go.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlantArg {
    Numerical,
    Pendulum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        plant: cli.plant.map(|p| match p {
            PlantArg::Numerical => PlantId::Numerical,
            PlantArg::Pendulum => PlantId::Pendulum,
        }),
        seed: cli.seed,
        out: cli.out.clone(),
        noisy: cli.noisy,
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}

fn print_runs(result: &invlearn_cli::RunResult) {
    println!("run,rmse,certified_fraction,descent_violations");
    for (k, r) in result.runs.iter().enumerate() {
        println!("{k},{:.6},{:.4},{}", r.rmse, r.certified_fraction, r.descent_violations);
    }
}

fn run(command: &Command, cfg: &RunConfig) -> anyhow::Result<bool> {
    match command {
        Command::Collect => {
            let trajs = invlearn_cli::collect(cfg)?;
            println!("wrote {} trajectories to {}", trajs.len(), cfg.out.display());
        }
        Command::Build => {
            let built = invlearn_cli::build(cfg)?;
            print!("{}", built.report);
            for w in &built.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Simulate => print_runs(&invlearn_cli::simulate(cfg)?),
        Command::Verify => {
            let report = invlearn_cli::verify(cfg)?;
            print!("{}", report.to_csv());
            if !report.passed() {
                eprint!("{}", report.failures_text());
                return Ok(false);
            }
        }
        Command::Report => print!("{}", invlearn_cli::report(cfg)?),
        Command::All => {
            let (built, result) = invlearn_cli::run_all(cfg)?;
            print!("{}", built.report);
            print_runs(&result);
        }
    }
    Ok(true)
}
