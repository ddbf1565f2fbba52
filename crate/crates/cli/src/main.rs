use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use condmon::experiment::{ExperimentError, Scenario};

mod stages;

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Synthetic train and test telemetry.
    Generate,
    /// Label the training set with sparse and collective anomalies.
    Inject,
    /// Hyperparameter search on the labeled training set.
    Tune,
    /// Fit the classifier.
    Train,
    /// Detection experiment and inference latency.
    Evaluate,
    /// Closed-loop handover simulation and migration timing runs.
    Simulate,
    /// Rebuild the summary tables from the stage outputs.
    Report,
    /// Every stage in order.
    All,
}

#[derive(Args, Clone, Debug, Default)]
struct Overrides {
    /// Scenario TOML file; the built-in default when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the scenario's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Migration runs per variant.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Migrate the inference service alone.
    #[arg(long, global = true)]
    no_mediator: bool,
    /// Classification threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Parser)]
#[command(
    name = "condmon",
    version,
    about = "Edge condition-monitoring experiments"
)]
struct Root {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

fn scenario(o: &Overrides) -> Result<Scenario, ExperimentError> {
    let mut s = match &o.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default_scenario(),
    };
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if let Some(out) = &o.out {
        s.output_dir = out.clone();
    }
    if let Some(runs) = o.runs {
        s.migration_runs = runs;
    }
    if o.no_mediator {
        s.orchestrator.include_mediator = false;
    }
    if let Some(t) = o.threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(ExperimentError::Config(format!(
                "threshold {t} outside (0, 1)"
            )));
        }
        s.detection.threshold = t;
    }
    Ok(s)
}

fn run(root: &Root) -> Result<(), ExperimentError> {
    let s = scenario(&root.overrides)?;
    let ctx = stages::Context::new(s)?;
    match root.command {
        Command::Generate => ctx.generate(),
        Command::Inject => ctx.inject(),
        Command::Tune => ctx.tune(),
        Command::Train => ctx.train(),
        Command::Evaluate => ctx.evaluate(),
        Command::Simulate => ctx.simulate(),
        Command::Report => ctx.report(),
        Command::All => ctx.all(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let root = Root::parse();
    match run(&root) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("condmon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
