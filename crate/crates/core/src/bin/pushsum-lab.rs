use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pushsum_lab::cli::{run_scenario, Scenario, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "pushsum-lab", version, about = "Private push-sum consensus experiments")]
struct Args {
    #[command(subcommand)]
    scenario: Command,
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one key, e.g. --set K=5 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Single run: trajectory, error series, rate bound, horizon sweep
    Consensus,
    /// Large generated network with vector states
    Scale,
    /// Insider coalition least-squares attack with full-neighborhood control
    AttackHbc,
    /// Eavesdropper least-squares attack with unit-sigma control
    AttackEve,
    /// Alternate runs that leave adversary views unchanged
    Deniability,
    /// Rate bound and empirical rate over many runs
    BoundCheck,
    /// Generate and check a topology
    GraphGen,
}

impl From<Command> for Scenario {
    fn from(c: Command) -> Self {
        match c {
            Command::Consensus => Scenario::Consensus,
            Command::Scale => Scenario::Scale,
            Command::AttackHbc => Scenario::AttackHbc,
            Command::AttackEve => Scenario::AttackEve,
            Command::Deniability => Scenario::Deniability,
            Command::BoundCheck => Scenario::BoundCheck,
            Command::GraphGen => Scenario::GraphGen,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scenario = Scenario::from(args.scenario);
    let mut overrides = args.overrides.clone();
    if let Some(s) = args.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &args.out {
        overrides.push(format!("out={}", o.display()));
    }
    let result = ScenarioConfig::load(scenario, args.config.as_deref(), &overrides).and_then(|cfg| {
        if cfg.scenario != scenario {
            return Err(pushsum_lab::cli::CliError::Config(format!(
                "config names scenario {:?}, command is {:?}",
                cfg.scenario.name(),
                scenario.name()
            )));
        }
        run_scenario(&cfg)
    });
    match result {
        Ok(report) => {
            print!("{}", report.render());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
