//! Scenario runner behind the `pushsum-lab` binary.

pub mod config;
pub mod scenarios;

pub use config::{GraphSpec, InitialSpec, Scenario, ScenarioConfig, ValueSpec};
pub use scenarios::{run_scenario, Check, ScenarioReport};

use thiserror::Error;

use crate::adversary::AdversaryError;
use crate::analysis::AnalysisError;
use crate::engine::EngineError;
use crate::graph::GraphError;
use crate::weights::WeightError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
