//! Honest-but-curious and eavesdropping adversaries: their views, the
//! least-squares attacks, exact-recovery controls and deniability witnesses.

mod attacks;
mod deniability;
mod views;

pub use attacks::*;
pub use deniability::*;
pub use views::*;

use thiserror::Error;

use crate::engine::EngineError;
use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("the coalition is empty")]
    EmptyCoalition,
    #[error("the coalition contains every agent")]
    CoalitionIsEverything,
    #[error("agent {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("the target belongs to the coalition")]
    TargetCompromised,
    #[error("the target has no neighbor outside the coalition")]
    NoLegitimateNeighbor,
    #[error("the chosen agent is not a neighbor of the target outside the coalition")]
    NotLegitimateNeighbor,
    #[error("delta must be a nonzero finite shift")]
    DegenerateDelta,
    #[error("the shifted initial value of the target or its neighbor is zero")]
    ZeroDivisorInitial,
    #[error("sigma(0) is zero")]
    ZeroSigma,
    #[error("some neighbor of the target is outside the coalition")]
    NeighborhoodNotCovered,
    #[error("the run used a sigma other than 1")]
    SigmaNotUnity,
    #[error("an original or shifted initial value is zero")]
    ZeroInitialValue,
    #[error("delta sigma must be a nonzero finite value")]
    DegenerateDeltaSigma,
    #[error("the target has no out-edge to read a ratio from")]
    NoRatioEdge,
    #[error("view covers {available} rounds, {needed} needed")]
    TooFewRounds { needed: usize, available: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("i/o: {0}")]
    Io(String),
}
