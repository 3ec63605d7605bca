//! Push-sum average consensus on directed graphs with perturbed early rounds
//! that hide initial values, plus the adversaries, deniability witnesses and
//! rate analysis used to evaluate it.

pub mod adversary;
pub mod analysis;
pub mod cli;
pub mod engine;
pub mod graph;
pub mod numerics;
pub mod weights;
