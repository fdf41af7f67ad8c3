//! Firebreak placement laboratory.
//!
//! A stochastic cellular-automata wildfire simulator, the firebreak-placement
//! decision environment built on it, a downstream-protection-value heuristic
//! that generates demonstrations, and value-based deep Q-learning agents
//! (DQN, double DQN, dueling double DQN) trained from those demonstrations,
//! with gradient-based attention maps for inspecting decisions.

pub mod error;
pub mod files;
pub mod rng;

pub mod landscape;

pub mod firesim;

pub mod nn;

pub mod env;

pub mod dpv;

pub mod agent;

pub use error::{Error, Result};
