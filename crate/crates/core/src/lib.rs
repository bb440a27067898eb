//! Risk-sensitive one-sector stochastic growth model.
//!
//! Preferences aggregate continuation utility with the entropic certainty
//! equivalent `-(1/gamma) ln E exp(-gamma V)`. The crate solves the Bellman
//! equation by value iteration in a weighted sup-norm, extracts the optimal
//! investment policy, and checks the resulting Euler equation, envelope
//! condition and Foster-Lyapunov drift of the controlled income process.

pub mod bellman;
pub mod dynamics;
pub mod euler;
pub mod io;
pub mod model;
pub mod optimize;
pub mod risk;
pub mod verify;

pub use bellman::{solve, Grid, Policy, SolveOptions, SolveResult, ValueFunction};
pub use model::{make_preset, ModelSpec, PresetName};

#[cfg(test)]
pub(crate) mod testutil;
