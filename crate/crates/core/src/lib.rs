//! Adaptive Benders decomposition for two-stage stochastic unit commitment.
//!
//! The crate builds the extensive form, the Benders master in single-cut,
//! multi-cut and clustered-aggregate variants, and per-scenario recourse
//! subproblems, and drives them with [`engine::run`]. [`outer::run_outer`]
//! adds the scenario-subset pre-pass that fixes commonly agreed commitments.

pub mod clustering;
pub mod cuts;
pub mod data;
pub mod engine;
pub mod formulation;
pub mod lp;
pub mod outer;
pub mod report;

#[cfg(test)]
mod testkit;
