//! The experiments: configuration, initial data, the time loop, diagnostics
//! and runners.

pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod initial;
pub mod runners;

pub use config::{Scenario, ScenarioConfig};
pub use driver::Simulation;
pub use initial::initial_condition;
pub use runners::{run_convergence, run_finger, run_meshdemo, run_tw, simulation_for, MeshMethod};
