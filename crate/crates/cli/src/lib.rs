//! Scenario runner, console and state files for the SMS remote-control simulator.

pub mod repl;
pub mod scenario;
pub mod store;
pub mod world;

pub use scenario::{parse_scenario, Scenario, ScenarioError};
pub use world::{run_text, RunReport, World};
