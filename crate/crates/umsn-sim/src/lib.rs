//! Discrete-event harness for the cooperative acoustic tracking stack:
//! scenario configuration, the slot-stepped event loop, failure injection,
//! horizon sweeps, and run logging.
//!
//! The algorithms live in `umsn-core`; this crate owns everything with a
//! filesystem or operator surface (TOML scenario files, CSV/JSON run
//! output, the `umsn` command-line tool).

pub mod config;
pub mod engine;
pub mod runlog;
pub mod sweep;

pub use config::{ConfigError, ResolvedScenario, ScenarioConfig};
pub use engine::{run_resolved, run_scenario, Simulation};
pub use runlog::{RunLog, RunSummary};
pub use sweep::{horizon_sweep, post_convergence_error, SweepRow};
