//! Monte Carlo simulation of the Bhikar-Sawkar card game.
//!
//! - [`engine`]: the game rules as a step-by-step state machine.
//! - [`randomness`]: per-game seeded streams and the Fisher-Yates shuffle.
//! - [`stats`]: exact, mergeable accumulators and finalized reports.
//! - [`sweep`]: deterministic parallel runs over a grid of configurations.
//! - [`cli`]: the `bhikar` command-line front end and its output files.

pub mod cli;
pub mod engine;
pub mod randomness;
pub mod stats;
pub mod sweep;

pub use engine::{GameConfig, GameResult, GameState, Rank, TurnEvent};
pub use randomness::{RandomStream, SeedPlan};
pub use stats::{ConfigAccumulator, ConfigReport, Histogram};
pub use sweep::{run_sweep, SweepSpec};
