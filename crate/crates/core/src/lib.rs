//! Discrete-time cluster placement simulator with a policy-gradient placement
//! agent and heuristic baselines.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: job profiles, synthetic workloads, and the cluster environment.
//! - [`encoder`]: the colored-image state representation fed to the policy.
//! - [`reward`]: the four penalty components.
//! - [`policy`]: the single-hidden-layer policy network, its gradient, Adam,
//!   and the checkpoint format.
//! - [`trainer`]: REINFORCE with a per-timestep mean baseline over jobsets.
//! - [`baselines`]: Tetris, BestFit and Random placement.
//! - [`episode`]: runs any placement policy over a workload and records an
//!   [`metrics::EpisodeTrace`].
//! - [`metrics`]: utilization, fragmentation, over-utilization and machine
//!   counts.
//! - [`config`]: the sectioned run configuration.
//! - [`evaluation`]: the multi-load, multi-seed comparison suite.

pub mod baselines;
pub mod config;
pub mod encoder;
pub mod episode;
pub mod evaluation;
mod error;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
