//! Decentralized decision-making over multi-task diffusion networks.
//!
//! Agents observe streaming linear-regression data generated by one of several
//! unknown models. Each agent runs a diffusion LMS filter, learns which of its
//! neighbors share its observed model, labels the models its neighbors currently
//! want to estimate, and switches by local majority until the whole network
//! tracks a single model. A variant steers every agent to the observed model of
//! one designated agent, and a mobile variant moves agents toward the model
//! they settled on.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`] and [`models`]: topologies, ground-truth models, data stream.
//! - [`diffusion`]: LMS adaptation, clustering beliefs, combination, aggregation.
//! - [`decision`]: local labeling, agreement, switching and the desired-model update.
//! - [`anchor`]: spreading a designated agent's iterate through the network.
//! - [`mobility`]: motion law and per-round topology rebuilds.
//! - [`sim`]: the synchronous round loop shared by all three run modes.
//! - [`metrics`], [`record`], [`harness`], [`config`]: MSD, run records,
//!   Monte Carlo orchestration and configuration.

pub mod anchor;
pub mod config;
pub mod decision;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod invariants;
pub mod metrics;
pub mod mobility;
pub mod models;
pub mod network;
pub mod record;
pub mod rng;
pub mod sim;

pub use config::{ExperimentConfig, Mode, MotionParams, NoiseBounds};
pub use error::{Error, Result};
pub use harness::{run_monte_carlo, run_trial, AggregateSummary, MonteCarloOutput};
pub use models::{ModelSet, NoiseProfile};
pub use network::Topology;
pub use record::{IterationRow, RunRecord};
pub use sim::{RoundObserver, RoundView, Simulation};
