//! Deterministic agent-based simulator for contact-tracing protocols.
//!
//! A seeded grid world produces the ground truth (who was where, who met
//! whom, who got infected and reported). Four tracing protocols replay that
//! truth through their own information flows, a set of adversaries attacks
//! what each player legitimately holds, and the metrics module scores the
//! outcome for privacy and for tracing utility.
//!
//! Module map:
//!
//! * [`world`]: mobility, encounters, SEIR epidemic, the [`SimulationTrace`].
//! * [`protocols`]: device and authority state machines for P1, P1a, P2, P3.
//! * [`adversary`]: linkage, re-identification, peer inference, eavesdropping.
//! * [`metrics`]: privacy and utility reports, cross-protocol tables.
//! * [`scenario`]: the flat `key = value` experiment config.
//!
//! Every artifact has a line-oriented text form with a parser; see the
//! `format` submodules.

pub mod adversary;
pub mod error;
pub mod metrics;
pub mod protocols;
pub mod rng;
pub mod scenario;
pub mod textfmt;
pub mod world;

pub use error::{Error, Result};
pub use world::{
    ground_truth_exposures, run_simulation, AgentId, Location, RunId, SimulationTrace, Trajectory,
    World, WorldConfig,
};

/// One simulated time step (one minute under the default configuration).
pub type Tick = u64;
