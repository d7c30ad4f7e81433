//! Deterministic simulation of an evolutionary digital ecosystem.
//!
//! Populations of service-composition agents evolve under a genetic algorithm
//! inside each [`habitat::Habitat`], copy themselves along the weighted edges of
//! a [`network::HabitatNetwork`], and reinforce the edges over which migrants
//! survive. The fitness landscape is driven by per-sector request streams
//! ([`requests`]) and every epoch is summarised by ecological statistics
//! ([`metrics`]).
//!
//! All randomness flows through [`rng::stream`], so a run is a pure function of
//! its [`engine::SimConfig`].

pub mod engine;
pub mod experiments;
pub mod genome;
pub mod habitat;
pub mod metrics;
pub mod network;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod requests;
pub mod rng;

pub use engine::{SimConfig, SimState, Simulation};
pub use metrics::EpochReport;
pub use genome::{Agent, AgentId, Genome, GenomeSpec};
pub use habitat::{GaParams, Habitat};
pub use network::HabitatNetwork;
pub use requests::{Request, SectorProfile};
