//! Simulation toolkit for a chain of lossy bosonic modes with boundary
//! gain, cavity-enhanced hopping, and avalanche-style collective emission.
//!
//! The crate has three layers:
//! - deterministic mean-field dynamics and phase classification ([`meanfield`]),
//! - exact stochastic trajectory sampling plus a truncated number-basis
//!   reference solver ([`stochastic`]),
//! - post-processing: correlation functions, emission spectra, coherence
//!   metrics ([`analysis`]), and a superconducting-circuit parameter
//!   design tool ([`circuit`]).
//!
//! [`runner`] ties these to the TOML-driven CLI.

pub mod analysis;
pub mod circuit;
pub mod config;
pub mod eventlog;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod output;
pub mod rng;
pub mod runner;
pub mod stochastic;

pub use config::{load_config, RunConfig};
pub use meanfield::{PhaseLabel, PhaseReport};
pub use model::{FockConfig, MeanFieldState, PumpSpec, SystemParams};
pub use stochastic::{run_ensemble, EnsembleSpec, Trajectory};
