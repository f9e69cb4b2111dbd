//! Stochastic information propagation on configuration-model networks.
//!
//! The crate builds random networks with prescribed degree distributions,
//! simulates Poisson-process message passing over them event by event,
//! integrates the expectation-level equations of the same process, and
//! compares both against the classic degree-based SI mean-field model.
//!
//! - [`degree`]: degree laws, truncation, moments, cutoffs, sampling
//! - [`network`]: half-link pairing into simple graphs, components
//! - [`simulate`]: event-driven Monte Carlo engine and ensemble runner
//! - [`theory`]: coupled ODE system for E\[t\], E\[K_ext\] and the
//!   uninformed degree distribution
//! - [`meanfield`]: degree-based SI baseline
//! - [`stats`]: ensemble aggregation and curve comparison
//! - [`config`] / [`app`]: reproducible experiment pipeline

pub mod app;
pub mod config;
pub mod degree;
pub mod meanfield;
pub mod network;
pub mod simulate;
pub mod stats;
pub mod theory;

pub use config::RunConfig;
pub use degree::{DegreeDistribution, DegreeLaw, Pmf};
pub use network::{build_configuration_model, components, Network};
pub use simulate::{run_ensemble, simulate_once, EnsembleSpec, PropagationRecord};
pub use stats::EnsembleStats;
pub use theory::TheoryCurve;
