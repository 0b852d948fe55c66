//! Simulation and verification toolkit for random-cluster dynamics on the
//! complete graph.
//!
//! The mean-field chains ([`cm`]) work on exchangeable component-size
//! configurations ([`state`]), re-percolating active vertices with an exact
//! exploration-process sampler ([`percolation`]). Edge-level Glauber dynamics
//! lives in [`glauber`], exhaustive small-graph oracles in [`exact`], and the
//! coupling machinery in [`coupling`], [`walks`] and [`llt`].
//!
//! Replica-level parallelism is provided by [`replicas`]; it uses rayon when
//! the `parallel` feature is enabled (the default) and runs sequentially
//! otherwise. Results are identical either way.

pub mod coupling;
pub mod cm;
pub mod drift;
pub mod dsu;
pub mod error;
pub mod exact;
pub mod glauber;
pub mod inference;
pub mod llt;
pub mod params;
pub mod percolation;
pub mod replicas;
pub mod state;
pub mod walks;

pub use error::{Error, Result};
pub use params::{critical_lambda, gibbs_log_weight, ConfigSummary, ModelParams};
pub use replicas::SimRng;
pub use state::{Component, ComponentId, ComponentState, IntervalSpec, StatsReport};
