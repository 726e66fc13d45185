//! Core of `dynnet`: an exact event-driven simulator for a Markovian dynamic
//! network living on a linear birth-death population, plus noise-free
//! evaluation of its large-time limits.
//!
//! Nodes are born at rate `lambda` per node, die at rate `mu`, and carry an
//! i.i.d. social index `S`. A node with index `s` creates edges at rate
//! `alpha * s`; the partner is a uniformly chosen living node (U-version) or a
//! living node chosen proportionally to its index (P-version). Edges die at
//! rate `beta`, and all edges of a dying node go with it.
//!
//! The crate is `no_std` with `alloc`; IO, parallel replica pools and the CLI
//! live in the companion `dynnet` crate.
//!
//! Module map:
//! - [`params`], [`social`], [`rng`]: parameters, index laws and their exact
//!   moments, reproducible random streams.
//! - [`sim`]: the Gillespie world and frozen [`snapshot::Snapshot`]s.
//! - [`graphstats`]: components, assortativity, degree histograms, KS tests.
//! - [`analytic`]: degree laws, neighbour type densities, stationary edge
//!   law, degree covariance and correlation.
//! - [`critical`]: the `H(x)` series, the critical constant `c_cr`, path sums
//!   and the giant-component verdict.
//! - [`bjr`]: the inhomogeneous random graph view (kernel, sampler, survival
//!   fixed point, operator norm).

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod bjr;
pub mod critical;
pub mod fenwick;
pub mod graphstats;
pub mod params;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod snapshot;
pub mod social;
pub mod special;

pub use params::{ModelConfig, ModelParams, ParamError, Version};
pub use rng::RngStream;
pub use snapshot::Snapshot;
pub use social::{Moment, SocialIndexDistribution};
