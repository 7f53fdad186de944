//! k-nearest-neighbour random geometric graphs on a Poisson process.
//!
//! The crate covers four layers:
//!
//! * [`geometry`]: regions, exact areas and seeded Poisson sampling, including
//!   the conditioned three-disc sampler.
//! * [`knn`] and [`events`]: grid-indexed k-NN graph construction (with a
//!   brute-force oracle), connected components and the small-component events
//!   on the square `S` and the boundary-anchored square `R`.
//! * [`bounds`]: Chernoff tails, exact Poisson tails, the plogp exponent and
//!   the disc-construction lower bound.
//! * [`configuration`]: tilings, density labels, bad configurations, the
//!   no-edge certificate, the rate functional and its optimizer.
//!
//! [`experiment`] wires them into seeded, thread-count independent Monte Carlo
//! estimators.

pub mod bounds;
pub mod configuration;
pub mod error;
pub mod events;
pub mod experiment;
pub mod geometry;
pub mod knn;
pub mod rng;
pub mod unionfind;

pub use error::{Error, Result};
