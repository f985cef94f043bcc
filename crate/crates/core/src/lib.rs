//! Probability measures on trajectories of continuous-time Markov chains on
//! finite directed multigraphs with time-dependent rates.
//!
//! The series solver in [`measure`] builds `p(t)` order by order in the
//! number of jumps and attaches an analytic truncation certificate. The ODE
//! and matrix-exponential solvers in [`master`], the sampler in [`sampler`]
//! and the regular-graph heat kernel in [`regular`] serve as independent
//! cross-checks.

pub mod chain;
pub mod cli;
pub mod error;
pub mod graph;
pub mod io;
pub mod master;
pub mod measure;
pub mod rates;
pub mod regular;
pub mod rng;
pub mod sampler;

pub use chain::{ChainSpec, Distribution};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, Path, PathConstraint, UndirectedGraph};
pub use rates::RateFunction;
