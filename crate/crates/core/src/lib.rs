//! Polynomial filters of multiple commuting graph shifts and their inverses.
//!
//! The crate covers graph construction ([`graph`]), shift families and their
//! joint spectrum ([`shifts`]), multivariate polynomial and Chebyshev filters
//! ([`polyfilter`]), inverse filtering solvers ([`inverse`]), a vertex-level
//! synchronous network simulator ([`distnet`]), and the denoising and
//! convergence experiments ([`experiments`]).

pub mod distnet;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod inverse;
pub mod lp;
pub mod operator;
pub mod polyfilter;
pub mod shifts;
pub mod sparse;

pub use error::{Error, Result};
pub use graph::{Graph, SignalGrid};
pub use operator::{LinearMap, Operator};
pub use polyfilter::{ChebCoeffs, FilterSpec, PolyCoeffs};
pub use shifts::{JointSpectrum, Shift, ShiftFamily};
pub use sparse::Csr;
