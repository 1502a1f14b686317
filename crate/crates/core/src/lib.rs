//! Tensor-train optimization (TTOpt) for quadratic unconstrained binary
//! optimization.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`linalg`]: dense kernels, LU pivot selection and the maxvol algorithm.
//! * [`unfolding`]: multi-index bookkeeping for implicit unfolding matrices.
//! * [`ttopt`]: the sweep engine that searches a black-box tensor for its
//!   minimum using cross approximation and maximal-volume submatrices.
//! * [`qubo`]: QUBO problems, exact evaluation and the feature-selection
//!   construction chain (similarities, item/feature penalty matrices, BQM).
//! * [`baselines`]: exhaustive search, simulated annealing and random search.
//!
//! File formats, the command line front end and wall-clock timing live in the
//! companion `ttopt-qubo-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
mod error;
pub mod linalg;
pub mod qubo;
pub mod ttopt;
pub mod unfolding;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, MaxvolResult};
pub use qubo::{QuboObjective, QuboProblem};
pub use ttopt::{optimize, Objective, OptResult, Trace, TtOptConfig};
pub use unfolding::{MultiIndex, PartialIndexSet, TensorShape};
