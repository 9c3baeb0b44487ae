//! Mixture of encoder/decoder pairs glued by a partition of unity, for
//! estimating distributions supported on low-dimensional manifolds.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration,
//! timing and the command line live in the `mldmae` companion crate.
//!
//! Layout:
//! - [`diffnet`]: dense feed-forward networks with exact reverse-mode
//!   gradients and Adam.
//! - [`synthdata`]: spiral / torus / sphere generators and splitting.
//! - [`partition`]: k-means, data-driven covers and partitions of unity.
//! - [`discrepancy`]: kernels, MMD, exact and sliced 1-Wasserstein.
//! - [`mixmodel`]: the mixture model, priors and sampling.
//! - [`trainer`]: minibatch rejection partitioning, the training objective,
//!   the training loop and data-driven prior refresh.
//! - [`evalsuite`]: KDE baseline, Parzen log-likelihood, held-out W1.
#![no_std]
// Test builds pull `std` into the dependency graph, and its inherent float
// methods make the `num_traits::Float` imports redundant there.
#![allow(unused_imports)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diffnet;
pub mod discrepancy;
mod error;
pub mod evalsuite;
mod matrix;
pub mod mixmodel;
pub mod partition;
pub mod rng;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, LossComponent, Result};
pub use matrix::Matrix;
pub use synthdata::PointCloud;
