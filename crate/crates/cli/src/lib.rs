//! Files, experiment configs and the `mldmae` command line on top of
//! [`mldmae_core`].
//!
//! - [`cloud_io`]: point clouds as CSV.
//! - [`config`]: TOML experiment configs.
//! - [`checkpoint`]: versioned JSON checkpoints and the partition sidecar.
//! - [`pipeline`]: generate / train / evaluate, shared by the binary and
//!   the acceptance suite.

pub mod checkpoint;
pub mod cloud_io;
pub mod config;
mod error;
pub mod pipeline;

pub use error::{CliError, Result};
