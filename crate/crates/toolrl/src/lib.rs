//! Std companion to `toolrl-core`: config and file formats, threaded
//! training, and the `toolrl` command implementations.
//!
//! Exit codes (see [`error::exit`]): 0 success, 1 runtime or I/O failure,
//! 2 usage error, 3 invalid config, 4 integrity failure (hash or
//! architecture mismatch, replay divergence, corrupt file).

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod image;
pub mod logio;
pub mod manifest;
pub mod replay;
pub mod train;

pub use config::RunConfig;
pub use error::{Error, Result};
