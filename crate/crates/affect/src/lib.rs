//! File formats and command-line driver around `affect-core`.

mod binary;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod precomputed;
pub mod predictions;
pub mod report;

pub use error::{Error, Result};
