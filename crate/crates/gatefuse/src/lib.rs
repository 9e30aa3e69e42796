//! File formats, experiment runner and command-line front end for
//! [`gatefuse_core`].

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod manifest;
pub mod predictions;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
pub use gatefuse_core as core;
