//! Command-line front end, file formats and a Monte Carlo oracle for
//! [`jsfs_core`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod entries;
pub mod error;
pub mod oracle;

pub use error::{Error, Result};
