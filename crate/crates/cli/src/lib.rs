//! Command-line front end for the Otto engine efficiency toolkit.

pub mod artifact;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
