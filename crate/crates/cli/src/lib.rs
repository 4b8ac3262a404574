//! Library surface of the `mosaic` CLI: manifest schema, configuration
//! resolution, and the command implementations. The binary in `main.rs` is a
//! thin clap wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
