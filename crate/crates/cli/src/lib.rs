//! Library side of the command-line front end: configuration
//! resolution, long-format CSV ingestion/export and output writers.
//! The binary in `main.rs` wires these into subcommands.

pub mod config;
pub mod ingest;
pub mod outputs;
