//! Library surface of the batch front-end, so integration tests drive the
//! same command implementations as the binary.

pub mod commands;
pub mod config;
pub mod summary;
