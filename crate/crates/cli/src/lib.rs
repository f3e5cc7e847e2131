//! Configuration parsing and experiment commands behind the `cityroad` binary.

pub mod commands;
pub mod config;
