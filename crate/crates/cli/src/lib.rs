//! Configuration, orchestration and artifact output for `nullwave`.

pub mod commands;
pub mod config;
pub mod oracles;
pub mod output;
pub mod verify;
