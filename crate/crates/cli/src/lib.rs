//! Operator tooling around the annotrace core: subcommand implementations,
//! the `/v1` HTTP API and the JSON views they share.

pub mod api;
pub mod commands;
pub mod views;
