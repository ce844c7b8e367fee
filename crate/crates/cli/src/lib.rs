//! Command-line front end for `exdice`: single queries, reproduction of the
//! published tables and comparison with them.

pub mod cli;
pub mod compute;
pub mod config;
pub mod diff;
pub mod problem;
pub mod reference;
pub mod render;

pub use cli::{run, Outcome};
