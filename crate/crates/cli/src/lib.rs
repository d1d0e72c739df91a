//! The `ttmc` command-line tool.

pub mod app;
pub mod config;
pub mod repl;
pub mod serve;
