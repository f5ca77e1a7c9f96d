//! Library side of the `headcam` command-line tool, so the subcommands can
//! be driven from tests without spawning processes.

pub mod commands;
pub mod config;
pub mod plot;
