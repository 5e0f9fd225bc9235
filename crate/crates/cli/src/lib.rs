//! File formats, overlay rendering and subcommand implementations behind the
//! `evline` binary.

pub mod bench;
pub mod commands;
pub mod io;
pub mod overlay;

pub use commands::{CliError, OverlayOptions, TrackOptions, TrackSummary};
