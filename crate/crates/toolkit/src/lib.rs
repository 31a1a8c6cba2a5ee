//! Pipeline toolkit around `anchorkit-core`: record file IO, key-value
//! configuration, JSON/SVG artifacts, run manifests, and the command
//! implementations behind the `anchorkit` binary.

pub mod commands;
pub mod config;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod svg;

pub use commands::{GlobalOpts, InternalError};
