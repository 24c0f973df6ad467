//! Command-line front end: CSV ingestion, JSON model files, prediction
//! tables, tessellation and category-point files, and SVG figures.

pub mod artifacts;
pub mod commands;
pub mod error;
pub mod input;
pub mod model_file;
pub mod svg;

pub use error::{exit, CliError};
