//! File formats and batch pipeline for the `mhdmap` command.

pub mod app;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pgm;
pub mod pipeline;
pub mod volb;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pgm::{encode_pgm, export_pgm};
pub use volb::{read_volume, write_volume, VolumeData};
