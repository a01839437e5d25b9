//! File formats, calibration ingestion, toy generators and verifiers around
//! `dlic-core`.

mod bytes;
pub mod bench;
pub mod container;
pub mod error;
pub mod ingest;
pub mod lut_file;
pub mod model_file;
pub mod pipeline;
pub mod symbols;
pub mod toy;
pub mod verify;

pub use error::{DlicError, Result};
