pub mod diagram_metrics;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod io;
mod linalg;
pub mod persistence;
pub mod quality;
pub mod skeleton;
pub mod tearing;

pub use error::{Error, Result};
