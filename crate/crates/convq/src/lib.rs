//! Behavioral feature extraction and analysis for conversing groups.

pub mod aggregate;
pub mod coordination;
pub mod data;
pub mod error;
pub mod pipeline;
pub mod predict;
pub mod preprocess;
pub mod reliability;
pub mod stats;
pub mod synth;
pub mod turntaking;
pub mod util;

pub use error::{Error, Result};
