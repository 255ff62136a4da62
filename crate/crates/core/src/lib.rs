pub mod cities;
pub mod cli;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod montecarlo;
pub mod partition;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
