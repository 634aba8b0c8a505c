//! Household smart-meter forecasting benchmark.
pub mod cli;
pub mod data;
pub mod datagen;
pub mod error;
pub mod explain;
pub mod forecast;
pub mod linalg;
pub mod preprocess;
pub mod review;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};
