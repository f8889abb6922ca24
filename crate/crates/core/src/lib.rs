//! Stroke forecasting for badminton rallies.
//!
//! Given the first four strokes of a rally, the model predicts a shot-type
//! distribution and a bivariate Gaussian over the landing point for every
//! following stroke. The crate covers the whole pipeline: rally data and
//! court geometry, CSV ingestion, a small reverse-mode autodiff substrate,
//! the attention model with gated context fusion, training, stochastic
//! generation with best-of-k scoring, and descriptive analyses.

pub mod analysis;
pub mod court;
pub mod dataset;
pub mod error;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
