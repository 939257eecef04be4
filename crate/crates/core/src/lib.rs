pub mod brdf;
pub mod config;
pub mod envlight;
pub mod error;
pub mod guides;
pub mod image;
pub mod material;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod matfield;
pub mod recon;
pub mod scene;
pub mod synthetic;
pub mod tracer;
pub mod warp;

pub use error::{Error, Result};
