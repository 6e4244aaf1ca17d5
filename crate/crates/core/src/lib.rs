//! SVBRDF recovery from multi-view HDR captures under known lighting, using
//! spherical-harmonics spectra for fast fitting and entropy-based
//! uncertainty.

pub mod brdf;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod optimizer;
pub mod pipeline;
pub mod scenarios;
pub mod scene;
pub mod sh;
pub mod spectrum;

pub use error::{Error, Result};

/// Default maximum SH degree.
pub const DEFAULT_MAX_DEGREE: usize = 8;
/// Default Tikhonov weight of the sparse fit.
pub const DEFAULT_LAMBDA: f64 = 1e-4;
