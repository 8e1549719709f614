//! Gaze geometry, synthetic scenes, calibration, semantic interactive orders
//! and evaluation metrics.

pub mod calib;
pub mod domain;
pub mod geometry;
pub mod metrics;
pub mod simscene;
pub mod sio;
