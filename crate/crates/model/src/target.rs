//! Regression targets derived from the raw fixations of a sequence.

use std::f64::consts::PI;

use gazeforge_core::sio::SioSequence;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxRegTarget {
    /// Total fixation time over the span from first onset to last offset.
    pub duration: f64,
    /// RMS angle in radians between each fixation direction and their mean
    /// direction.
    pub dispersion: f64,
}

/// Unit viewing direction of a normalized ERP coordinate.
fn direction(p: [f64; 2]) -> [f64; 3] {
    let lon = (p[0] - 0.5) * 2.0 * PI;
    let lat = (0.5 - p[1]) * PI;
    [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()]
}

impl AuxRegTarget {
    pub fn as_array(&self) -> [f64; 2] {
        [self.duration, self.dispersion]
    }

    pub fn from_sio(seq: &SioSequence) -> Result<Self, ModelError> {
        let n = seq.raw.len();
        if n == 0 || seq.raw_durations.len() != n {
            return Err(ModelError::Data(format!(
                "sequence on `{}` lacks raw fixations or durations",
                seq.scene_id
            )));
        }
        let total: f64 = seq.raw_durations.iter().sum();
        let span = if seq.raw_starts.len() == n {
            seq.raw_starts[n - 1] + seq.raw_durations[n - 1] - seq.raw_starts[0]
        } else {
            total
        };
        let duration = if span > 0.0 { total / span } else { 0.0 };

        let dirs: Vec<[f64; 3]> = seq.raw.iter().map(|p| direction(*p)).collect();
        let mut mean = [0.0; 3];
        for d in &dirs {
            for k in 0..3 {
                mean[k] += d[k];
            }
        }
        let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
        let dispersion = if norm > 1e-12 {
            let m = [mean[0] / norm, mean[1] / norm, mean[2] / norm];
            let ss: f64 = dirs
                .iter()
                .map(|d| {
                    let c = (d[0] * m[0] + d[1] * m[1] + d[2] * m[2]).clamp(-1.0, 1.0);
                    c.acos().powi(2)
                })
                .sum();
            (ss / n as f64).sqrt()
        } else {
            // directions cancel out; every point is a right angle or more away
            PI / 2.0
        };
        Ok(Self {
            duration,
            dispersion,
        })
    }
}
