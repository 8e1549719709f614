//! Synthetic multi-camera observations of a 3D point.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{project_point, CameraRig};

use super::SimError;

/// Camera index and noisy pixel for every camera that sees the point.
pub type Observations = Vec<(usize, [f64; 2])>;

/// Projects `point` into each camera and adds isotropic pixel noise.
/// Cameras with the point behind them or outside their frame are skipped.
pub fn simulate_multicam<R: Rng + ?Sized>(
    rig: &CameraRig,
    point: [f64; 3],
    pixel_sigma: f64,
    rng: &mut R,
) -> Result<Observations, SimError> {
    let noise =
        Normal::new(0.0, pixel_sigma.max(0.0)).map_err(|e| SimError::Generation(e.to_string()))?;
    let mut out = Vec::new();
    for (i, cam) in rig.cameras.iter().enumerate() {
        let Ok(px) = project_point(cam, point) else {
            continue;
        };
        if !cam.in_frame(px) {
            continue;
        }
        let px = if pixel_sigma > 0.0 {
            [px[0] + noise.sample(rng), px[1] + noise.sample(rng)]
        } else {
            px
        };
        out.push((i, px));
    }
    if out.len() < 2 {
        return Err(SimError::Coverage { visible: out.len() });
    }
    Ok(out)
}
