//! Linear multi-view triangulation.

use nalgebra::{DMatrix, DVector};

use super::camera::{project_point, CameraModel};
use super::GeometryError;

/// Systems whose singular-value ratio exceeds this are rejected as degenerate.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: [f64; 3],
    /// Root-mean-square reprojection error in pixels.
    pub rms_px: f64,
    pub condition: f64,
}

/// Least-squares point from two linear constraints per view.
///
/// Each pixel is undistorted to normalized coordinates `(x, y)`; with camera
/// rows `r1, r2, r3` and translation `t`, the view contributes
/// `(x r3 - r1) . P = t1 - x t3` and `(y r3 - r2) . P = t2 - y t3`.
/// Rows are scaled to unit norm so every view carries comparable weight.
pub fn triangulate(
    observations: &[(&CameraModel, [f64; 2])],
) -> Result<Triangulation, GeometryError> {
    if observations.len() < 2 {
        return Err(GeometryError::Degenerate(format!(
            "need at least 2 observations, got {}",
            observations.len()
        )));
    }
    let n = observations.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 3);
    let mut b = DVector::<f64>::zeros(2 * n);
    for (i, (cam, px)) in observations.iter().enumerate() {
        if !(px[0].is_finite() && px[1].is_finite()) {
            return Err(GeometryError::Degenerate(format!(
                "observation {i} is not finite"
            )));
        }
        let (x, y) = cam.normalize_pixel(*px);
        let r = &cam.r;
        let t = &cam.t;
        for (row, (c, axis)) in [(x, 0usize), (y, 1usize)].into_iter().enumerate() {
            let coeffs = [
                c * r[2][0] - r[axis][0],
                c * r[2][1] - r[axis][1],
                c * r[2][2] - r[axis][2],
            ];
            let rhs = t[axis] - c * t[2];
            let norm = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let k = 2 * i + row;
            for j in 0..3 {
                a[(k, j)] = coeffs[j] / norm;
            }
            b[k] = rhs / norm;
        }
    }
    let svd = a.svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(GeometryError::Degenerate(format!(
            "condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| GeometryError::Degenerate(e.to_string()))?;
    let point = [sol[0], sol[1], sol[2]];
    let mut sq = 0.0;
    for (cam, px) in observations {
        let p = project_point(cam, point)?;
        sq += (p[0] - px[0]).powi(2) + (p[1] - px[1]).powi(2);
    }
    Ok(Triangulation {
        point,
        rms_px: (sq / n as f64).sqrt(),
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera::ring_rig;

    #[test]
    fn principal_axes_meet_at_target() {
        // neighbours on a ring of four: axes cross at a right angle
        let rig = ring_rig(4, 3.0, 2.5, [0.2, -0.4, 1.5], 800.0, [400.0, 300.0], 30.0).unwrap();
        let obs: Vec<_> = rig.cameras[..2].iter().map(|c| (c, [c.cx, c.cy])).collect();
        let tri = triangulate(&obs).unwrap();
        let q = [0.2, -0.4, 1.5];
        for j in 0..3 {
            assert!((tri.point[j] - q[j]).abs() < 1e-9, "{:?}", tri.point);
        }
        assert!(tri.rms_px < 1e-6);
    }

    #[test]
    fn single_view_and_parallel_rays_rejected() {
        let rig = ring_rig(2, 3.0, 1.5, [0.0, 0.0, 1.5], 800.0, [400.0, 300.0], 30.0).unwrap();
        let c = &rig.cameras[0];
        assert!(matches!(
            triangulate(&[(c, [400.0, 300.0])]),
            Err(GeometryError::Degenerate(_))
        ));
        // the same ray twice has no depth information
        assert!(matches!(
            triangulate(&[(c, [410.0, 300.0]), (c, [410.0, 300.0])]),
            Err(GeometryError::Degenerate(_))
        ));
    }
}
