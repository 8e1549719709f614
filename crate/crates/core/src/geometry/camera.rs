//! Pinhole cameras with single-term radial distortion, and camera rigs.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// World-to-camera extrinsics `X_c = R X_w + t` plus intrinsics.
///
/// The camera looks along its +Z axis; image x grows along camera +X and
/// image y along camera +Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k: f64,
    /// Row-major rotation.
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k: f64,
        r: [[f64; 3]; 3],
        t: [f64; 3],
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            k,
            r,
            t,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidCamera(m));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            ));
        }
        let finite = [self.cx, self.cy, self.k]
            .iter()
            .chain(self.t.iter())
            .chain(self.r.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        let r = self.rotation();
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        if orth > 1e-9 {
            return bad(format!(
                "rotation is not orthonormal (deviation {orth:.3e})"
            ));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return bad(format!("rotation determinant {det} is not +1"));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, world +Z up.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        f: f64,
        cx: f64,
        cy: f64,
        k: f64,
    ) -> Result<Self, GeometryError> {
        let eye_v = Vector3::from(eye);
        let fwd = Vector3::from(target) - eye_v;
        if fwd.norm() < 1e-12 {
            return Err(GeometryError::InvalidCamera(
                "eye and target coincide".into(),
            ));
        }
        let fwd = fwd.normalize();
        let mut right = fwd.cross(&Vector3::z());
        if right.norm() < 1e-9 {
            right = fwd.cross(&Vector3::x());
        }
        let right = right.normalize();
        let down = fwd.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
        let t = -(r * eye_v);
        Self::new(f, f, cx, cy, k, to_rows(&r), [t.x, t.y, t.z])
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.r[i][j])
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.t)
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> [f64; 3] {
        let c = -(self.rotation().transpose() * self.translation());
        [c.x, c.y, c.z]
    }

    pub fn to_camera(&self, p: [f64; 3]) -> Vector3<f64> {
        self.rotation() * Vector3::from(p) + self.translation()
    }

    /// Applies `(1 + k r^2)` to normalized coordinates.
    pub fn distort(&self, xn: f64, yn: f64) -> (f64, f64) {
        let s = 1.0 + self.k * (xn * xn + yn * yn);
        (xn * s, yn * s)
    }

    /// Inverts [`CameraModel::distort`] by fixed-point iteration.
    pub fn undistort(&self, xd: f64, yd: f64) -> (f64, f64) {
        if self.k == 0.0 {
            return (xd, yd);
        }
        let (mut x, mut y) = (xd, yd);
        for _ in 0..50 {
            let s = 1.0 + self.k * (x * x + y * y);
            let (nx, ny) = (xd / s, yd / s);
            let done = (nx - x).abs() < 1e-15 && (ny - y).abs() < 1e-15;
            x = nx;
            y = ny;
            if done {
                break;
            }
        }
        (x, y)
    }

    /// Normalized undistorted coordinates of a pixel.
    pub fn normalize_pixel(&self, px: [f64; 2]) -> (f64, f64) {
        self.undistort((px[0] - self.cx) / self.fx, (px[1] - self.cy) / self.fy)
    }

    /// True when the pixel lies inside the `2cx x 2cy` sensor.
    pub fn in_frame(&self, px: [f64; 2]) -> bool {
        px[0] >= 0.0 && px[0] < 2.0 * self.cx && px[1] >= 0.0 && px[1] < 2.0 * self.cy
    }
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

/// Pixel coordinates of a world point.
pub fn project_point(cam: &CameraModel, p: [f64; 3]) -> Result<[f64; 2], GeometryError> {
    let pc = cam.to_camera(p);
    if !(pc.z > 0.0) {
        return Err(GeometryError::BehindCamera(pc.z));
    }
    let (xd, yd) = cam.distort(pc.x / pc.z, pc.y / pc.z);
    Ok([cam.fx * xd + cam.cx, cam.fy * yd + cam.cy])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub cameras: Vec<CameraModel>,
    /// Frames per second.
    pub capture_rate: f64,
}

impl CameraRig {
    pub fn new(cameras: Vec<CameraModel>, capture_rate: f64) -> Result<Self, GeometryError> {
        let rig = Self {
            cameras,
            capture_rate,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.cameras.len() < 2 {
            return Err(GeometryError::InvalidCamera(format!(
                "a rig needs at least 2 cameras, got {}",
                self.cameras.len()
            )));
        }
        if !(self.capture_rate > 0.0 && self.capture_rate.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!(
                "capture rate must be positive, got {}",
                self.capture_rate
            )));
        }
        self.cameras.iter().try_for_each(|c| c.validate())
    }

    /// Pixel observations from every camera that sees `p` inside its frame.
    pub fn observe(&self, p: [f64; 3]) -> Vec<(&CameraModel, [f64; 2])> {
        self.cameras
            .iter()
            .filter_map(|c| {
                project_point(c, p)
                    .ok()
                    .filter(|px| c.in_frame(*px))
                    .map(|px| (c, px))
            })
            .collect()
    }
}

/// `n` cameras evenly spaced on a horizontal circle, all aimed at `target`.
pub fn ring_rig(
    n: usize,
    radius: f64,
    height: f64,
    target: [f64; 3],
    focal: f64,
    principal: [f64; 2],
    capture_rate: f64,
) -> Result<CameraRig, GeometryError> {
    let cams = (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let eye = [
                target[0] + radius * a.cos(),
                target[1] + radius * a.sin(),
                height,
            ];
            CameraModel::look_at(eye, target, focal, principal[0], principal[1], 0.0)
        })
        .collect::<Result<Vec<_>, _>>()?;
    CameraRig::new(cams, capture_rate)
}

/// Parses the rig text format:
///
/// ```text
/// # comment
/// rate 30
/// fx fy cx cy k r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2
/// ```
pub fn parse_rig(text: &str) -> Result<CameraRig, GeometryError> {
    let mut rate = None;
    let mut cams = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| GeometryError::RigParse {
            line: i + 1,
            message,
        };
        if let Some(rest) = line.strip_prefix("rate") {
            let r: f64 = rest
                .trim()
                .parse()
                .map_err(|e| err(format!("bad rate: {e}")))?;
            rate = Some(r);
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad number `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if nums.len() != 17 {
            return Err(err(format!("expected 17 numbers, got {}", nums.len())));
        }
        let r = [
            [nums[5], nums[6], nums[7]],
            [nums[8], nums[9], nums[10]],
            [nums[11], nums[12], nums[13]],
        ];
        let cam = CameraModel::new(
            nums[0],
            nums[1],
            nums[2],
            nums[3],
            nums[4],
            r,
            [nums[14], nums[15], nums[16]],
        )
        .map_err(|e| err(e.to_string()))?;
        cams.push(cam);
    }
    let rate = rate.ok_or(GeometryError::RigParse {
        line: 0,
        message: "missing `rate` line".into(),
    })?;
    CameraRig::new(cams, rate)
}

/// Inverse of [`parse_rig`]; numbers use shortest round-trip formatting.
pub fn rig_to_text(rig: &CameraRig) -> String {
    let mut out = format!("rate {}\n", rig.capture_rate);
    for c in &rig.cameras {
        let nums: Vec<String> = [c.fx, c.fy, c.cx, c.cy, c.k]
            .iter()
            .chain(c.r.iter().flatten())
            .chain(c.t.iter())
            .map(|v| format!("{v:?}"))
            .collect();
        let _ = writeln!(out, "{}", nums.join(" "));
    }
    out
}
