//! Camera model, multi-view triangulation, equirectangular/sphere mapping,
//! head orientation and gnomonic field-of-view extraction.
//!
//! Conventions: world frame is right-handed with +Z up. Longitude is measured
//! from +X toward +Y in `[-pi, pi)`; latitude is positive toward +Z. On the
//! equirectangular image, `u = 0` is longitude `-pi` and `v = 0` is the north
//! pole.

mod camera;
mod fov;
mod triangulate;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ErpPoint, ImageSize};

pub use camera::{parse_rig, project_point, rig_to_text, ring_rig, CameraModel, CameraRig};
pub use fov::{backmap_table_text, extract_fov, fov_ray, FovPatch};
pub use triangulate::{triangulate, Triangulation, MAX_CONDITION};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("field of view {0} deg outside (0, 180)")]
    FovOutOfRange(f64),
    #[error("raster is {got_w}x{got_h} but the scene is {want_w}x{want_h}")]
    RasterSize {
        got_w: usize,
        got_h: usize,
        want_w: u32,
        want_h: u32,
    },
    #[error("rig file line {line}: {message}")]
    RigParse { line: usize, message: String },
}

/// Unit direction on the viewing sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDir {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SphereDir {
    pub const FORWARD: SphereDir = SphereDir {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes `(x, y, z)`; returns `None` for the zero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return None;
        }
        Some(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_angles(lon: f64, lat: f64) -> Self {
        let (sl, cl) = lat.sin_cos();
        let (so, co) = lon.sin_cos();
        Self {
            x: cl * co,
            y: cl * so,
            z: sl,
        }
    }

    /// Longitude in `[-pi, pi)`.
    pub fn lon(&self) -> f64 {
        let l = self.y.atan2(self.x);
        if l >= PI {
            l - 2.0 * PI
        } else {
            l
        }
    }

    pub fn lat(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).asin()
    }

    pub fn angles(&self) -> [f64; 2] {
        [self.lon(), self.lat()]
    }

    pub fn dot(&self, o: &SphereDir) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Great-circle angle, robust for nearly parallel vectors.
    pub fn angle_to(&self, o: &SphereDir) -> f64 {
        let cx = self.y * o.z - self.z * o.y;
        let cy = self.z * o.x - self.x * o.z;
        let cz = self.x * o.y - self.y * o.x;
        let cross = (cx * cx + cy * cy + cz * cz).sqrt();
        cross.atan2(self.dot(o))
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Head orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl HeadPose {
    pub fn new(pitch: f64, yaw: f64, roll: f64) -> Result<Self, GeometryError> {
        let p = Self { pitch, yaw, roll };
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            return Err(GeometryError::InvalidCamera(format!(
                "pitch {pitch} outside [-pi/2, pi/2]"
            )));
        }
        if !(-PI..PI).contains(&yaw) || !(-PI..PI).contains(&roll) {
            return Err(GeometryError::InvalidCamera(format!(
                "yaw/roll ({yaw}, {roll}) outside [-pi, pi)"
            )));
        }
        Ok(p)
    }

    /// Pose whose forward axis points along `d`, with zero roll.
    pub fn looking_at(d: &SphereDir) -> Self {
        Self {
            pitch: d.lat(),
            yaw: d.lon(),
            roll: 0.0,
        }
    }
}

/// Forward axis of the yaw-then-pitch rotation; roll spins about that axis
/// and leaves it fixed.
pub fn head_to_dir(pose: &HeadPose) -> SphereDir {
    let (sp, cp) = pose.pitch.sin_cos();
    let (sy, cy) = pose.yaw.sin_cos();
    SphereDir {
        x: cp * cy,
        y: cp * sy,
        z: sp,
    }
}

/// `lon = 2 pi u / W - pi`, `lat = pi/2 - pi v / H`.
pub fn erp_to_dir(pt: &ErpPoint) -> SphereDir {
    let (lon, lat) = erp_to_angles(pt.u, pt.v, pt.size);
    SphereDir::from_angles(lon, lat)
}

pub fn erp_to_angles(u: f64, v: f64, size: ImageSize) -> (f64, f64) {
    (2.0 * PI * u / size.w() - PI, FRAC_PI_2 - PI * v / size.h())
}

/// Inverse of [`erp_to_dir`]; `u` wraps and `v` is clamped into the image.
pub fn dir_to_erp(d: &SphereDir, size: ImageSize) -> ErpPoint {
    angles_to_erp(d.lon(), d.lat(), size)
}

pub fn angles_to_erp(lon: f64, lat: f64, size: ImageSize) -> ErpPoint {
    let u = (lon + PI) / (2.0 * PI) * size.w();
    let v = (FRAC_PI_2 - lat) / PI * size.h();
    ErpPoint::wrapped(u, v, size)
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}
