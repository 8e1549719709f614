//! Value types shared by every stage of the pipeline, plus seeded RNG
//! streams, rasters and line-delimited record I/O.

mod io;
mod raster;
mod rng;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use io::{
    digest_bytes, digest_file, load_dataset, read_records, save_dataset, write_records, Dataset,
    RunManifest, MANIFEST_FILE, SCANPATH_FILE, SCENE_FILE,
};
pub use raster::{pixel_span, Raster, Rgb};
pub use rng::{rng_stream, stream_id, StreamDomain, StreamRng};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> DomainError {
    DomainError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Structural checks that serde alone cannot express.
pub trait Validate {
    fn validate(&self) -> Result<(), DomainError>;
}

/// The six emotion categories, with a fixed ordinal `0..6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Sad = 4,
    Surprise = 5,
}

pub const NUM_EMOTIONS: usize = 6;

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "Angry",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Sad => "Sad",
            EmotionLabel::Surprise => "Surprise",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        EmotionLabel::from_ordinal(v as usize).ok_or_else(|| {
            serde::de::Error::custom(format!("emotion ordinal {v} out of range 0..6"))
        })
    }
}

/// Probabilities over the six emotions, indexed by ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionDistribution(pub [f64; NUM_EMOTIONS]);

impl EmotionDistribution {
    /// Checks non-negativity and that the entries sum to 1 within 1e-9.
    pub fn new(p: [f64; NUM_EMOTIONS]) -> Result<Self, DomainError> {
        let d = Self(p);
        d.validate()?;
        Ok(d)
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_EMOTIONS as f64; NUM_EMOTIONS])
    }

    pub fn one_hot(e: EmotionLabel) -> Self {
        let mut p = [0.0; NUM_EMOTIONS];
        p[e.ordinal()] = 1.0;
        Self(p)
    }

    /// `hi` on the labelled class and `lo` elsewhere (`hi + 5 lo = 1`).
    pub fn smoothed(e: EmotionLabel, hi: f64, lo: f64) -> Self {
        let mut p = [lo; NUM_EMOTIONS];
        p[e.ordinal()] = hi;
        Self(p)
    }

    /// Most probable class; ties go to the lowest ordinal.
    pub fn argmax(&self) -> EmotionLabel {
        let mut best = 0;
        for i in 1..NUM_EMOTIONS {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        EmotionLabel::ALL[best]
    }

    pub fn prob(&self, e: EmotionLabel) -> f64 {
        self.0[e.ordinal()]
    }
}

impl Validate for EmotionDistribution {
    fn validate(&self) -> Result<(), DomainError> {
        if self.0.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(schema("distribution", "entries must be finite and >= 0"));
        }
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(schema("distribution", format!("sums to {total}, not 1")));
        }
        Ok(())
    }
}

/// Equirectangular image size; width is always twice the height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const DEFAULT: ImageSize = ImageSize {
        width: 1920,
        height: 960,
    };

    pub fn new(width: u32, height: u32) -> Result<Self, DomainError> {
        let s = Self { width, height };
        s.validate()?;
        Ok(s)
    }

    /// `2h x h` image.
    pub fn from_height(height: u32) -> Self {
        Self {
            width: 2 * height,
            height,
        }
    }

    pub fn w(&self) -> f64 {
        self.width as f64
    }

    pub fn h(&self) -> f64 {
        self.height as f64
    }
}

impl Validate for ImageSize {
    fn validate(&self) -> Result<(), DomainError> {
        if self.height == 0 {
            return Err(schema("height", "must be positive"));
        }
        if self.width != 2 * self.height {
            return Err(schema(
                "width",
                format!(
                    "equirectangular images need W = 2H, got {}x{}",
                    self.width, self.height
                ),
            ));
        }
        Ok(())
    }
}

/// A (fractional) pixel position on an equirectangular image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErpPoint {
    pub u: f64,
    pub v: f64,
    pub size: ImageSize,
}

impl ErpPoint {
    pub fn new(u: f64, v: f64, size: ImageSize) -> Result<Self, DomainError> {
        let p = Self { u, v, size };
        p.validate()?;
        Ok(p)
    }

    /// Wraps `u` into `[0, W)` and clamps `v` into `[0, H)`.
    pub fn wrapped(u: f64, v: f64, size: ImageSize) -> Self {
        let w = size.w();
        let mut u = u.rem_euclid(w);
        if u >= w {
            u = 0.0;
        }
        let below_h = size.h() * (1.0 - f64::EPSILON);
        let v = v.clamp(0.0, below_h);
        Self { u, v, size }
    }

    /// Position normalized to `[0, 1)^2`.
    pub fn normalized(&self) -> [f64; 2] {
        [self.u / self.size.w(), self.v / self.size.h()]
    }
}

impl Validate for ErpPoint {
    fn validate(&self) -> Result<(), DomainError> {
        self.size.validate()?;
        if !(self.u.is_finite() && self.u >= 0.0 && self.u < self.size.w()) {
            return Err(schema(
                "u",
                format!("{} outside [0, {})", self.u, self.size.width),
            ));
        }
        if !(self.v.is_finite() && self.v >= 0.0 && self.v < self.size.h()) {
            return Err(schema(
                "v",
                format!("{} outside [0, {})", self.v, self.size.height),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub point: ErpPoint,
    pub t_start: f64,
    pub duration: f64,
    /// Ground-truth object the simulator aimed at, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u32>,
}

impl Validate for Fixation {
    fn validate(&self) -> Result<(), DomainError> {
        self.point.validate()?;
        if !self.t_start.is_finite() {
            return Err(schema("t_start", "must be finite"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(schema(
                "duration",
                format!("{} is not positive", self.duration),
            ));
        }
        Ok(())
    }
}

/// Time-ordered fixations of one subject viewing one scene under one emotion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub subject_id: String,
    pub emotion: EmotionLabel,
    pub scene_id: String,
    pub fixations: Vec<Fixation>,
}

impl Scanpath {
    pub fn new(
        subject_id: impl Into<String>,
        emotion: EmotionLabel,
        scene_id: impl Into<String>,
        fixations: Vec<Fixation>,
    ) -> Result<Self, DomainError> {
        let s = Self {
            subject_id: subject_id.into(),
            emotion,
            scene_id: scene_id.into(),
            fixations,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }
}

impl Validate for Scanpath {
    fn validate(&self) -> Result<(), DomainError> {
        if self.fixations.is_empty() {
            return Err(schema("fixations", "scanpath is empty"));
        }
        for (i, f) in self.fixations.iter().enumerate() {
            f.validate().map_err(|e| match e {
                DomainError::Schema { field, reason } => {
                    schema(format!("fixations[{i}].{field}"), reason)
                }
                other => other,
            })?;
        }
        for (i, pair) in self.fixations.windows(2).enumerate() {
            if pair[1].t_start <= pair[0].t_start {
                return Err(schema(
                    format!("fixations[{}].t_start", i + 1),
                    "fixation start times must strictly increase",
                ));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box in pixel coordinates (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, DomainError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.check_shape()?;
        Ok(b)
    }

    fn check_shape(&self) -> Result<(), DomainError> {
        let vals = [self.x_min, self.y_min, self.x_max, self.y_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(schema("bbox", "coordinates must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(schema("bbox.x_max", "x_min must be below x_max"));
        }
        if self.y_min >= self.y_max {
            return Err(schema("bbox.y_max", "y_min must be below y_max"));
        }
        Ok(())
    }

    pub fn validate_in(&self, size: ImageSize) -> Result<(), DomainError> {
        self.check_shape()?;
        if self.x_min < 0.0 || self.y_min < 0.0 || self.x_max > size.w() || self.y_max > size.h() {
            return Err(schema(
                "bbox",
                format!(
                    "box {self:?} leaves the {}x{} image",
                    size.width, size.height
                ),
            ));
        }
        Ok(())
    }

    /// Inclusive containment on all four edges.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn centroid(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn intersects(&self, other: &BoundingBox, margin: f64) -> bool {
        self.x_min - margin <= other.x_max
            && other.x_min <= self.x_max + margin
            && self.y_min - margin <= other.y_max
            && other.y_min <= self.y_max + margin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub bbox: BoundingBox,
    pub category: String,
    pub saliency: f64,
    pub brightness: f64,
    pub dynamic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_start: Option<ErpPoint>,
}

impl SceneObject {
    pub fn centroid_point(&self, size: ImageSize) -> ErpPoint {
        let (x, y) = self.bbox.centroid();
        ErpPoint::wrapped(x, y, size)
    }

    fn validate_in(&self, size: ImageSize) -> Result<(), DomainError> {
        let prefix = |f: &str| format!("objects[id={}].{f}", self.id);
        self.bbox.validate_in(size).map_err(|_| {
            schema(
                prefix("bbox"),
                format!("{:?} is not a valid box inside the image", self.bbox),
            )
        })?;
        if !(0.0..=1.0).contains(&self.saliency) {
            return Err(schema(prefix("saliency"), "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.brightness) {
            return Err(schema(prefix("brightness"), "must lie in [0, 1]"));
        }
        match (self.dynamic, &self.motion_start) {
            (true, None) => {
                return Err(schema(
                    prefix("motion_start"),
                    "dynamic objects need a motion start",
                ))
            }
            (true, Some(p)) if !self.bbox.contains(p.u, p.v) => {
                return Err(schema(
                    prefix("motion_start"),
                    "must lie inside the bounding box",
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lighting {
    High,
    Low,
    Normal,
}

impl std::str::FromStr for Lighting {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Lighting::High),
            "low" => Ok(Lighting::Low),
            "normal" => Ok(Lighting::Normal),
            other => Err(schema("lighting", format!("unknown lighting `{other}`"))),
        }
    }
}

/// A symbolic panorama: labeled objects over a procedural background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub size: ImageSize,
    pub objects: Vec<SceneObject>,
    pub background_seed: u64,
    pub lighting: Lighting,
    pub dynamic: bool,
}

impl Scene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

impl Validate for Scene {
    fn validate(&self) -> Result<(), DomainError> {
        self.size.validate()?;
        if self.objects.is_empty() {
            return Err(schema("objects", "a scene needs at least one object"));
        }
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(schema("objects.id", "object ids must be unique"));
        }
        for o in &self.objects {
            o.validate_in(self.size)?;
        }
        Ok(())
    }
}
