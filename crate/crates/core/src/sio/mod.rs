//! Semantic interactive orders: fixations mapped to scene objects, merged
//! into an ordered sequence of object patches with positions and order
//! indices.

mod embed;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{EmotionLabel, ErpPoint, Raster, Scanpath, Scene};

pub use embed::{PatchCache, PatchEmbed};

pub const DEFAULT_PATCH_SIZE: usize = 16;
/// Colour channels per patch pixel.
pub const PATCH_CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SioError {
    #[error("no fixation of scanpath on `{0}` falls inside an object")]
    Empty(String),
    #[error("scanpath is for scene `{scanpath}` but scene is `{scene}`")]
    SceneMismatch { scanpath: String, scene: String },
    #[error("raster is {got_w}x{got_h}, scene is {want_w}x{want_h}")]
    RasterSize {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("patch size must be positive")]
    PatchSize,
    #[error("embedding: {0}")]
    Embed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SioItem {
    pub object_id: u32,
    /// `D x D x 3` crop of the object box, row-major, channels interleaved,
    /// scaled to `[0, 1]`.
    pub patch: Vec<f64>,
    pub pos_x: f64,
    pub pos_y: f64,
    /// Order index, starting at 1.
    pub t: u32,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SioSequence {
    pub scene_id: String,
    pub subject_id: String,
    pub emotion: Option<EmotionLabel>,
    pub patch_size: usize,
    pub items: Vec<SioItem>,
    /// Every fixation as `(u / W, v / H)`, unmerged.
    pub raw: Vec<[f64; 2]>,
    /// Durations of the raw fixations, seconds.
    pub raw_durations: Vec<f64>,
    /// Start times of the raw fixations, seconds.
    #[serde(default)]
    pub raw_starts: Vec<f64>,
}

impl SioSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.items.iter().map(|i| i.object_id).collect()
    }

    pub fn to_record(&self) -> SioRecord {
        SioRecord {
            scene_id: self.scene_id.clone(),
            emotion: self.emotion,
            items: self
                .items
                .iter()
                .map(|i| (i.object_id, i.pos_x, i.pos_y, i.t, i.duration))
                .collect(),
        }
    }
}

/// Export form of a sequence; patches are re-derived from the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SioRecord {
    pub scene_id: String,
    pub emotion: Option<EmotionLabel>,
    pub items: Vec<(u32, f64, f64, u32, f64)>,
}

/// Object whose box contains `p` (edges included). Overlaps resolve to the
/// smallest box, then the lowest id.
pub fn map_gaze_to_object(scene: &Scene, p: &ErpPoint) -> Option<u32> {
    scene
        .objects
        .iter()
        .filter(|o| o.bbox.contains(p.u, p.v))
        .min_by(|a, b| {
            a.bbox
                .area()
                .total_cmp(&b.bbox.area())
                .then(a.id.cmp(&b.id))
        })
        .map(|o| o.id)
}

/// Samples the box at `d x d` cell centres.
pub fn crop_patch(raster: &Raster, bbox: &crate::domain::BoundingBox, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d * d * PATCH_CHANNELS);
    let (w, h) = (bbox.width(), bbox.height());
    for r in 0..d {
        let y = bbox.y_min + (r as f64 + 0.5) * h / d as f64;
        for c in 0..d {
            let x = bbox.x_min + (c as f64 + 0.5) * w / d as f64;
            let px = raster.sample_nearest(x, y);
            out.extend(px.iter().map(|&v| v as f64 / 255.0));
        }
    }
    out
}

/// Maps fixations to objects, drops unmapped ones, merges consecutive
/// repeats (summing durations) and numbers the result from 1.
pub fn build_sio(
    scene: &Scene,
    raster: &Raster,
    scanpath: &Scanpath,
    d: usize,
) -> Result<SioSequence, SioError> {
    if d == 0 {
        return Err(SioError::PatchSize);
    }
    if scanpath.scene_id != scene.id {
        return Err(SioError::SceneMismatch {
            scanpath: scanpath.scene_id.clone(),
            scene: scene.id.clone(),
        });
    }
    let (want_w, want_h) = (scene.size.width as usize, scene.size.height as usize);
    if raster.width() != want_w || raster.height() != want_h {
        return Err(SioError::RasterSize {
            got_w: raster.width(),
            got_h: raster.height(),
            want_w,
            want_h,
        });
    }
    let mut merged: Vec<(u32, f64)> = Vec::new();
    for f in &scanpath.fixations {
        let Some(id) = map_gaze_to_object(scene, &f.point) else {
            continue;
        };
        match merged.last_mut() {
            Some((last, dur)) if *last == id => *dur += f.duration,
            _ => merged.push((id, f.duration)),
        }
    }
    if merged.is_empty() {
        return Err(SioError::Empty(scene.id.clone()));
    }
    let items = merged
        .into_iter()
        .enumerate()
        .map(|(k, (id, duration))| {
            let o = scene.object(id).expect("mapped ids exist");
            let (cx, cy) = o.bbox.centroid();
            SioItem {
                object_id: id,
                patch: crop_patch(raster, &o.bbox, d),
                pos_x: cx / scene.size.w(),
                pos_y: cy / scene.size.h(),
                t: k as u32 + 1,
                duration,
            }
        })
        .collect();
    Ok(SioSequence {
        scene_id: scene.id.clone(),
        subject_id: scanpath.subject_id.clone(),
        emotion: Some(scanpath.emotion),
        patch_size: d,
        items,
        raw: scanpath
            .fixations
            .iter()
            .map(|f| f.point.normalized())
            .collect(),
        raw_durations: scanpath.fixations.iter().map(|f| f.duration).collect(),
        raw_starts: scanpath.fixations.iter().map(|f| f.t_start).collect(),
    })
}

/// `[pos_x, pos_y, t]` as stored.
pub fn positional_encoding(item: &SioItem) -> [f64; 3] {
    [item.pos_x, item.pos_y, item.t as f64]
}

/// Positional triple with `t` divided by the sequence length `m`.
pub fn scaled_encoding(item: &SioItem, m: usize) -> [f64; 3] {
    [item.pos_x, item.pos_y, item.t as f64 / m.max(1) as f64]
}
