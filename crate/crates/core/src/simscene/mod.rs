//! Synthetic stand-in for recorded gaze data: procedural scenes,
//! emotion-conditioned scanpaths, subject bias and multi-camera observations.

mod bias;
mod dataset;
mod multicam;
mod policy;
mod scanpath;
mod scene;

use thiserror::Error;

pub use bias::{apply_bias, bias_point, BiasedScanpath, SubjectProfile};
pub use dataset::{dataset_scene, gen_dataset, scene_id, subject_id, DatasetSpec};
pub use multicam::{simulate_multicam, Observations};
pub use policy::{object_features, raw_features, EmotionPolicy, PolicyTable, FEATURE_NAMES};
pub use scanpath::{choose_object, gen_scanpath, gen_scanpath_with, TICK_S};
pub use scene::{gen_scene, hsv_to_rgb, object_color, render_scene, SceneSpec, CATEGORIES};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene generation failed: {0}")]
    Generation(String),
    #[error("invalid emotion policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid subject profile: {0}")]
    Profile(String),
    #[error("point visible in {visible} camera(s); at least 2 are needed")]
    Coverage { visible: usize },
}
