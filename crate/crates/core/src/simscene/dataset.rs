//! Balanced synthetic datasets: scenes plus emotion-labelled scanpaths.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    rng_stream, stream_id, Dataset, EmotionLabel, ImageSize, Lighting, Scene, StreamDomain,
    NUM_EMOTIONS,
};

use super::{gen_scanpath_with, gen_scene, PolicyTable, SceneSpec, SimError, SubjectProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_scenes: usize,
    pub objects_per_scene: usize,
    pub episodes_per_emotion: usize,
    pub fixations_per_episode: usize,
    pub n_subjects: usize,
    pub size: ImageSize,
    pub dynamic_fraction: f64,
    /// Scene `i` uses `lightings[i % len]`.
    #[serde(default = "default_lightings")]
    pub lightings: Vec<Lighting>,
}

fn default_lightings() -> Vec<Lighting> {
    vec![Lighting::Normal]
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_scenes: 30,
            objects_per_scene: 20,
            episodes_per_emotion: 150,
            fixations_per_episode: 6,
            n_subjects: 10,
            size: ImageSize::DEFAULT,
            dynamic_fraction: 0.1,
            lightings: default_lightings(),
        }
    }
}

pub fn scene_id(i: usize) -> String {
    format!("scene-{i:04}")
}

pub fn subject_id(i: usize) -> String {
    format!("subj-{i:03}")
}

/// Scene `i` of a dataset generated from `seed`.
pub fn dataset_scene(seed: u64, spec: &DatasetSpec, i: usize) -> Result<Scene, SimError> {
    if spec.lightings.is_empty() {
        return Err(SimError::Generation("no lighting conditions given".into()));
    }
    let scene_seed: u64 = rng_stream(seed, stream_id(StreamDomain::Scene, i as u64)).random();
    let s = SceneSpec {
        id: scene_id(i),
        size: spec.size,
        n_objects: spec.objects_per_scene,
        lighting: spec.lightings[i % spec.lightings.len()],
        dynamic_fraction: spec.dynamic_fraction,
    };
    gen_scene(scene_seed, &s)
}

/// Generates scenes and exactly `episodes_per_emotion` scanpaths per emotion.
///
/// Episode `k` owns stream `k`, so output is independent of `workers`.
/// Episodes are ordered by emotion ordinal, then by index within the emotion.
pub fn gen_dataset(
    seed: u64,
    spec: &DatasetSpec,
    policies: &PolicyTable,
    workers: usize,
) -> Result<Dataset, SimError> {
    if spec.n_scenes == 0 || spec.n_subjects == 0 || spec.fixations_per_episode == 0 {
        return Err(SimError::Generation(
            "need at least one scene, one subject and one fixation per episode".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Generation(e.to_string()))?;
    pool.install(|| {
        let scenes = (0..spec.n_scenes)
            .into_par_iter()
            .map(|i| dataset_scene(seed, spec, i))
            .collect::<Result<Vec<_>, _>>()?;
        let per = spec.episodes_per_emotion;
        let scanpaths = (0..NUM_EMOTIONS * per)
            .into_par_iter()
            .map(|k| {
                let emotion = EmotionLabel::ALL[k / per];
                let mut rng = rng_stream(seed, stream_id(StreamDomain::Scanpath, k as u64));
                let scene = &scenes[rng.random_range(0..scenes.len())];
                let profile =
                    SubjectProfile::identity(subject_id(rng.random_range(0..spec.n_subjects)));
                gen_scanpath_with(
                    scene,
                    emotion,
                    policies.get(emotion),
                    &profile,
                    spec.fixations_per_episode,
                    &mut rng,
                )
            })
            .collect();
        Ok(Dataset { scenes, scanpaths })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetSpec {
        DatasetSpec {
            n_scenes: 4,
            objects_per_scene: 6,
            episodes_per_emotion: 5,
            fixations_per_episode: 4,
            n_subjects: 3,
            size: ImageSize::from_height(240),
            dynamic_fraction: 0.2,
            lightings: vec![Lighting::Normal, Lighting::High, Lighting::Low],
        }
    }

    #[test]
    fn class_balance_is_exact() {
        let d = gen_dataset(3, &small(), &PolicyTable::default(), 1).unwrap();
        for e in EmotionLabel::ALL {
            assert_eq!(d.scanpaths.iter().filter(|s| s.emotion == e).count(), 5);
        }
        assert_eq!(d.scenes.len(), 4);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let t = PolicyTable::default();
        let a = gen_dataset(3, &small(), &t, 1).unwrap();
        assert_eq!(a, gen_dataset(3, &small(), &t, 3).unwrap());
    }
}
