//! Emotion-conditioned scanpath generation.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::domain::{
    rng_stream, stream_id, EmotionLabel, ErpPoint, Fixation, Scanpath, Scene, StreamDomain,
};

use super::policy::EmotionPolicy;
use super::SubjectProfile;

/// Timestamps and durations are multiples of this projection interval.
pub const TICK_S: f64 = 0.1;

/// Index drawn from `softmax(scores / temperature)` over `candidates`;
/// temperature zero picks the highest score (lowest index on ties).
pub fn choose_object<R: Rng + ?Sized>(
    scores: &[f64],
    candidates: &[usize],
    temperature: f64,
    rng: &mut R,
) -> usize {
    debug_assert!(!candidates.is_empty());
    if temperature == 0.0 {
        let mut best = candidates[0];
        for &c in &candidates[1..] {
            if scores[c] > scores[best] || (scores[c] == scores[best] && c < best) {
                best = c;
            }
        }
        return best;
    }
    let max = candidates
        .iter()
        .map(|&c| scores[c])
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&c| ((scores[c] - max) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (&c, w) in candidates.iter().zip(&weights) {
        if r < *w {
            return c;
        }
        r -= w;
    }
    *candidates.last().unwrap()
}

/// Generates `n_fix` fixations with a generator derived from `seed`.
pub fn gen_scanpath(
    scene: &Scene,
    emotion: EmotionLabel,
    policy: &EmotionPolicy,
    profile: &SubjectProfile,
    n_fix: usize,
    seed: u64,
) -> Scanpath {
    let mut rng = rng_stream(seed, stream_id(StreamDomain::Scanpath, 0));
    gen_scanpath_with(scene, emotion, policy, profile, n_fix, &mut rng)
}

/// Targets are drawn without replacement by policy score; with probability
/// `revisit_prob` (or once every object is seen) a previously visited object
/// other than the current one is drawn instead. Points are the target
/// centroid plus Gaussian jitter, kept inside the target box.
pub fn gen_scanpath_with<R: Rng + ?Sized>(
    scene: &Scene,
    emotion: EmotionLabel,
    policy: &EmotionPolicy,
    profile: &SubjectProfile,
    n_fix: usize,
    rng: &mut R,
) -> Scanpath {
    let n_fix = n_fix.max(1);
    let scores = policy.scores(scene);
    let n_obj = scene.objects.len();
    let mut unseen: Vec<usize> = (0..n_obj).collect();
    let mut seen: Vec<usize> = Vec::new();
    let mut current: Option<usize> = None;
    let px_per_deg = scene.size.w() / 360.0;
    let jitter =
        Normal::new(0.0, policy.dispersion_deg * px_per_deg).expect("dispersion validated");
    let dur_dist = Gamma::new(4.0, policy.mean_duration / 4.0).expect("duration validated");
    let mut tick: u64 = 0;
    let mut fixations = Vec::with_capacity(n_fix);
    for _ in 0..n_fix {
        let revisit_pool: Vec<usize> = seen
            .iter()
            .copied()
            .filter(|&s| Some(s) != current)
            .collect();
        let revisit =
            !revisit_pool.is_empty() && (unseen.is_empty() || rng.random_bool(policy.revisit_prob));
        let idx = if revisit {
            choose_object(&scores, &revisit_pool, policy.temperature, rng)
        } else if !unseen.is_empty() {
            let c = choose_object(&scores, &unseen, policy.temperature, rng);
            unseen.retain(|&u| u != c);
            seen.push(c);
            c
        } else {
            // a single-object scene can only be refixated
            current.unwrap_or(0)
        };
        current = Some(idx);
        let obj = &scene.objects[idx];
        let (cx, cy) = obj.bbox.centroid();
        let u = (cx + jitter.sample(rng)).clamp(obj.bbox.x_min, obj.bbox.x_max);
        let v = (cy + jitter.sample(rng)).clamp(obj.bbox.y_min, obj.bbox.y_max);
        let ticks = ((dur_dist.sample(rng) / TICK_S).round() as u64).max(1);
        fixations.push(Fixation {
            point: ErpPoint::wrapped(u, v, scene.size),
            t_start: tick as f64 * TICK_S,
            duration: ticks as f64 * TICK_S,
            target: Some(obj.id),
        });
        // one tick of saccade between fixations
        tick += ticks + 1;
    }
    Scanpath {
        subject_id: profile.id.clone(),
        emotion,
        scene_id: scene.id.clone(),
        fixations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Lighting, Validate};
    use crate::simscene::{gen_scene, PolicyTable, SceneSpec};

    fn argmax_saliency_policy() -> EmotionPolicy {
        EmotionPolicy {
            weights: [1.0, 0.0, 0.0, 0.0],
            temperature: 0.0,
            mean_duration: 0.3,
            dispersion_deg: 0.0,
            revisit_prob: 0.0,
        }
    }

    #[test]
    fn argmax_policy_starts_at_most_salient_centroid() {
        let scene = gen_scene(4, &SceneSpec::new("s", 7, Lighting::Normal)).unwrap();
        let p = gen_scanpath(
            &scene,
            EmotionLabel::Happy,
            &argmax_saliency_policy(),
            &SubjectProfile::identity("subj"),
            5,
            1,
        );
        let best = scene
            .objects
            .iter()
            .max_by(|a, b| a.saliency.total_cmp(&b.saliency))
            .unwrap();
        let (cx, cy) = best.bbox.centroid();
        assert_eq!(p.fixations[0].target, Some(best.id));
        assert_eq!((p.fixations[0].point.u, p.fixations[0].point.v), (cx, cy));
        // saliency order without replacement
        let mut order: Vec<_> = scene.objects.iter().collect();
        order.sort_by(|a, b| b.saliency.total_cmp(&a.saliency));
        let got: Vec<_> = p.fixations.iter().map(|f| f.target.unwrap()).collect();
        let want: Vec<_> = order.iter().take(5).map(|o| o.id).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn deterministic_and_valid() {
        let scene = gen_scene(8, &SceneSpec::new("s", 10, Lighting::Normal)).unwrap();
        let table = PolicyTable::default();
        let prof = SubjectProfile::identity("subj");
        for e in EmotionLabel::ALL {
            let a = gen_scanpath(&scene, e, table.get(e), &prof, 12, 77);
            assert_eq!(a, gen_scanpath(&scene, e, table.get(e), &prof, 12, 77));
            a.validate().unwrap();
            assert_eq!(a.len(), 12);
            for (f, g) in a.fixations.iter().zip(a.fixations.iter().skip(1)) {
                assert_ne!(f.target, g.target, "consecutive repeats");
            }
        }
    }

    #[test]
    fn single_object_scene_refixates() {
        let scene = gen_scene(1, &SceneSpec::new("s", 1, Lighting::Normal)).unwrap();
        let table = PolicyTable::default();
        let p = gen_scanpath(
            &scene,
            EmotionLabel::Sad,
            table.get(EmotionLabel::Sad),
            &SubjectProfile::identity("x"),
            4,
            3,
        );
        assert!(p.fixations.iter().all(|f| f.target == Some(0)));
    }

    #[test]
    fn choose_object_argmax_ties_to_lowest() {
        let mut rng = rng_stream(0, 0);
        assert_eq!(
            choose_object(&[1.0, 3.0, 3.0], &[0, 1, 2], 0.0, &mut rng),
            1
        );
        assert_eq!(choose_object(&[1.0, 3.0, 3.0], &[2, 1], 0.0, &mut rng), 1);
    }
}
