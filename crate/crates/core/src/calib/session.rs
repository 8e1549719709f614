//! Simulated calibration sessions and the pair-extraction loop that runs on
//! their observable signals.
//!
//! A session shows a sequence of scenes. After each scene change the subject
//! first looks at the objective target (the scene's teacher point), then at a
//! few other objects of their own choosing. Every gaze shift is a short
//! saccade accompanied by a slower head turn that ends near, but not exactly
//! on, the new target. Observed gaze passes through the subject's bias, with
//! one noise offset per fixation plus small per-sample tremor.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{rng_stream, stream_id, Scene, StreamDomain};
use crate::geometry::{erp_to_dir, wrap_angle, HeadPose, SphereDir};
use crate::simscene::SubjectProfile;

use super::{
    apply_student_dir, classify_gaze_state, detect_head_events, in_window, scene_transition_window,
    select_student, strong_hint, teacher_fixation, teacher_object, CalibError, CalibPair,
    GazeState, HeadEventKind, PoseSample, StudentKind, StudentModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub trials: usize,
    pub fixations_per_trial: usize,
    pub sample_hz: f64,
    pub saccade_s: f64,
    pub head_turn_s: f64,
    /// Largest angle between the settled head direction and the target.
    pub head_offset_deg: f64,
    /// Head speed threshold for movement events, rad/s.
    pub omega_threshold: f64,
    pub hold_s: f64,
    /// Gaze speed threshold separating scanning from fixation, rad/s.
    pub v_threshold: f64,
    pub hint_radius_deg: f64,
    pub in_window_weight: f64,
    pub objective_jitter_deg: f64,
    pub subjective_jitter_deg: f64,
    pub tremor_deg: f64,
    pub fixation_s: (f64, f64),
    pub min_fixation_samples: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            trials: 45,
            fixations_per_trial: 3,
            sample_hz: 100.0,
            saccade_s: 0.04,
            head_turn_s: 0.25,
            head_offset_deg: 3.0,
            omega_threshold: 0.5,
            hold_s: 0.05,
            v_threshold: 30f64.to_radians(),
            hint_radius_deg: super::DEFAULT_HINT_RADIUS_DEG,
            in_window_weight: 2.0,
            objective_jitter_deg: 0.3,
            subjective_jitter_deg: 1.0,
            tremor_deg: 0.02,
            fixation_s: (0.5, 0.7),
            min_fixation_samples: 8,
        }
    }
}

/// Ground truth for one simulated fixation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueFixation {
    pub t0: f64,
    pub t1: f64,
    pub scene: usize,
    pub object: u32,
    pub truth: SphereDir,
    pub objective: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub poses: Vec<PoseSample>,
    pub gaze_obs: Vec<(f64, SphereDir)>,
    pub gaze_true: Vec<(f64, SphereDir)>,
    /// Scene change times and the scene shown from then on.
    pub transitions: Vec<(f64, usize)>,
    pub fixations: Vec<TrueFixation>,
}

fn slerp(a: &SphereDir, b: &SphereDir, s: f64) -> SphereDir {
    let ang = a.angle_to(b);
    if ang < 1e-12 {
        return *b;
    }
    let (wa, wb) = (
        ((1.0 - s) * ang).sin() / ang.sin(),
        (s * ang).sin() / ang.sin(),
    );
    SphereDir::new(
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
    )
    .unwrap_or(*b)
}

/// Offsets `d` by an angle of at most `max_rad` in a random direction
/// (uniform over the disc when `uniform_disc`, Gaussian with sd `max_rad`
/// otherwise).
fn perturb<R: Rng + ?Sized>(
    d: &SphereDir,
    max_rad: f64,
    uniform_disc: bool,
    rng: &mut R,
) -> SphereDir {
    if max_rad <= 0.0 {
        return *d;
    }
    let (dx, dy) = if uniform_disc {
        let r = max_rad * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        (r * a.cos(), r * a.sin())
    } else {
        let n = Normal::new(0.0, max_rad).expect("positive sd");
        (n.sample(rng), n.sample(rng))
    };
    let [lon, lat] = d.angles();
    let lat2 = (lat + dy).clamp(-1.55, 1.55);
    SphereDir::from_angles(wrap_angle(lon + dx / lat.cos().max(0.05)), lat2)
}

fn observe(
    profile: &SubjectProfile,
    truth: &SphereDir,
    noise: [f64; 2],
    tremor: [f64; 2],
) -> SphereDir {
    let [l, f] = profile.map(truth.angles());
    let lat =
        (f + noise[1] + tremor[1]).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    SphereDir::from_angles(wrap_angle(l + noise[0] + tremor[0]), lat)
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Gaze target of `object`: motion start for dynamic objects, else centroid.
fn anchor(scene: &Scene, idx: usize) -> SphereDir {
    let o = &scene.objects[idx];
    match (o.dynamic, o.motion_start) {
        (true, Some(p)) => erp_to_dir(&p),
        _ => erp_to_dir(&o.centroid_point(scene.size)),
    }
}

pub fn simulate_session<R: Rng + ?Sized>(
    scenes: &[Scene],
    profile: &SubjectProfile,
    cfg: &SessionConfig,
    rng: &mut R,
) -> Session {
    assert!(!scenes.is_empty(), "a session needs scenes");
    let dt = 1.0 / cfg.sample_hz;
    let fix_noise = Normal::new(0.0, profile.sigma.max(0.0)).expect("valid sigma");
    let tremor = Normal::new(0.0, cfg.tremor_deg.to_radians().max(0.0)).expect("valid tremor");
    let mut s = Session {
        poses: Vec::new(),
        gaze_obs: Vec::new(),
        gaze_true: Vec::new(),
        transitions: Vec::new(),
        fixations: Vec::new(),
    };
    let mut tick: u64 = 0;
    let mut head = SphereDir::FORWARD;
    let mut gaze = SphereDir::FORWARD;
    let mut current: Option<usize> = None;
    for trial in 0..cfg.trials {
        let si = trial % scenes.len();
        let scene = &scenes[si];
        s.transitions.push((tick as f64 * dt, si));
        // the saccade toward the objective target starts shortly after the change
        tick += (0.05 * cfg.sample_hz).round() as u64;
        let teacher_id = teacher_object(scene, None).0.id;
        let objective_idx = scene
            .objects
            .iter()
            .position(|o| o.id == teacher_id)
            .expect("teacher is in scene");
        for j in 0..cfg.fixations_per_trial {
            let idx = if j == 0 {
                objective_idx
            } else {
                let choices: Vec<usize> = (0..scene.objects.len())
                    .filter(|&i| Some(i) != current)
                    .collect();
                if choices.is_empty() {
                    objective_idx
                } else {
                    choices[rng.random_range(0..choices.len())]
                }
            };
            current = Some(idx);
            let jitter = if j == 0 {
                cfg.objective_jitter_deg
            } else {
                cfg.subjective_jitter_deg
            };
            let target = perturb(&anchor(scene, idx), jitter.to_radians(), false, rng);
            let head_goal = perturb(&target, cfg.head_offset_deg.to_radians(), true, rng);
            let noise = [fix_noise.sample(rng), fix_noise.sample(rng)];
            let fix_len = rng.random_range(cfg.fixation_s.0..cfg.fixation_s.1);
            let (gaze0, head0) = (gaze, head);
            let start = tick;
            let sacc_ticks = (cfg.saccade_s * cfg.sample_hz).round().max(1.0) as u64;
            let head_ticks = (cfg.head_turn_s * cfg.sample_hz).round().max(1.0) as u64;
            let end = start + sacc_ticks + (fix_len * cfg.sample_hz).round() as u64;
            for k in start..end {
                let t = k as f64 * dt;
                let el = (k - start) as f64;
                gaze = slerp(&gaze0, &target, (el / sacc_ticks as f64).min(1.0));
                head = slerp(&head0, &head_goal, smoothstep(el / head_ticks as f64));
                let tr = [tremor.sample(rng), tremor.sample(rng)];
                s.gaze_true.push((t, gaze));
                s.gaze_obs.push((t, observe(profile, &gaze, noise, tr)));
                s.poses.push(PoseSample {
                    t,
                    pose: HeadPose::looking_at(&head),
                });
            }
            s.fixations.push(TrueFixation {
                t0: (start + sacc_ticks) as f64 * dt,
                t1: (end - 1) as f64 * dt,
                scene: si,
                object: scene.objects[idx].id,
                truth: target,
                objective: j == 0,
            });
            tick = end;
        }
    }
    s
}

fn mean_dir(ds: &[SphereDir]) -> Option<SphereDir> {
    let (x, y, z) = ds
        .iter()
        .fold((0.0, 0.0, 0.0), |a, d| (a.0 + d.x, a.1 + d.y, a.2 + d.z));
    SphereDir::new(x, y, z)
}

fn scene_at(transitions: &[(f64, usize)], t: f64) -> Option<(f64, usize)> {
    transitions.iter().rev().find(|(tt, _)| *tt <= t).copied()
}

/// Calibration pairs from the observable signals of a session: fixation
/// segments found by velocity thresholding, each paired with the teacher
/// point inside the hint cone of the head stop that accompanied it.
/// Segments without a head stop, or whose teacher falls outside the cone,
/// are skipped.
pub fn extract_pairs(
    session: &Session,
    scenes: &[Scene],
    cfg: &SessionConfig,
) -> Result<Vec<CalibPair>, CalibError> {
    let events = detect_head_events(&session.poses, cfg.omega_threshold, cfg.hold_s)?;
    let stops: Vec<_> = events
        .iter()
        .filter(|e| e.kind == HeadEventKind::MovementStop)
        .collect();
    let labels = classify_gaze_state(&session.gaze_obs, cfg.v_threshold)?;
    let radius = cfg.hint_radius_deg.to_radians();
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] != GazeState::Fixation {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < labels.len() && labels[j + 1] == GazeState::Fixation {
            j += 1;
        }
        let (seg_start, seg_end) = (i, j);
        i = j + 1;
        if seg_end + 1 - seg_start < cfg.min_fixation_samples {
            continue;
        }
        let (t0, t1) = (session.gaze_obs[seg_start].0, session.gaze_obs[seg_end].0);
        let Some((t_change, si)) = scene_at(&session.transitions, t0) else {
            continue;
        };
        let Some(stop) = stops
            .iter()
            .rev()
            .find(|e| e.time <= t1 && e.time >= t0 - cfg.head_turn_s && e.time >= t_change)
        else {
            continue;
        };
        let hint = strong_hint(stop, radius);
        let teacher = erp_to_dir(&teacher_fixation(&scenes[si], Some(&hint)));
        if !hint.contains(&teacher) {
            continue;
        }
        let obs: Vec<SphereDir> = session.gaze_obs[seg_start..=seg_end]
            .iter()
            .map(|g| g.1)
            .collect();
        let Some(observed) = mean_dir(&obs) else {
            continue;
        };
        let weight = if in_window(t0, scene_transition_window(t_change)) {
            cfg.in_window_weight
        } else {
            1.0
        };
        pairs.push(CalibPair::new(
            observed.angles(),
            teacher.angles(),
            weight,
            t0,
        ));
    }
    Ok(pairs)
}

/// Student that refits whenever at least `batch` new pairs have arrived.
#[derive(Debug, Clone)]
pub struct OnlineCalibrator {
    pub pairs: Vec<CalibPair>,
    pub model: StudentModel,
    pub batch: usize,
    pending: usize,
    pub refits: usize,
    pub kind: StudentKind,
}

impl OnlineCalibrator {
    pub fn new(batch: usize) -> Self {
        Self {
            pairs: Vec::new(),
            model: StudentModel::identity(),
            batch: batch.max(1),
            pending: 0,
            refits: 0,
            kind: StudentKind::Identity,
        }
    }

    /// Adds a pair; returns true when the model was refitted. A degenerate
    /// refit keeps the previous model.
    pub fn push(&mut self, pair: CalibPair) -> bool {
        self.pairs.push(pair);
        self.pending += 1;
        if self.pending < self.batch || self.pairs.len() < 3 {
            return false;
        }
        self.refit()
    }

    /// Refits on everything pending, however few.
    pub fn flush(&mut self) -> bool {
        if self.pending == 0 || self.pairs.len() < 3 {
            return false;
        }
        self.refit()
    }

    fn refit(&mut self) -> bool {
        self.pending = 0;
        match select_student(&self.pairs) {
            Ok((m, kind)) => {
                self.model = m;
                self.kind = kind;
                self.refits += 1;
                true
            }
            Err(_) => false,
        }
    }
}

/// Angular error (radians) of each held-out fixation before and after
/// correction. The observed fixation point is the mean observed direction
/// over the fixation interval.
pub fn evaluate_student(session: &Session, model: &StudentModel) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(session.fixations.len());
    let mut k = 0;
    for f in &session.fixations {
        while k < session.gaze_obs.len() && session.gaze_obs[k].0 < f.t0 - 1e-9 {
            k += 1;
        }
        let mut obs = Vec::new();
        let mut m = k;
        while m < session.gaze_obs.len() && session.gaze_obs[m].0 <= f.t1 + 1e-9 {
            obs.push(session.gaze_obs[m].1);
            m += 1;
        }
        let Some(mean) = mean_dir(&obs) else {
            continue;
        };
        let corrected = apply_student_dir(model, &mean);
        out.push((mean.angle_to(&f.truth), corrected.angle_to(&f.truth)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub subject_id: String,
    pub n_pairs: usize,
    pub n_in_window: usize,
    pub refits: usize,
    pub held_out_fixations: usize,
    pub pre_median_deg: f64,
    pub post_median_deg: f64,
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub residual_rms_deg: f64,
    pub kind: StudentKind,
    /// Per held-out fixation `[before, after]` angular error, degrees.
    pub held_out_errors_deg: Vec<[f64; 2]>,
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs a calibration session and a separate held-out session for one
/// subject, feeds the extracted pairs to an [`OnlineCalibrator`] in time
/// order and reports held-out errors before and after correction.
pub fn calibrate_session(
    scenes: &[Scene],
    profile: &SubjectProfile,
    cfg: &SessionConfig,
    seed: u64,
    subject_index: u64,
) -> Result<(StudentModel, CalibrationReport), CalibError> {
    let mut rng = rng_stream(
        seed,
        stream_id(StreamDomain::Calibration, 2 * subject_index),
    );
    let train = simulate_session(scenes, profile, cfg, &mut rng);
    let mut rng = rng_stream(
        seed,
        stream_id(StreamDomain::Calibration, 2 * subject_index + 1),
    );
    let held_out = simulate_session(scenes, profile, cfg, &mut rng);
    let pairs = extract_pairs(&train, scenes, cfg)?;
    let mut online = OnlineCalibrator::new(3);
    for p in &pairs {
        online.push(*p);
    }
    online.flush();
    let model = online.model.clone();
    let errs = evaluate_student(&held_out, &model);
    let report = CalibrationReport {
        subject_id: profile.id.clone(),
        n_pairs: pairs.len(),
        n_in_window: pairs.iter().filter(|p| p.weight != 1.0).count(),
        refits: online.refits,
        held_out_fixations: errs.len(),
        pre_median_deg: median(errs.iter().map(|e| e.0).collect()).to_degrees(),
        post_median_deg: median(errs.iter().map(|e| e.1).collect()).to_degrees(),
        a: model.a,
        b: model.b,
        residual_rms_deg: model.residual_rms.to_degrees(),
        kind: online.kind,
        held_out_errors_deg: errs
            .iter()
            .map(|e| [e.0.to_degrees(), e.1.to_degrees()])
            .collect(),
    };
    Ok((model, report))
}
