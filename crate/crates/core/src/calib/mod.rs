//! Online personalized calibration: head-movement events, scanning/fixation
//! labelling, head-derived gaze priors, saliency teacher targets and an
//! affine student correction.

mod session;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ErpPoint, Scene, SceneObject};
use crate::geometry::{dir_to_erp, erp_to_dir, head_to_dir, wrap_angle, HeadPose, SphereDir};

pub use session::{
    calibrate_session, evaluate_student, extract_pairs, median, simulate_session,
    CalibrationReport, OnlineCalibrator, Session, SessionConfig, TrueFixation,
};

#[derive(Debug, Error, PartialEq)]
pub enum CalibError {
    #[error("series is not time-ordered at sample {0}")]
    Unordered(usize),
    #[error("need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("degenerate calibration fit: {0}")]
    DegenerateFit(String),
}

/// Angles `[lon, lat]` in radians.
pub type Angles = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadEventKind {
    MovementStart,
    MovementStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadEvent {
    pub kind: HeadEventKind,
    pub time: f64,
    pub pose: HeadPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub pose: HeadPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeState {
    Scanning,
    Fixation,
}

fn check_ordered(times: impl Iterator<Item = f64>) -> Result<(), CalibError> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in times.enumerate() {
        if !(t > prev) {
            return Err(CalibError::Unordered(i));
        }
        prev = t;
    }
    Ok(())
}

/// Angular speed of the head's forward axis over each interval; entry `i`
/// covers samples `i` and `i + 1`.
pub fn head_speeds(series: &[PoseSample]) -> Vec<f64> {
    series
        .windows(2)
        .map(|w| head_to_dir(&w[0].pose).angle_to(&head_to_dir(&w[1].pose)) / (w[1].t - w[0].t))
        .collect()
}

/// Hysteresis detector: a start fires once the speed has stayed strictly
/// above `omega_threshold` for at least `hold` seconds, a stop once it has
/// stayed at or below it for at least `hold`. Event times are the beginning
/// of the qualifying run, so starts and stops always alternate.
pub fn detect_head_events(
    series: &[PoseSample],
    omega_threshold: f64,
    hold: f64,
) -> Result<Vec<HeadEvent>, CalibError> {
    if series.len() < 2 {
        return Err(CalibError::TooShort {
            need: 2,
            got: series.len(),
        });
    }
    check_ordered(series.iter().map(|s| s.t))?;
    let speeds = head_speeds(series);
    let mut events = Vec::new();
    let mut moving = false;
    // index of the first interval in the current run that opposes the state
    let mut run_start: Option<usize> = None;
    for (i, &w) in speeds.iter().enumerate() {
        let opposing = if moving {
            w <= omega_threshold
        } else {
            w > omega_threshold
        };
        if !opposing {
            run_start = None;
            continue;
        }
        let s = *run_start.get_or_insert(i);
        // the run spans from sample s to sample i + 1
        if series[i + 1].t - series[s].t >= hold - 1e-12 {
            let kind = if moving {
                HeadEventKind::MovementStop
            } else {
                HeadEventKind::MovementStart
            };
            events.push(HeadEvent {
                kind,
                time: series[s].t,
                pose: series[s].pose,
            });
            moving = !moving;
            run_start = None;
        }
    }
    Ok(events)
}

/// Velocity-threshold labelling: a sample is scanning when the angular speed
/// of the interval ending at it exceeds `v_threshold`. The first sample
/// takes the label of the first interval.
pub fn classify_gaze_state(
    samples: &[(f64, SphereDir)],
    v_threshold: f64,
) -> Result<Vec<GazeState>, CalibError> {
    check_ordered(samples.iter().map(|s| s.0))?;
    if samples.len() < 2 {
        return Ok(vec![GazeState::Fixation; samples.len()]);
    }
    let label = |w: &[(f64, SphereDir)]| {
        let speed = w[0].1.angle_to(&w[1].1) / (w[1].0 - w[0].0);
        if speed > v_threshold {
            GazeState::Scanning
        } else {
            GazeState::Fixation
        }
    };
    let mut out: Vec<GazeState> = samples.windows(2).map(label).collect();
    out.insert(0, out[0]);
    Ok(out)
}

/// Cone of plausible gaze directions around the head's forward axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HintRegion {
    pub center: SphereDir,
    pub radius: f64,
}

pub const DEFAULT_HINT_RADIUS_DEG: f64 = 10.0;

impl HintRegion {
    pub fn contains(&self, d: &SphereDir) -> bool {
        self.center.angle_to(d) <= self.radius + 1e-12
    }

    /// Rotates `d` toward the centre along the great circle until it lies on
    /// the cone; directions already inside are returned unchanged.
    pub fn clamp(&self, d: &SphereDir) -> SphereDir {
        let ang = self.center.angle_to(d);
        if ang <= self.radius {
            return *d;
        }
        let c = self.center.as_array();
        let v = d.as_array();
        let dot = self.center.dot(d);
        let mut perp = [v[0] - dot * c[0], v[1] - dot * c[1], v[2] - dot * c[2]];
        let n = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        if n < 1e-15 {
            // antipodal: any direction on the cone is equally close
            let helper = if c[2].abs() < 0.9 {
                [0.0, 0.0, 1.0]
            } else {
                [1.0, 0.0, 0.0]
            };
            let k = helper[0] * c[0] + helper[1] * c[1] + helper[2] * c[2];
            perp = [
                helper[0] - k * c[0],
                helper[1] - k * c[1],
                helper[2] - k * c[2],
            ];
        }
        let n = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
        let (s, co) = self.radius.sin_cos();
        SphereDir::new(
            co * c[0] + s * perp[0] / n,
            co * c[1] + s * perp[1] / n,
            co * c[2] + s * perp[2] / n,
        )
        .expect("unit combination")
    }
}

/// Prior gaze cone centred on the head direction at the event.
pub fn strong_hint(event: &HeadEvent, radius_rad: f64) -> HintRegion {
    HintRegion {
        center: head_to_dir(&event.pose),
        radius: radius_rad,
    }
}

/// Objective fixation: restricted to objects whose centroid lies in the
/// prior (all objects when none do), the motion start of a dynamic object if
/// there is one, otherwise the centroid of the most salient object. Ties go
/// to the higher saliency, then the lowest id.
pub fn teacher_fixation(scene: &Scene, prior: Option<&HintRegion>) -> ErpPoint {
    teacher_object(scene, prior).1
}

/// Object chosen by [`teacher_fixation`] together with its point.
pub fn teacher_object<'a>(
    scene: &'a Scene,
    prior: Option<&HintRegion>,
) -> (&'a SceneObject, ErpPoint) {
    let in_prior: Vec<&SceneObject> = scene
        .objects
        .iter()
        .filter(|o| prior.is_none_or(|r| r.contains(&erp_to_dir(&o.centroid_point(scene.size)))))
        .collect();
    let pool = if in_prior.is_empty() {
        scene.objects.iter().collect()
    } else {
        in_prior
    };
    let pick = |a: &'a SceneObject, b: &'a SceneObject| {
        if b.saliency > a.saliency || (b.saliency == a.saliency && b.id < a.id) {
            b
        } else {
            a
        }
    };
    let dynamic = pool
        .iter()
        .copied()
        .filter(|o| o.dynamic && o.motion_start.is_some())
        .reduce(pick);
    if let Some(d) = dynamic {
        return (d, d.motion_start.expect("filtered"));
    }
    let best = pool.into_iter().reduce(pick).expect("scenes have objects");
    (best, best.centroid_point(scene.size))
}

/// Observed and teacher angles for one calibration sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibPair {
    pub observed: Angles,
    /// Longitude unwrapped to within pi of the observed longitude.
    pub teacher: Angles,
    pub weight: f64,
    pub time: f64,
}

impl CalibPair {
    pub fn new(observed: Angles, teacher: Angles, weight: f64, time: f64) -> Self {
        let lon = observed[0] + wrap_angle(teacher[0] - observed[0]);
        Self {
            observed,
            teacher: [lon, teacher[1]],
            weight,
            time,
        }
    }
}

/// Affine correction `A x + b` on gaze angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentModel {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub n_pairs: usize,
    /// Weighted RMS of the fitted residuals, radians.
    pub residual_rms: f64,
}

impl StudentModel {
    pub fn identity() -> Self {
        Self {
            a: [[1.0, 0.0], [0.0, 1.0]],
            b: [0.0, 0.0],
            n_pairs: 0,
            residual_rms: 0.0,
        }
    }

    pub fn map_raw(&self, x: Angles) -> Angles {
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1],
        ]
    }

    /// Weighted RMS residual of this model on `pairs`.
    pub fn residual_on(&self, pairs: &[CalibPair]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for p in pairs {
            let y = self.map_raw(p.observed);
            num += p.weight * ((y[0] - p.teacher[0]).powi(2) + (y[1] - p.teacher[1]).powi(2));
            den += p.weight;
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    }
}

/// Weighted least-squares affine fit from observed to teacher angles.
pub fn calibrate_student(pairs: &[CalibPair]) -> Result<StudentModel, CalibError> {
    if pairs.len() < 3 {
        return Err(CalibError::DegenerateFit(format!(
            "need at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs
        .iter()
        .any(|p| !(p.weight > 0.0 && p.weight.is_finite()))
    {
        return Err(CalibError::DegenerateFit(
            "pair weights must be positive".into(),
        ));
    }
    let n = pairs.len();
    let mut x = DMatrix::<f64>::zeros(n, 3);
    let mut y = DMatrix::<f64>::zeros(n, 2);
    for (i, p) in pairs.iter().enumerate() {
        let s = p.weight.sqrt();
        x[(i, 0)] = s * p.observed[0];
        x[(i, 1)] = s * p.observed[1];
        x[(i, 2)] = s;
        y[(i, 0)] = s * p.teacher[0];
        y[(i, 1)] = s * p.teacher[1];
    }
    let svd = x.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(CalibError::DegenerateFit(
            "observed angles are collinear".into(),
        ));
    }
    let mut coef = DMatrix::<f64>::zeros(3, 2);
    for k in 0..2 {
        let col: DVector<f64> = y.column(k).into();
        let sol = svd
            .solve(&col, 0.0)
            .map_err(|e| CalibError::DegenerateFit(e.to_string()))?;
        coef.set_column(k, &sol);
    }
    let mut model = StudentModel {
        a: [[coef[(0, 0)], coef[(1, 0)]], [coef[(0, 1)], coef[(1, 1)]]],
        b: [coef[(2, 0)], coef[(2, 1)]],
        n_pairs: n,
        residual_rms: 0.0,
    };
    let det = model.a[0][0] * model.a[1][1] - model.a[0][1] * model.a[1][0];
    if det.abs() < 1e-9 {
        return Err(CalibError::DegenerateFit(format!(
            "fitted matrix is singular (det {det:e})"
        )));
    }
    model.residual_rms = model.residual_on(pairs);
    Ok(model)
}

/// Weighted mean offset `teacher - observed` with the identity matrix.
pub fn fit_offset(pairs: &[CalibPair]) -> Result<StudentModel, CalibError> {
    let den: f64 = pairs.iter().map(|p| p.weight).sum();
    if pairs.is_empty() || !(den > 0.0 && den.is_finite()) {
        return Err(CalibError::DegenerateFit(
            "offset fit needs weighted pairs".into(),
        ));
    }
    let mut b = [0.0; 2];
    for p in pairs {
        for k in 0..2 {
            b[k] += p.weight * (p.teacher[k] - p.observed[k]) / den;
        }
    }
    let mut model = StudentModel {
        b,
        n_pairs: pairs.len(),
        ..StudentModel::identity()
    };
    model.residual_rms = model.residual_on(pairs);
    Ok(model)
}

/// A more complex student must cut the leave-one-out error below this
/// fraction of the best simpler one.
pub const LOO_MARGIN: f64 = 0.97;

/// Complexity levels compared by [`select_student`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudentKind {
    Identity,
    Offset,
    Affine,
}

fn fit_kind(kind: StudentKind, pairs: &[CalibPair]) -> Result<StudentModel, CalibError> {
    match kind {
        StudentKind::Identity => {
            let mut m = StudentModel::identity();
            m.n_pairs = pairs.len();
            m.residual_rms = m.residual_on(pairs);
            Ok(m)
        }
        StudentKind::Offset => fit_offset(pairs),
        StudentKind::Affine => calibrate_student(pairs),
    }
}

/// Weighted leave-one-out squared error of `kind` on `pairs`, from the
/// hat-matrix identity for linear least squares.
fn loo_error(kind: StudentKind, pairs: &[CalibPair]) -> Option<f64> {
    let fit = fit_kind(kind, pairs).ok()?;
    let cols = |p: &CalibPair| -> Vec<f64> {
        let s = p.weight.sqrt();
        match kind {
            StudentKind::Identity => vec![],
            StudentKind::Offset => vec![s],
            StudentKind::Affine => vec![s * p.observed[0], s * p.observed[1], s],
        }
    };
    let k = cols(&pairs[0]).len();
    let gram_inv = if k > 0 {
        let mut g = DMatrix::<f64>::zeros(k, k);
        for p in pairs {
            let c = DVector::from_vec(cols(p));
            g += &c * c.transpose();
        }
        Some(g.try_inverse()?)
    } else {
        None
    };
    let (mut num, mut den) = (0.0, 0.0);
    for p in pairs {
        let h = match &gram_inv {
            Some(m) => {
                let c = DVector::from_vec(cols(p));
                (c.transpose() * m * &c)[(0, 0)]
            }
            None => 0.0,
        };
        if h >= 1.0 - 1e-12 {
            return None;
        }
        let y = fit.map_raw(p.observed);
        let r2 = (y[0] - p.teacher[0]).powi(2) + (y[1] - p.teacher[1]).powi(2);
        num += p.weight * r2 / (1.0 - h).powi(2);
        den += p.weight;
    }
    Some(num / den)
}

/// Robust student fit: pairs whose affine residual exceeds three times the
/// median are dropped as mislabelled, then identity, offset and affine models
/// compete by leave-one-out error on the rest. A more complex model must beat
/// the simpler ones by [`LOO_MARGIN`].
pub fn select_student(pairs: &[CalibPair]) -> Result<(StudentModel, StudentKind), CalibError> {
    let full = calibrate_student(pairs)?;
    let mut res: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let y = full.map_raw(p.observed);
            (y[0] - p.teacher[0]).hypot(y[1] - p.teacher[1])
        })
        .collect();
    let inliers: Vec<CalibPair> = {
        let mut sorted = res.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = 3.0 * sorted[sorted.len() / 2] + 1e-9;
        res.iter_mut()
            .zip(pairs)
            .filter(|(r, _)| **r <= cut)
            .map(|(_, p)| *p)
            .collect()
    };
    let mut best = (StudentKind::Identity, f64::INFINITY);
    for kind in [
        StudentKind::Identity,
        StudentKind::Offset,
        StudentKind::Affine,
    ] {
        if let Some(e) = loo_error(kind, &inliers) {
            if e < best.1 * LOO_MARGIN {
                best = (kind, e);
            }
        }
    }
    let model = fit_kind(best.0, &inliers)?;
    Ok((model, best.0))
}

/// Corrected angles with longitude wrapped and latitude clamped.
pub fn apply_student(model: &StudentModel, x: Angles) -> Angles {
    let y = model.map_raw(x);
    [
        wrap_angle(y[0]),
        y[1].clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
    ]
}

pub fn apply_student_dir(model: &StudentModel, d: &SphereDir) -> SphereDir {
    let y = apply_student(model, d.angles());
    SphereDir::from_angles(y[0], y[1])
}

pub fn apply_student_point(model: &StudentModel, p: &ErpPoint) -> ErpPoint {
    dir_to_erp(&apply_student_dir(model, &erp_to_dir(p)), p.size)
}

/// Length of the saliency-driven interval after a scene change, seconds.
pub const TRANSITION_WINDOW_S: f64 = 0.3;

/// Pairs falling in this interval (inclusive) get the in-window weight.
pub fn scene_transition_window(transition_time: f64) -> (f64, f64) {
    (transition_time, transition_time + TRANSITION_WINDOW_S)
}

pub fn in_window(t: f64, window: (f64, f64)) -> bool {
    t >= window.0 && t <= window.1
}
