//! Simulated capture: subject placement, multi-camera head observation and
//! triangulation, head-mounted viewport sampling of biased gaze, and the
//! remapping of recorded gaze back onto the panorama.
//!
//! World frame: +Z up, the panorama is displayed on a sphere of radius `R`
//! centred at `(0, 0, target_height)`. A scanpath point is the direction of
//! the displayed content seen from that centre; a subject standing elsewhere
//! sees it along a different ray.

use std::f64::consts::TAU;

use gazeforge_core::calib::{apply_student_dir, StudentModel};
use gazeforge_core::domain::{rng_stream, stream_id, ErpPoint, Scanpath, StreamDomain};
use gazeforge_core::geometry::{
    dir_to_erp, erp_to_dir, fov_ray, ring_rig, triangulate, wrap_angle, CameraRig, SphereDir,
};
use gazeforge_core::simscene::{simulate_multicam, SimError, SubjectProfile, TICK_S};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{CalibrationConfig, ProjectionConfig, RigConfig};

fn episode_stream(k: usize, part: u64) -> u64 {
    stream_id(StreamDomain::Pipeline, 4 * k as u64 + part)
}

/// Subject `i` of the cohort: the first `biased_subjects` carry an affine
/// bias with an offset drawn from the configured range.
pub fn cohort(seed: u64, n_subjects: usize, cfg: &CalibrationConfig) -> Vec<SubjectProfile> {
    (0..n_subjects)
        .map(|i| {
            let id = gazeforge_core::simscene::subject_id(i);
            let mut rng = rng_stream(seed, stream_id(StreamDomain::Subject, i as u64));
            if i < cfg.biased_subjects {
                let offset = if cfg.bias_max_deg > cfg.bias_min_deg {
                    rng.random_range(cfg.bias_min_deg..cfg.bias_max_deg)
                } else {
                    cfg.bias_min_deg
                };
                SubjectProfile::random_affine(
                    id,
                    offset,
                    cfg.matrix_jitter,
                    cfg.noise_deg,
                    &mut rng,
                )
            } else {
                let mut p = SubjectProfile::identity(id);
                p.sigma = cfg.noise_deg.to_radians();
                p.tags = vec!["identity".into()];
                p
            }
        })
        .collect()
}

pub fn build_rig(cfg: &RigConfig) -> anyhow::Result<CameraRig> {
    Ok(ring_rig(
        cfg.cameras,
        cfg.radius,
        cfg.height,
        [0.0, 0.0, cfg.target_height],
        cfg.focal,
        [cfg.frame_width as f64 / 2.0, cfg.frame_height as f64 / 2.0],
        cfg.capture_rate,
    )?)
}

pub fn scene_centre(cfg: &RigConfig) -> [f64; 3] {
    [0.0, 0.0, cfg.target_height]
}

/// Where the subject of episode `k` stands and which way they face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub head: [f64; 3],
    /// Azimuth of the facing direction, radians.
    pub facing: f64,
}

/// Uniform position in the room disc; the subject faces the content of the
/// first fixation.
pub fn place_subject(seed: u64, k: usize, cfg: &RigConfig, scan: &Scanpath) -> Placement {
    let mut rng = rng_stream(seed, episode_stream(k, 0));
    let r = cfg.room_radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..TAU);
    let z = if cfg.head_height_max > cfg.head_height_min {
        rng.random_range(cfg.head_height_min..cfg.head_height_max)
    } else {
        cfg.head_height_min
    };
    Placement {
        head: [r * a.cos(), r * a.sin(), z],
        facing: erp_to_dir(&scan.fixations[0].point).lon(),
    }
}

/// Cameras whose bearing from the head lies within the eye visibility angle.
pub fn eye_visible(rig: &CameraRig, cfg: &RigConfig, at: &Placement) -> Vec<usize> {
    let limit = cfg.eye_visibility_deg.to_radians();
    rig.cameras
        .iter()
        .enumerate()
        .filter(|(_, cam)| {
            let c = cam.center();
            let bearing = (c[1] - at.head[1]).atan2(c[0] - at.head[0]);
            wrap_angle(bearing - at.facing).abs() <= limit
        })
        .map(|(i, _)| i)
        .collect()
}

/// Pixels of the head in every eye-visible camera that also has it in frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadObservation {
    pub visible: Vec<usize>,
    /// `None` when fewer than two cameras produced a view.
    pub views: Option<Vec<(usize, [f64; 2])>>,
}

pub fn observe_head(
    rig: &CameraRig,
    cfg: &RigConfig,
    at: &Placement,
    seed: u64,
    k: usize,
) -> anyhow::Result<HeadObservation> {
    let visible = eye_visible(rig, cfg, at);
    let mut rng = rng_stream(seed, episode_stream(k, 1));
    let sub = CameraRig {
        cameras: visible.iter().map(|&i| rig.cameras[i].clone()).collect(),
        ..rig.clone()
    };
    let views = match simulate_multicam(&sub, at.head, cfg.pixel_sigma, &mut rng) {
        Ok(obs) => Some(obs.into_iter().map(|(i, px)| (visible[i], px)).collect()),
        Err(SimError::Coverage { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(HeadObservation { visible, views })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadFix {
    pub truth: [f64; 3],
    pub estimate: [f64; 3],
    /// Cameras whose views were triangulated.
    pub cameras: Vec<usize>,
    pub covered: bool,
    pub error_m: f64,
}

/// Triangulated head position; missing coverage or a degenerate system
/// falls back to `fallback`.
pub fn triangulate_head(
    rig: &CameraRig,
    obs: &HeadObservation,
    truth: [f64; 3],
    fallback: [f64; 3],
) -> HeadFix {
    let located = obs.views.as_ref().and_then(|views| {
        let pairs: Vec<_> = views
            .iter()
            .map(|(i, px)| (&rig.cameras[*i], *px))
            .collect();
        triangulate(&pairs)
            .ok()
            .map(|t| (t.point, views.iter().map(|(i, _)| *i).collect()))
    });
    let (estimate, cameras, covered) = match located {
        Some((p, cams)) => (p, cams, true),
        None => (fallback, Vec::new(), false),
    };
    HeadFix {
        truth,
        estimate,
        cameras,
        covered,
        error_m: dist(truth, estimate),
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn dir_between(from: [f64; 3], to: [f64; 3]) -> SphereDir {
    SphereDir::new(to[0] - from[0], to[1] - from[1], to[2] - from[2])
        .expect("head lies strictly inside the scene sphere")
}

/// Point on the scene sphere shown at panorama direction `d`.
pub fn sphere_point(centre: [f64; 3], radius: f64, d: &SphereDir) -> [f64; 3] {
    [
        centre[0] + radius * d.x,
        centre[1] + radius * d.y,
        centre[2] + radius * d.z,
    ]
}

/// Panorama direction hit by the ray from `origin` along `d`.
pub fn remap_ray(origin: [f64; 3], d: &SphereDir, centre: [f64; 3], radius: f64) -> SphereDir {
    let o = [
        origin[0] - centre[0],
        origin[1] - centre[1],
        origin[2] - centre[2],
    ];
    let b = o[0] * d.x + o[1] * d.y + o[2] * d.z;
    let c = o[0] * o[0] + o[1] * o[1] + o[2] * o[2] - radius * radius;
    let s = -b + (b * b - c).max(0.0).sqrt();
    let hit = [
        origin[0] + s * d.x,
        origin[1] + s * d.y,
        origin[2] + s * d.z,
    ];
    dir_between(centre, hit)
}

fn slerp(a: &SphereDir, b: &SphereDir, s: f64) -> SphereDir {
    let ang = a.angle_to(b);
    if ang < 1e-12 || s >= 1.0 {
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

/// Viewport pixel `(row, col)` nearest to where `d` crosses the image plane
/// of a square `n x n` view centred on `head`, or `None` outside it.
pub fn viewport_pixel(
    head: &SphereDir,
    fov_deg: f64,
    n: usize,
    d: &SphereDir,
) -> Option<(usize, usize)> {
    let (lon0, lat0) = (head.lon(), head.lat());
    let (s0, c0) = lat0.sin_cos();
    let (sl, cl) = lon0.sin_cos();
    let right = [-sl, cl, 0.0];
    let up = [-s0 * cl, -s0 * sl, c0];
    let fwd = [c0 * cl, c0 * sl, s0];
    let v = d.as_array();
    let dot = |a: [f64; 3]| a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
    let z = dot(fwd);
    if z <= 1e-9 {
        return None;
    }
    let f = (n as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
    let col = f * dot(right) / z + (n as f64 - 1.0) / 2.0;
    let row = (n as f64 - 1.0) / 2.0 - f * dot(up) / z;
    let (c, r) = (col.round(), row.round());
    if c < 0.0 || r < 0.0 || c > n as f64 - 1.0 || r > n as f64 - 1.0 {
        return None;
    }
    Some((r as usize, c as usize))
}

/// One recorded gaze sample of the headset.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSample {
    pub tick: u64,
    pub fixation: usize,
    pub head: SphereDir,
    /// Viewport pixel of the observed gaze; `None` when it fell outside.
    pub pixel: Option<(usize, usize)>,
    /// Observed gaze direction recovered from the pixel.
    pub observed: Option<SphereDir>,
}

/// Samples the observed gaze of one episode every `interval_s`.
///
/// Noise is drawn for every tick whether or not it is sampled, so coarser
/// intervals see a subset of the samples of finer ones. The head starts
/// turning at saccade onset and reaches the new target after `head_turn_s`.
pub fn project_episode(
    scan: &Scanpath,
    profile: &SubjectProfile,
    head: [f64; 3],
    proj: &ProjectionConfig,
    centre: [f64; 3],
    seed: u64,
    k: usize,
) -> anyhow::Result<Vec<GazeSample>> {
    let mut rng = rng_stream(seed, episode_stream(k, 2));
    let noise = Normal::new(0.0, profile.sigma.max(0.0))?;
    let step = proj.interval_ticks().max(1);
    let truth: Vec<SphereDir> = scan
        .fixations
        .iter()
        .map(|f| {
            dir_between(
                head,
                sphere_point(centre, proj.scene_radius, &erp_to_dir(&f.point)),
            )
        })
        .collect();
    let mut out = Vec::new();
    let mut tick = 0u64;
    for (i, f) in scan.fixations.iter().enumerate() {
        let start = (f.t_start / TICK_S).round() as u64;
        let len = ((f.duration / TICK_S).round() as u64).max(1);
        let prev = if i == 0 { truth[0] } else { truth[i - 1] };
        while tick < start + len {
            let n = [noise.sample(&mut rng), noise.sample(&mut rng)];
            if tick >= start && tick % step == 0 {
                let since_onset = (tick - start + 1) as f64 * TICK_S;
                let s = if proj.head_turn_s > 0.0 {
                    (since_onset / proj.head_turn_s).min(1.0)
                } else {
                    1.0
                };
                let h = slerp(&prev, &truth[i], s);
                let [lon, lat] = profile.map(truth[i].angles());
                let obs = SphereDir::from_angles(
                    wrap_angle(lon + n[0]),
                    (lat + n[1]).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
                );
                let pixel = viewport_pixel(&h, proj.fov_deg, proj.patch_px, &obs);
                let observed = pixel
                    .map(|(r, c)| fov_ray(&h, proj.fov_deg, proj.patch_px, proj.patch_px, r, c));
                out.push(GazeSample {
                    tick,
                    fixation: i,
                    head: h,
                    pixel,
                    observed,
                });
            }
            tick += 1;
        }
    }
    Ok(out)
}

/// Unit mean of `dirs`, `None` when empty or cancelling.
pub fn mean_dir(dirs: &[SphereDir]) -> Option<SphereDir> {
    if dirs.is_empty() {
        return None;
    }
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for d in dirs {
        x += d.x;
        y += d.y;
        z += d.z;
    }
    SphereDir::new(x, y, z)
}

/// Per-fixation panorama point recovered from the kept samples, optionally
/// corrected by a student model; `None` for fixations without samples.
pub fn recover_fixations(
    scan: &Scanpath,
    samples: &[GazeSample],
    student: Option<&StudentModel>,
    head_estimate: [f64; 3],
    centre: [f64; 3],
    radius: f64,
) -> Vec<Option<ErpPoint>> {
    let mut per: Vec<Vec<SphereDir>> = vec![Vec::new(); scan.fixations.len()];
    for s in samples {
        let Some(obs) = s.observed else { continue };
        let corrected = match student {
            Some(m) => apply_student_dir(m, &obs),
            None => obs,
        };
        per[s.fixation].push(remap_ray(head_estimate, &corrected, centre, radius));
    }
    per.iter()
        .map(|dirs| mean_dir(dirs).map(|d| dir_to_erp(&d, scan.fixations[0].point.size)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remap_from_centre_is_identity() {
        let d = SphereDir::from_angles(0.7, -0.2);
        let back = remap_ray([0.0, 0.0, 1.6], &d, [0.0, 0.0, 1.6], 3.0);
        assert!(back.angle_to(&d) < 1e-12);
    }

    #[test]
    fn remap_inverts_parallax() {
        let centre = [0.0, 0.0, 1.6];
        let content = SphereDir::from_angles(-1.1, 0.3);
        let head = [0.4, -0.3, 1.7];
        let seen = dir_between(head, sphere_point(centre, 3.0, &content));
        assert!(seen.angle_to(&content) > 0.05);
        assert!(remap_ray(head, &seen, centre, 3.0).angle_to(&content) < 1e-12);
    }

    #[test]
    fn viewport_pixel_inverts_the_ray() {
        let h = SphereDir::from_angles(2.0, 0.4);
        for (r, c) in [(0, 0), (10, 500), (255, 256), (511, 511)] {
            let d = fov_ray(&h, 120.0, 512, 512, r, c);
            assert_eq!(viewport_pixel(&h, 120.0, 512, &d), Some((r, c)));
        }
        let behind = SphereDir::from_angles(2.0 - std::f64::consts::PI, -0.4);
        assert_eq!(viewport_pixel(&h, 120.0, 512, &behind), None);
    }
}
