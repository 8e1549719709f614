use std::f64::consts::PI;

use gazeforge_core::domain::{rng_stream, ErpPoint, ImageSize, Raster};
use gazeforge_core::geometry::{
    backmap_table_text, dir_to_erp, erp_to_dir, extract_fov, project_point, ring_rig, triangulate,
    CameraModel, SphereDir,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Median error of the independent homogeneous-DLT run (20k trials), plus 10%
/// to absorb sampling noise between the two Monte-Carlo runs.
const NOISY_MEDIAN_BASELINE_M: f64 = 9.755884e-4 * 1.1;

fn random_camera(rng: &mut impl Rng, target: [f64; 3]) -> CameraModel {
    let az: f64 = rng.random_range(-PI..PI);
    let el: f64 = rng.random_range(-0.6..0.9);
    let dist = rng.random_range(1.5..4.0);
    let eye = [
        target[0] + dist * el.cos() * az.cos(),
        target[1] + dist * el.cos() * az.sin(),
        target[2] + dist * el.sin(),
    ];
    let aim = [
        target[0] + rng.random_range(-0.2..0.2),
        target[1] + rng.random_range(-0.2..0.2),
        target[2] + rng.random_range(-0.2..0.2),
    ];
    let f = rng.random_range(600.0..1400.0);
    let k = rng.random_range(-0.1..0.1);
    CameraModel::look_at(eye, aim, f, 640.0, 360.0, k).unwrap()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn random_rig_case(seed: u64) -> ([f64; 3], Vec<CameraModel>) {
    let mut rng = rng_stream(seed, 0);
    let target = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.5..2.0),
    ];
    loop {
        let cams: Vec<_> = (0..8).map(|_| random_camera(&mut rng, target)).collect();
        let min_baseline = cams
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                cams[i + 1..]
                    .iter()
                    .map(move |b| dist(a.center(), b.center()))
            })
            .fold(f64::INFINITY, f64::min);
        if min_baseline > 0.2 {
            let p = [
                target[0] + rng.random_range(-0.3..0.3),
                target[1] + rng.random_range(-0.3..0.3),
                target[2] + rng.random_range(-0.3..0.3),
            ];
            return (p, cams);
        }
    }
}

#[test]
fn noiseless_triangulation_over_random_rigs() {
    let mut worst: f64 = 0.0;
    for seed in 0..1000 {
        let (p, cams) = random_rig_case(seed);
        let obs: Vec<_> = cams
            .iter()
            .map(|c| (c, project_point(c, p).unwrap()))
            .collect();
        let tri = triangulate(&obs).unwrap();
        worst = worst.max(dist(tri.point, p));
        // every pair of views also suffices
        let pair = triangulate(&obs[..2]).unwrap();
        worst = worst.max(dist(pair.point, p));
    }
    assert!(worst < 1e-6, "worst error {worst:e} m");
}

#[test]
fn noisy_eight_camera_median_below_baseline() {
    let rig = ring_rig(8, 2.5, 1.8, [0.0, 0.0, 1.2], 900.0, [640.0, 360.0], 30.0).unwrap();
    let mut rng = rng_stream(11, 1);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut errs: Vec<f64> = (0..4000)
        .map(|_| {
            let p = [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                1.2 + rng.random_range(-0.5..0.5),
            ];
            let obs: Vec<_> = rig
                .cameras
                .iter()
                .map(|c| {
                    let px = project_point(c, p).unwrap();
                    (
                        c,
                        [
                            px[0] + noise.sample(&mut rng),
                            px[1] + noise.sample(&mut rng),
                        ],
                    )
                })
                .collect();
            dist(triangulate(&obs).unwrap().point, p)
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];
    assert!(median < NOISY_MEDIAN_BASELINE_M, "median {median:e} m");
}

#[test]
fn rms_does_not_grow_with_consistent_view() {
    for seed in 0..200 {
        let (p, cams) = random_rig_case(10_000 + seed);
        let obs: Vec<_> = cams
            .iter()
            .map(|c| (c, project_point(c, p).unwrap()))
            .collect();
        for n in 2..obs.len() {
            let before = triangulate(&obs[..n]).unwrap().rms_px;
            let after = triangulate(&obs[..n + 1]).unwrap().rms_px;
            assert!(
                after <= before + 1e-7,
                "seed {seed} n {n}: {before:e} -> {after:e}"
            );
        }
    }
}

#[test]
fn fov_backmap_matches_golden_table() {
    let size = ImageSize::DEFAULT;
    let erp = Raster::new(size.width as usize, size.height as usize, [10, 20, 30]);
    let g = SphereDir::from_angles(0.0, 0.0);
    let patch = extract_fov(&erp, size, &g, 90.0, 8, 8).unwrap();
    let golden = include_str!("golden/fov_backmap_8x8.txt");
    assert_eq!(backmap_table_text(&patch), golden);
}

#[test]
fn fov_backmap_within_diagonal_half_angle() {
    let size = ImageSize::from_height(240);
    let erp = Raster::new(size.width as usize, size.height as usize, [0, 0, 0]);
    let mut rng = rng_stream(5, 2);
    for _ in 0..50 {
        let g = SphereDir::from_angles(rng.random_range(-PI..PI), rng.random_range(-1.4..1.4));
        let fov: f64 = rng.random_range(20.0..150.0);
        let (w, h) = (rng.random_range(2..24), rng.random_range(2..24));
        let patch = extract_fov(&erp, size, &g, fov, w, h).unwrap();
        let f = (w as f64 / 2.0) / (fov.to_radians() / 2.0).tan();
        let half_diag = ((w as f64 / 2.0).hypot(h as f64 / 2.0) / f).atan();
        for p in &patch.backmap {
            assert!(erp_to_dir(p).angle_to(&g) <= half_diag + 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn erp_round_trip(u in 0.0f64..1920.0, v in 0.0f64..960.0) {
        let size = ImageSize::DEFAULT;
        let pt = ErpPoint::new(u, v, size).unwrap();
        let d = erp_to_dir(&pt);
        prop_assert!((d.norm() - 1.0).abs() < 1e-12);
        let back = dir_to_erp(&d, size);
        let e = erp_to_dir(&back);
        prop_assert!(d.angle_to(&e) < 1e-9);
    }

    #[test]
    fn dir_round_trip(lon in -PI..PI, lat in -1.5f64..1.5) {
        let d = SphereDir::from_angles(lon, lat);
        let back = erp_to_dir(&dir_to_erp(&d, ImageSize::DEFAULT));
        prop_assert!(d.angle_to(&back) < 1e-9);
    }
}
