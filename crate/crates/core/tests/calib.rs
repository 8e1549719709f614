use std::f64::consts::PI;

use gazeforge_core::calib::*;
use gazeforge_core::domain::{rng_stream, Lighting, Scene};
use gazeforge_core::geometry::{HeadPose, SphereDir};
use gazeforge_core::simscene::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn yaw_step_trace() -> Vec<PoseSample> {
    (0..=400)
        .map(|i| {
            let t = i as f64 / 100.0;
            let s = ((t - 2.0) / 0.3).clamp(0.0, 1.0);
            let yaw = 30f64.to_radians() * 0.5 * (1.0 - (PI * s).cos());
            PoseSample {
                t,
                pose: HeadPose::new(0.0, yaw, 0.0).unwrap(),
            }
        })
        .collect()
}

#[test]
fn yaw_step_events_match_thresholding_oracle() {
    let ev = detect_head_events(&yaw_step_trace(), 0.5, 0.05).unwrap();
    let got: Vec<_> = ev.iter().map(|e| (e.kind, e.time)).collect();
    // oracles/head_events.py
    let want = [
        (HeadEventKind::MovementStart, 2.02),
        (HeadEventKind::MovementStop, 2.28),
    ];
    assert_eq!(got.len(), want.len(), "{got:?}");
    for ((gk, gt), (wk, wt)) in got.iter().zip(&want) {
        assert_eq!(gk, wk);
        assert!((gt - wt).abs() < 1e-9, "{gt} vs {wt}");
    }
}

#[test]
fn saccade_trace_segments_match_speed_oracle() {
    let samples: Vec<(f64, SphereDir)> = (0..206)
        .map(|i| {
            let t = i as f64 / 100.0;
            let lon = if t < 1.0 {
                0.0
            } else {
                20f64.to_radians() * ((t - 1.0) / 0.05).clamp(0.0, 1.0)
            };
            (t, SphereDir::from_angles(lon, 0.0))
        })
        .collect();
    let labels = classify_gaze_state(&samples, 30f64.to_radians()).unwrap();
    // oracles/head_events.py: F0-100 S101-105 F106-205
    for (i, l) in labels.iter().enumerate() {
        let want = if (101..=105).contains(&i) {
            GazeState::Scanning
        } else {
            GazeState::Fixation
        };
        assert_eq!(*l, want, "sample {i}");
    }
}

#[test]
fn hint_clamps_far_gaze_onto_cone() {
    let hint = HintRegion {
        center: SphereDir::FORWARD,
        radius: 10f64.to_radians(),
    };
    let far = SphereDir::from_angles(25f64.to_radians(), 0.0);
    let c = hint.clamp(&far);
    assert!((SphereDir::FORWARD.angle_to(&c) - 10f64.to_radians()).abs() < 1e-12);
    assert!((c.angle_to(&far) - 15f64.to_radians()).abs() < 1e-12);
    assert!(c.lat().abs() < 1e-12);
}

#[test]
fn noisy_fit_residual_matches_monte_carlo_baseline() {
    // oracles/student_residual.py: mean 0.013684, max over 20k trials 0.017791
    let mut rng = rng_stream(8, 1);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut total = 0.0;
    let trials = 400;
    for _ in 0..trials {
        let prof =
            SubjectProfile::random_affine("m", rng.random_range(3.0..6.0), 0.03, 0.0, &mut rng);
        let pairs: Vec<CalibPair> = (0..50)
            .map(|_| {
                let truth = [
                    rng.random_range(-PI..PI),
                    rng.random_range(-PI / 3.0..PI / 3.0),
                ];
                let o = prof.map(truth);
                let obs = [o[0] + noise.sample(&mut rng), o[1] + noise.sample(&mut rng)];
                CalibPair {
                    observed: obs,
                    teacher: truth,
                    weight: 1.0,
                    time: 0.0,
                }
            })
            .collect();
        let m = calibrate_student(&pairs).unwrap();
        assert!(m.residual_rms <= 0.02, "{}", m.residual_rms);
        total += m.residual_rms;
    }
    let mean = total / trials as f64;
    assert!((mean - 0.013684).abs() < 0.0005, "mean {mean}");
}

fn cohort_scenes() -> Vec<Scene> {
    let spec = DatasetSpec::default();
    (0..12)
        .map(|i| dataset_scene(5, &spec, i).unwrap())
        .collect()
}

#[test]
fn calibration_halves_biased_error_and_spares_unbiased_subjects() {
    let scenes = cohort_scenes();
    let cfg = SessionConfig::default();
    for i in 0..6u64 {
        let mut rng = rng_stream(300 + i, 3);
        let prof = SubjectProfile::random_affine("b", 3.0 + 0.6 * i as f64, 0.01, 0.5, &mut rng);
        let (_, r) = calibrate_session(&scenes, &prof, &cfg, 11, i).unwrap();
        assert!(r.n_pairs >= 100, "{r:?}");
        assert!(r.post_median_deg <= 0.5 * r.pre_median_deg, "{r:?}");
        let mut unbiased = SubjectProfile::identity("u");
        unbiased.sigma = 0.5f64.to_radians();
        let (_, r) = calibrate_session(&scenes, &unbiased, &cfg, 11, 50 + i).unwrap();
        assert!(r.post_median_deg < 1.05 * r.pre_median_deg, "{r:?}");
    }
}

#[test]
fn student_selection_prefers_identity_on_unbiased_pairs() {
    let mut rng = rng_stream(4, 4);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let pairs: Vec<CalibPair> = (0..80)
        .map(|_| {
            let t = [rng.random_range(-PI..PI), rng.random_range(-1.0..1.0)];
            CalibPair::new(
                [t[0] + noise.sample(&mut rng), t[1] + noise.sample(&mut rng)],
                t,
                1.0,
                0.0,
            )
        })
        .collect();
    let (_, kind) = select_student(&pairs).unwrap();
    assert_eq!(kind, StudentKind::Identity);
    let shifted: Vec<CalibPair> = pairs
        .iter()
        .map(|p| CalibPair::new([p.observed[0] + 0.08, p.observed[1]], p.teacher, 1.0, 0.0))
        .collect();
    let (m, kind) = select_student(&shifted).unwrap();
    assert_eq!(kind, StudentKind::Offset);
    assert!((m.b[0] + 0.08).abs() < 0.005);
}

fn arb_pose_series() -> impl Strategy<Value = Vec<PoseSample>> {
    (prop::collection::vec((0.001f64..0.05, -0.2f64..0.2, -0.2f64..0.2), 2..120)).prop_map(
        |steps| {
            let (mut t, mut yaw, mut pitch) = (0.0, 0.0f64, 0.0f64);
            steps
                .into_iter()
                .map(|(dt, dy, dp)| {
                    t += dt;
                    yaw = (yaw + dy).clamp(-3.0, 3.0);
                    pitch = (pitch + dp).clamp(-1.2, 1.2);
                    PoseSample {
                        t,
                        pose: HeadPose::new(pitch, yaw, 0.0).unwrap(),
                    }
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn head_events_alternate(series in arb_pose_series(), thr in 0.0f64..8.0, hold in 0.0f64..0.1) {
        let ev = detect_head_events(&series, thr, hold).unwrap();
        for (k, e) in ev.iter().enumerate() {
            let want = if k % 2 == 0 { HeadEventKind::MovementStart } else { HeadEventKind::MovementStop };
            prop_assert_eq!(e.kind, want);
        }
        for w in ev.windows(2) {
            prop_assert!(w[0].time <= w[1].time);
        }
    }

    #[test]
    fn gaze_labels_survive_time_rescaling(
        steps in prop::collection::vec((0.005f64..0.05, -0.3f64..0.3, -0.3f64..0.3), 1..80),
        thr in 0.1f64..6.0,
        k in -4i32..5,
    ) {
        let mut t = 0.0;
        let mut ang = [0.0f64, 0.0f64];
        let mut samples = vec![(0.0, SphereDir::from_angles(0.0, 0.0))];
        for (dt, dl, df) in steps {
            t += dt;
            ang = [ang[0] + dl, (ang[1] + df).clamp(-1.3, 1.3)];
            samples.push((t, SphereDir::from_angles(ang[0], ang[1])));
        }
        let s = 2f64.powi(k);
        let scaled: Vec<_> = samples.iter().map(|(t, d)| (t * s, *d)).collect();
        let a = classify_gaze_state(&samples, thr).unwrap();
        let b = classify_gaze_state(&scaled, thr / s).unwrap();
        prop_assert_eq!(a.len(), samples.len());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn teacher_point_lies_in_an_object(seed in 0u64..2000, n in 1usize..12, dynf in 0.0f64..1.0, lon in -3.0f64..3.0, lat in -1.0f64..1.0, r in 0.01f64..1.0) {
        let spec = SceneSpec { dynamic_fraction: dynf, ..SceneSpec::new("t", n, Lighting::Normal) };
        let scene = gen_scene(seed, &spec).unwrap();
        let hint = HintRegion { center: SphereDir::from_angles(lon, lat), radius: r };
        for prior in [None, Some(&hint)] {
            let p = teacher_fixation(&scene, prior);
            prop_assert!(scene.objects.iter().any(|o| o.bbox.contains(p.u, p.v)));
        }
    }

    #[test]
    fn fitted_residual_never_exceeds_identity(
        pts in prop::collection::vec((-3.0f64..3.0, -1.4f64..1.4, -0.2f64..0.2, -0.2f64..0.2, 0.5f64..3.0), 3..40),
    ) {
        let pairs: Vec<CalibPair> = pts
            .iter()
            .map(|&(l, f, dl, df, w)| CalibPair { observed: [l, f], teacher: [l + dl, f + df], weight: w, time: 0.0 })
            .collect();
        if let Ok(m) = calibrate_student(&pairs) {
            prop_assert!(m.residual_rms >= 0.0);
            prop_assert!(m.residual_rms <= StudentModel::identity().residual_on(&pairs) + 1e-12);
        }
    }
}
