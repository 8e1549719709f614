use gazeforge_core::domain::rng_stream;
use gazeforge_model::losses::{categorical_cross_entropy, dtw_distance, kl_divergence, mse};
use gazeforge_model::mi::mutual_information;
use gazeforge_model::{compose_losses, LossComponents, LossWeights};
use proptest::prelude::*;
use rand::Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct DtwCase {
    x: Vec<[f64; 2]>,
    y: Vec<[f64; 2]>,
    distance: f64,
}

#[test]
fn dtw_matches_exhaustive_enumeration() {
    let text = include_str!("golden/dtw_bruteforce.json");
    let cases: Vec<DtwCase> = serde_json::from_str(text).unwrap();
    assert_eq!(cases.len(), 200);
    for c in &cases {
        let d = dtw_distance(&c.x, &c.y).unwrap();
        assert!((d - c.distance).abs() < 1e-9, "{d} vs {}", c.distance);
    }
}

fn distribution(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn points(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-1.0..1.0f64), 1..=max)
}

proptest! {
    #[test]
    fn kl_is_non_negative(p in prop::collection::vec(0.0..1.0f64, 6), q in prop::collection::vec(0.01..1.0f64, 6)) {
        prop_assume!(p.iter().sum::<f64>() > 1e-3);
        let (p, q) = (distribution(p), distribution(q));
        prop_assert!(kl_divergence(&p, &q) >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn dtw_is_symmetric(x in points(6), y in points(6)) {
        let a = dtw_distance(&x, &y).unwrap();
        let b = dtw_distance(&y, &x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert_eq!(dtw_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn mse_matches_recomputation(pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..20)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut acc = 0.0;
        for (x, y) in &pairs {
            acc += (x - y).powi(2);
        }
        prop_assert!((mse(&a, &b).unwrap() - acc / pairs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_ignores_batch_order(labels in prop::collection::vec(0usize..6, 1..10), seed in 0u64..1000) {
        let mut rng = rng_stream(seed, 0);
        let dists: Vec<Vec<f64>> = labels.iter().map(|_| distribution((0..6).map(|_| rng.random_range(0.01..1.0)).collect())).collect();
        let forward = categorical_cross_entropy(&labels, &dists).unwrap();
        let rl: Vec<usize> = labels.iter().rev().copied().collect();
        let rd: Vec<Vec<f64>> = dists.iter().rev().cloned().collect();
        prop_assert!((forward - categorical_cross_entropy(&rl, &rd).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn report_identities_hold(v in prop::array::uniform10(0.0..10.0f64), w in prop::array::uniform4(0.0..2.0f64), dedup: bool) {
        let c = LossComponents {
            cls_aux: v[0], cls_traj: v[1], mi: -v[2], kl_pq: v[3], kl_qp: v[4],
            mse: v[5], dtw: v[6], cat_ce: v[7], adv: v[8], reg: v[9],
        };
        let w = LossWeights { lambda: w[0], beta_sup: w[1], alpha_rec: w[2], beta_rec: w[3], dedup };
        let r = compose_losses(&c, &w).unwrap();
        let rec = w.alpha_rec * c.mse + w.beta_rec * c.dtw;
        prop_assert_eq!(r.rec, rec);
        prop_assert_eq!(r.aux_cls, c.cls_aux + w.lambda * c.kl_pq);
        prop_assert_eq!(r.traj, c.cls_traj + rec + w.beta_sup * c.kl_qp);
        prop_assert_eq!(r.ars_total, r.traj + r.aux_cls + c.mi);
        prop_assert_eq!(r.g_total, c.reg + c.adv);
        let d = if dedup { r.ars_total + c.cat_ce } else { r.ars_total + c.cat_ce + c.dtw + c.mse + rec };
        prop_assert_eq!(r.d_total, d);
        prop_assert_eq!(r.total, r.d_total + r.g_total);
    }
}

#[test]
fn uniform_cross_entropy_is_log_six() {
    let u = vec![1.0 / 6.0; 6];
    let ce = categorical_cross_entropy(&[0, 1, 2, 3, 4, 5], &vec![u; 6]).unwrap();
    assert!((ce - 6f64.ln()).abs() < 1e-9);
}

#[test]
fn mutual_information_extremes() {
    let mut rng = rng_stream(11, 0);
    let n = 10_000;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let y: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    assert!(mutual_information(&x, &y).unwrap().abs() <= 0.05);
    let same = mutual_information(&x, &x).unwrap();
    assert!((same - 4f64.ln()).abs() <= 0.05, "{same}");
}
