//! Finite-difference checks of every backward pass in the crate.

use gazeforge_tinynn::gradcheck::{numeric_grad, numeric_param_grad, rel_error};
use gazeforge_tinynn::ops::{layer_norm, layer_norm_backward, softmax_backward};
use gazeforge_tinynn::{
    dense, dense_backward, softmax, Activation, AttentionBlock, Grads, ParamStore, RnnCell, Tensor2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

/// Fixed random projection used to turn a matrix output into a scalar loss.
fn probe_loss(y: &Tensor2, probe: &Tensor2) -> f64 {
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn dense_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (m, i, o) = (
            rng.random_range(1..5),
            rng.random_range(1..6),
            rng.random_range(1..6),
        );
        let x = random_tensor(&mut rng, m, i);
        let w = random_tensor(&mut rng, i, o);
        let b = random_tensor(&mut rng, 1, o);
        let probe = random_tensor(&mut rng, m, o);
        let g = dense_backward(&x, &w, &probe).unwrap();

        let loss_w = |wd: &[f64]| {
            let w = Tensor2::from_vec(i, o, wd.to_vec()).unwrap();
            probe_loss(&dense(&x, &w, &b).unwrap(), &probe)
        };
        assert!(rel_error(g.dw.data(), &numeric_grad(w.data(), loss_w)) < TOL);
        let loss_x = |xd: &[f64]| {
            let x = Tensor2::from_vec(m, i, xd.to_vec()).unwrap();
            probe_loss(&dense(&x, &w, &b).unwrap(), &probe)
        };
        assert!(rel_error(g.dx.data(), &numeric_grad(x.data(), loss_x)) < TOL);
        let loss_b = |bd: &[f64]| {
            let b = Tensor2::from_vec(1, o, bd.to_vec()).unwrap();
            probe_loss(&dense(&x, &w, &b).unwrap(), &probe)
        };
        assert!(rel_error(g.db.data(), &numeric_grad(b.data(), loss_b)) < TOL);
    }
}

#[test]
fn softmax_and_activations_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(1..8);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let probe: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic = softmax_backward(&softmax(&v), &probe);
        let numeric = numeric_grad(&v, |x| {
            softmax(x).iter().zip(&probe).map(|(a, b)| a * b).sum()
        });
        assert!(rel_error(&analytic, &numeric) < TOL);

        for act in [
            Activation::Tanh,
            Activation::Gelu,
            Activation::Sigmoid,
            Activation::Softplus,
        ] {
            let x = v[0] + 0.1;
            let numeric = numeric_grad(&[x], |z| act.apply(z[0]));
            assert!(rel_error(&[act.derivative(x)], &numeric) < TOL, "{act:?}");
        }
    }
}

#[test]
fn layer_norm_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (m, n) = (rng.random_range(1..4), rng.random_range(2..7));
        let x = random_tensor(&mut rng, m, n);
        let g = random_tensor(&mut rng, 1, n);
        let b = random_tensor(&mut rng, 1, n);
        let probe = random_tensor(&mut rng, m, n);
        let (_, cache) = layer_norm(&x, &g, &b).unwrap();
        let (dx, dg, _) = layer_norm_backward(&cache, &g, &probe);
        let numeric = numeric_grad(x.data(), |xd| {
            let x = Tensor2::from_vec(m, n, xd.to_vec()).unwrap();
            probe_loss(&layer_norm(&x, &g, &b).unwrap().0, &probe)
        });
        assert!(rel_error(dx.data(), &numeric) < TOL);
        let numeric = numeric_grad(g.data(), |gd| {
            let g = Tensor2::from_vec(1, n, gd.to_vec()).unwrap();
            probe_loss(&layer_norm(&x, &g, &b).unwrap().0, &probe)
        });
        assert!(rel_error(dg.data(), &numeric) < TOL);
    }
}

#[test]
fn attention_block_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let m = rng.random_range(1..5);
        let block = AttentionBlock::new("blk", 4, 6);
        let mut store = ParamStore::new();
        block.init(&mut store, &mut rng);
        // perturb norms and biases away from their initial constants
        for name in [
            "blk.ln1_g",
            "blk.ln1_b",
            "blk.bo",
            "blk.ln2_g",
            "blk.b1",
            "blk.b2",
        ] {
            let t = store.get(name).unwrap().clone();
            let noise = random_tensor(&mut rng, t.rows(), t.cols()).scale(0.3);
            *store.get_mut(name).unwrap() = t.add(&noise).unwrap();
        }
        let x = random_tensor(&mut rng, m, 4);
        let probe = random_tensor(&mut rng, m, 4);
        let (_, cache) = block.forward(&store, &x).unwrap();
        let mut grads = Grads::new();
        let dx = block.backward(&store, &cache, &probe, &mut grads).unwrap();

        let numeric = numeric_grad(x.data(), |xd| {
            let x = Tensor2::from_vec(m, 4, xd.to_vec()).unwrap();
            probe_loss(&block.forward(&store, &x).unwrap().0, &probe)
        });
        assert!(rel_error(dx.data(), &numeric) < TOL);

        let names: Vec<String> = store.names().map(str::to_string).collect();
        for name in names {
            let numeric = numeric_param_grad(&store, &name, |s| {
                probe_loss(&block.forward(s, &x).unwrap().0, &probe)
            });
            let analytic = grads.get(&name).unwrap();
            let err = rel_error(analytic.data(), numeric.data());
            assert!(err < TOL, "{name}: rel err {err}");
        }
    }
}

#[test]
fn rnn_three_step_unroll_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let cell = RnnCell::new("rnn", 2, 3);
        let mut store = ParamStore::new();
        cell.init(&mut store, &mut rng);
        let b = random_tensor(&mut rng, 1, 3);
        *store.get_mut("rnn.b").unwrap() = b;
        let h0 = random_tensor(&mut rng, 1, 3);
        let xs = random_tensor(&mut rng, 3, 2);
        let probe = random_tensor(&mut rng, 3, 3);

        let loss = |s: &ParamStore, h0: &Tensor2, xs: &Tensor2| -> f64 {
            let caches = cell.unroll(s, h0, xs).unwrap();
            caches
                .iter()
                .enumerate()
                .map(|(t, c)| probe_loss(&c.h, &Tensor2::row(probe.row_slice(t))))
                .sum()
        };
        let caches = cell.unroll(&store, &h0, &xs).unwrap();
        let mut grads = Grads::new();
        let (dh0, dxs) = cell
            .unroll_backward(&store, &caches, &probe, &mut grads)
            .unwrap();

        for name in ["rnn.wh", "rnn.wx", "rnn.b"] {
            let numeric = numeric_param_grad(&store, name, |s| loss(s, &h0, &xs));
            assert!(
                rel_error(grads.get(name).unwrap().data(), numeric.data()) < TOL,
                "{name}"
            );
        }
        let numeric = numeric_grad(h0.data(), |hd| loss(&store, &Tensor2::row(hd), &xs));
        assert!(rel_error(dh0.data(), &numeric) < TOL);
        let numeric = numeric_grad(xs.data(), |xd| {
            loss(&store, &h0, &Tensor2::from_vec(3, 2, xd.to_vec()).unwrap())
        });
        assert!(rel_error(dxs.data(), &numeric) < TOL);
    }
}
