//! Pre-norm transformer encoder block: single-head self-attention followed by
//! a two-layer GELU MLP, each wrapped in a residual connection.

use rand::Rng;

use crate::error::NnError;
use crate::ops::{
    dense, dense_backward, layer_norm, layer_norm_backward, softmax_rows, softmax_rows_backward,
    Activation, LayerNormCache,
};
use crate::params::{Grads, ParamStore};
use crate::tensor::Tensor2;

/// Parameter names are `{prefix}.{ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2}`.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    pub prefix: String,
    pub dim: usize,
    pub hidden: usize,
}

/// Activations saved by [`AttentionBlock::forward`].
#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Tensor2,
    ln1: LayerNormCache,
    a1: Tensor2,
    q: Tensor2,
    k: Tensor2,
    v: Tensor2,
    /// Row-stochastic attention weights, `m x m`.
    pub weights: Tensor2,
    o: Tensor2,
    ln2: LayerNormCache,
    a2: Tensor2,
    h: Tensor2,
    g: Tensor2,
}

impl AttentionBlock {
    pub fn new(prefix: impl Into<String>, dim: usize, hidden: usize) -> Self {
        Self {
            prefix: prefix.into(),
            dim,
            hidden,
        }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        let (e, h) = (self.dim, self.hidden);
        store.init_filled(&self.name("ln1_g"), 1, e, 1.0);
        store.init_zeros(&self.name("ln1_b"), 1, e);
        for w in ["wq", "wk", "wv", "wo"] {
            store.init_weight(&self.name(w), e, e, rng);
        }
        store.init_zeros(&self.name("bo"), 1, e);
        store.init_filled(&self.name("ln2_g"), 1, e, 1.0);
        store.init_zeros(&self.name("ln2_b"), 1, e);
        store.init_weight(&self.name("w1"), e, h, rng);
        store.init_zeros(&self.name("b1"), 1, h);
        store.init_weight(&self.name("w2"), h, e, rng);
        store.init_zeros(&self.name("b2"), 1, e);
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor2,
    ) -> Result<(Tensor2, AttentionCache), NnError> {
        if x.cols() != self.dim || x.rows() == 0 {
            return Err(NnError::Shape(format!(
                "attention block `{}` expects m x {}, got {}x{}",
                self.prefix,
                self.dim,
                x.rows(),
                x.cols()
            )));
        }
        let p = |n: &str| store.get(&self.name(n));
        let (a1, ln1) = layer_norm(x, p("ln1_g")?, p("ln1_b")?)?;
        let q = a1.matmul(p("wq")?)?;
        let k = a1.matmul(p("wk")?)?;
        let v = a1.matmul(p("wv")?)?;
        let scale = 1.0 / (self.dim as f64).sqrt();
        let scores = q.matmul_t(&k)?.scale(scale);
        let weights = softmax_rows(&scores);
        let o = weights.matmul(&v)?;
        let z = dense(&o, p("wo")?, p("bo")?)?;
        let x1 = x.add(&z)?;

        let (a2, ln2) = layer_norm(&x1, p("ln2_g")?, p("ln2_b")?)?;
        let h = dense(&a2, p("w1")?, p("b1")?)?;
        let g = Activation::Gelu.forward(&h);
        let mlp = dense(&g, p("w2")?, p("b2")?)?;
        let y = x1.add(&mlp)?;
        Ok((
            y,
            AttentionCache {
                x: x.clone(),
                ln1,
                a1,
                q,
                k,
                v,
                weights,
                o,
                ln2,
                a2,
                h,
                g,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &AttentionCache,
        dy: &Tensor2,
        grads: &mut Grads,
    ) -> Result<Tensor2, NnError> {
        let p = |n: &str| store.get(&self.name(n));
        // MLP branch
        let d_mlp = dense_backward(&cache.g, p("w2")?, dy)?;
        grads.accumulate(&self.name("w2"), &d_mlp.dw);
        grads.accumulate(&self.name("b2"), &d_mlp.db);
        let dh = Activation::Gelu.backward(&cache.h, &d_mlp.dx)?;
        let d_fc1 = dense_backward(&cache.a2, p("w1")?, &dh)?;
        grads.accumulate(&self.name("w1"), &d_fc1.dw);
        grads.accumulate(&self.name("b1"), &d_fc1.db);
        let (dx1_ln, dg2, db2) = layer_norm_backward(&cache.ln2, p("ln2_g")?, &d_fc1.dx);
        grads.accumulate(&self.name("ln2_g"), &dg2);
        grads.accumulate(&self.name("ln2_b"), &db2);
        let dx1 = dy.add(&dx1_ln)?;

        // attention branch
        let d_out = dense_backward(&cache.o, p("wo")?, &dx1)?;
        grads.accumulate(&self.name("wo"), &d_out.dw);
        grads.accumulate(&self.name("bo"), &d_out.db);
        let d_o = d_out.dx;
        let d_weights = d_o.matmul_t(&cache.v)?;
        let dv = cache.weights.t_matmul(&d_o)?;
        let scale = 1.0 / (self.dim as f64).sqrt();
        let d_scores = softmax_rows_backward(&cache.weights, &d_weights).scale(scale);
        let dq = d_scores.matmul(&cache.k)?;
        let dk = d_scores.t_matmul(&cache.q)?;

        grads.accumulate(&self.name("wq"), &cache.a1.t_matmul(&dq)?);
        grads.accumulate(&self.name("wk"), &cache.a1.t_matmul(&dk)?);
        grads.accumulate(&self.name("wv"), &cache.a1.t_matmul(&dv)?);
        let mut da1 = dq.matmul_t(p("wq")?)?;
        da1.add_assign(&dk.matmul_t(p("wk")?)?)?;
        da1.add_assign(&dv.matmul_t(p("wv")?)?)?;
        let (dx_ln, dg1, db1) = layer_norm_backward(&cache.ln1, p("ln1_g")?, &da1);
        grads.accumulate(&self.name("ln1_g"), &dg1);
        grads.accumulate(&self.name("ln1_b"), &db1);
        debug_assert_eq!(cache.x.shape(), dx1.shape());
        dx1.add(&dx_ln)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn block_and_store() -> (AttentionBlock, ParamStore) {
        let block = AttentionBlock::new("enc0", 4, 8);
        let mut store = ParamStore::new();
        block.init(&mut store, &mut ChaCha8Rng::seed_from_u64(3));
        (block, store)
    }

    #[test]
    fn single_item_attends_to_itself() {
        let (block, store) = block_and_store();
        let x = Tensor2::row(&[0.3, -1.0, 2.0, 0.5]);
        let (_, cache) = block.forward(&store, &x).unwrap();
        assert_eq!(cache.weights.data(), &[1.0]);
    }

    #[test]
    fn duplicated_rows_give_duplicated_outputs() {
        let (block, store) = block_and_store();
        let row = [0.3, -1.0, 2.0, 0.5];
        let x =
            Tensor2::vstack(&[Tensor2::row(&row), Tensor2::row(&row), Tensor2::row(&row)]).unwrap();
        let (y, _) = block.forward(&store, &x).unwrap();
        assert_eq!(y.row_slice(0), y.row_slice(1));
        assert_eq!(y.row_slice(1), y.row_slice(2));
    }

    #[test]
    fn rejects_wrong_width() {
        let (block, store) = block_and_store();
        assert!(block.forward(&store, &Tensor2::zeros(2, 5)).is_err());
        assert!(block.forward(&store, &Tensor2::zeros(0, 4)).is_err());
    }
}
