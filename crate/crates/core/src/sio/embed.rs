use gazeforge_tinynn::{dense, dense_backward, Grads, NnError, ParamStore, Tensor2};
use rand::Rng;

use super::{scaled_encoding, SioError, SioSequence, PATCH_CHANNELS};

/// Linear patch embedding plus a linear projection of the scaled positional
/// triple, added together.
///
/// Parameters: `{prefix}.wp` (`3D² x E`), `{prefix}.bp` (`1 x E`),
/// `{prefix}.wpos` (`3 x E`).
#[derive(Debug, Clone)]
pub struct PatchEmbed {
    pub prefix: String,
    pub patch_size: usize,
    pub dim: usize,
}

/// Inputs kept for [`PatchEmbed::backward`].
#[derive(Debug, Clone)]
pub struct PatchCache {
    pub patches: Tensor2,
    pub positions: Tensor2,
}

impl PatchEmbed {
    pub fn new(prefix: impl Into<String>, patch_size: usize, dim: usize) -> Self {
        Self {
            prefix: prefix.into(),
            patch_size,
            dim,
        }
    }

    pub fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn input_len(&self) -> usize {
        self.patch_size * self.patch_size * PATCH_CHANNELS
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        store.init_weight(&self.name("wp"), self.input_len(), self.dim, rng);
        store.init_zeros(&self.name("bp"), 1, self.dim);
        store.init_weight(&self.name("wpos"), 3, self.dim, rng);
    }

    /// Stacks patches and scaled positions of a sequence into matrices.
    pub fn inputs(&self, seq: &SioSequence) -> Result<PatchCache, SioError> {
        let m = seq.len();
        let n = self.input_len();
        let mut patches = Vec::with_capacity(m * n);
        let mut positions = Vec::with_capacity(m * 3);
        for item in &seq.items {
            if item.patch.len() != n {
                return Err(SioError::Embed(format!(
                    "patch of object {} has {} values, expected {n}",
                    item.object_id,
                    item.patch.len()
                )));
            }
            patches.extend_from_slice(&item.patch);
            positions.extend(scaled_encoding(item, m));
        }
        let to_err = |e: NnError| SioError::Embed(e.to_string());
        Ok(PatchCache {
            patches: Tensor2::from_vec(m, n, patches).map_err(to_err)?,
            positions: Tensor2::from_vec(m, 3, positions).map_err(to_err)?,
        })
    }

    /// `m x E` embeddings `patch Wp + bp + pos Wpos`.
    pub fn forward_inputs(
        &self,
        store: &ParamStore,
        cache: &PatchCache,
    ) -> Result<Tensor2, NnError> {
        let mut y = dense(
            &cache.patches,
            store.get(&self.name("wp"))?,
            store.get(&self.name("bp"))?,
        )?;
        y.add_assign(&cache.positions.matmul(store.get(&self.name("wpos"))?)?)?;
        Ok(y)
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        seq: &SioSequence,
    ) -> Result<(Tensor2, PatchCache), SioError> {
        let cache = self.inputs(seq)?;
        let y = self
            .forward_inputs(store, &cache)
            .map_err(|e| SioError::Embed(e.to_string()))?;
        Ok((y, cache))
    }

    /// Accumulates parameter gradients for upstream gradient `dy`.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &PatchCache,
        dy: &Tensor2,
        grads: &mut Grads,
    ) -> Result<(), NnError> {
        let g = dense_backward(&cache.patches, store.get(&self.name("wp"))?, dy)?;
        grads.accumulate(&self.name("wp"), &g.dw);
        grads.accumulate(&self.name("bp"), &g.db);
        grads.accumulate(&self.name("wpos"), &cache.positions.t_matmul(dy)?);
        Ok(())
    }
}
