//! Elman (tanh) recurrent cell with backpropagation through time.

use rand::Rng;

use crate::error::NnError;
use crate::params::{Grads, ParamStore};
use crate::tensor::Tensor2;

/// `h' = tanh(h W_h + x W_x + b)` over row vectors.
///
/// Parameters: `{prefix}.wh` (`H x H`), `{prefix}.wx` (`I x H`), `{prefix}.b` (`1 x H`).
#[derive(Debug, Clone)]
pub struct RnnCell {
    pub prefix: String,
    pub input: usize,
    pub hidden: usize,
}

/// Inputs and output of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RnnStepCache {
    pub h_prev: Tensor2,
    pub x: Tensor2,
    pub h: Tensor2,
}

impl RnnCell {
    pub fn new(prefix: impl Into<String>, input: usize, hidden: usize) -> Self {
        Self {
            prefix: prefix.into(),
            input,
            hidden,
        }
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        store.init_weight(&self.name("wh"), self.hidden, self.hidden, rng);
        store.init_weight(&self.name("wx"), self.input, self.hidden, rng);
        store.init_zeros(&self.name("b"), 1, self.hidden);
    }

    pub fn step(
        &self,
        store: &ParamStore,
        h: &Tensor2,
        x: &Tensor2,
    ) -> Result<RnnStepCache, NnError> {
        if h.shape() != (1, self.hidden) || x.shape() != (1, self.input) {
            return Err(NnError::Shape(format!(
                "rnn `{}` expects h 1x{} and x 1x{}, got {}x{} and {}x{}",
                self.prefix,
                self.hidden,
                self.input,
                h.rows(),
                h.cols(),
                x.rows(),
                x.cols()
            )));
        }
        let mut pre = h.matmul(store.get(&self.name("wh"))?)?;
        pre.add_assign(&x.matmul(store.get(&self.name("wx"))?)?)?;
        pre.add_assign(store.get(&self.name("b"))?)?;
        Ok(RnnStepCache {
            h_prev: h.clone(),
            x: x.clone(),
            h: pre.map(f64::tanh),
        })
    }

    /// Backward through one step. Returns `(dh_prev, dx)`.
    pub fn step_backward(
        &self,
        store: &ParamStore,
        cache: &RnnStepCache,
        dh: &Tensor2,
        grads: &mut Grads,
    ) -> Result<(Tensor2, Tensor2), NnError> {
        let mut dpre = dh.clone();
        for (d, h) in dpre.data_mut().iter_mut().zip(cache.h.data()) {
            *d *= 1.0 - h * h;
        }
        grads.accumulate(&self.name("wh"), &cache.h_prev.t_matmul(&dpre)?);
        grads.accumulate(&self.name("wx"), &cache.x.t_matmul(&dpre)?);
        grads.accumulate(&self.name("b"), &dpre);
        let dh_prev = dpre.matmul_t(store.get(&self.name("wh"))?)?;
        let dx = dpre.matmul_t(store.get(&self.name("wx"))?)?;
        Ok((dh_prev, dx))
    }

    /// Runs the cell over each row of `xs` starting from `h0`.
    pub fn unroll(
        &self,
        store: &ParamStore,
        h0: &Tensor2,
        xs: &Tensor2,
    ) -> Result<Vec<RnnStepCache>, NnError> {
        let mut caches = Vec::with_capacity(xs.rows());
        let mut h = h0.clone();
        for t in 0..xs.rows() {
            let c = self.step(store, &h, &Tensor2::row(xs.row_slice(t)))?;
            h = c.h.clone();
            caches.push(c);
        }
        Ok(caches)
    }

    /// Backpropagation through time.
    ///
    /// `dh_steps[t]` is the loss gradient arriving directly at the hidden
    /// state after step `t` (zero rows where none). Returns `(dh0, dxs)`.
    pub fn unroll_backward(
        &self,
        store: &ParamStore,
        caches: &[RnnStepCache],
        dh_steps: &Tensor2,
        grads: &mut Grads,
    ) -> Result<(Tensor2, Tensor2), NnError> {
        if dh_steps.shape() != (caches.len(), self.hidden) {
            return Err(NnError::Shape("rnn unroll_backward gradient rows".into()));
        }
        let mut dxs = Tensor2::zeros(caches.len(), self.input);
        let mut carry = Tensor2::zeros(1, self.hidden);
        for t in (0..caches.len()).rev() {
            let mut dh = Tensor2::row(dh_steps.row_slice(t));
            dh.add_assign(&carry)?;
            let (dh_prev, dx) = self.step_backward(store, &caches[t], &dh, grads)?;
            dxs.row_slice_mut(t).copy_from_slice(dx.data());
            carry = dh_prev;
        }
        Ok((carry, dxs))
    }
}
