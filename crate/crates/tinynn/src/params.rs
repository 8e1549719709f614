//! Named parameter storage, gradient accumulation, Adam and checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::tensor::Tensor2;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Slot {
    value: Tensor2,
    m: Tensor2,
    v: Tensor2,
}

/// Named parameter tensors together with their Adam moments.
///
/// Names are kept in a `BTreeMap` so iteration order (and therefore the
/// serialized checkpoint) is stable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamStore {
    slots: BTreeMap<String, Slot>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor2) {
        let (r, c) = value.shape();
        self.slots.insert(
            name.into(),
            Slot {
                value,
                m: Tensor2::zeros(r, c),
                v: Tensor2::zeros(r, c),
            },
        );
    }

    /// Glorot-normal weight matrix.
    pub fn init_weight<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        self.insert(
            name,
            Tensor2::from_vec(fan_in, fan_out, data).expect("sized"),
        );
    }

    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Tensor2::zeros(rows, cols));
    }

    pub fn init_filled(&mut self, name: &str, rows: usize, cols: usize, value: f64) {
        self.insert(name, Tensor2::filled(rows, cols, value));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor2, NnError> {
        self.slots
            .get(name)
            .map(|s| &s.value)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor2, NnError> {
        self.slots
            .get_mut(name)
            .map(|s| &mut s.value)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.values().map(|s| s.value.data().len()).sum()
    }

    /// Moves every parameter (with its moments) out of `other` into this store.
    pub fn absorb(&mut self, other: ParamStore) {
        for (name, slot) in other.slots {
            self.slots.insert(name, slot);
        }
    }

    /// One bias-corrected Adam step over the parameters named in `grads`.
    ///
    /// Parameters without a gradient entry are left untouched and their
    /// moments are not decayed.
    pub fn adam_update(&mut self, grads: &Grads, cfg: &AdamConfig) -> Result<(), NnError> {
        for (name, g) in &grads.0 {
            let slot = self
                .slots
                .get(name)
                .ok_or_else(|| NnError::UnknownParam(name.clone()))?;
            if !slot.value.same_shape(g) {
                return Err(NnError::Shape(format!(
                    "gradient for `{name}` is {}x{}, parameter is {}x{}",
                    g.rows(),
                    g.cols(),
                    slot.value.rows(),
                    slot.value.cols()
                )));
            }
            if !g.is_finite() {
                return Err(NnError::NonFinite(format!("gradient of `{name}`")));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, g) in &grads.0 {
            let slot = self.slots.get_mut(name).expect("checked above");
            let n = g.data().len();
            for i in 0..n {
                let gi = g.data()[i];
                let m = cfg.beta1 * slot.m.data()[i] + (1.0 - cfg.beta1) * gi;
                let v = cfg.beta2 * slot.v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
                slot.m.data_mut()[i] = m;
                slot.v.data_mut()[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                slot.value.data_mut()[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameter store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let store: ParamStore =
            serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        for (name, slot) in &store.slots {
            if !slot.m.same_shape(&slot.value) || !slot.v.same_shape(&slot.value) {
                return Err(NnError::Checkpoint(format!(
                    "moment shape mismatch for `{name}`"
                )));
            }
            let (r, c) = slot.value.shape();
            if slot.value.data().len() != r * c {
                return Err(NnError::Checkpoint(format!(
                    "value count mismatch for `{name}`"
                )));
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }
}

/// Gradient accumulator keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grads(pub BTreeMap<String, Tensor2>);

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, name: &str, g: &Tensor2) {
        match self.0.get_mut(name) {
            Some(acc) => acc
                .add_assign(g)
                .expect("gradient shapes are consistent per name"),
            None => {
                self.0.insert(name.to_string(), g.clone());
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor2> {
        self.0.get(name)
    }

    pub fn merge(&mut self, other: &Grads) {
        for (name, g) in &other.0 {
            self.accumulate(name, g);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.0.values_mut() {
            g.map_inplace(|v| v * s);
        }
    }

    /// Keeps only gradients whose names start with one of `prefixes`.
    pub fn retain_prefixes(&mut self, prefixes: &[&str]) {
        self.0
            .retain(|name, _| prefixes.iter().any(|p| name.starts_with(p)));
    }

    pub fn is_finite(&self) -> bool {
        self.0.values().all(Tensor2::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor2::row(&[v]));
        s
    }

    #[test]
    fn zero_grads_leave_fresh_params_unchanged() {
        let mut s = scalar_store(0.7);
        let mut g = Grads::new();
        g.accumulate("w", &Tensor2::row(&[0.0]));
        s.adam_update(&g, &AdamConfig::default()).unwrap();
        assert_eq!(s.get("w").unwrap().data(), &[0.7]);
    }

    #[test]
    fn first_step_magnitude_is_lr_times_normalized_grad() {
        let cfg = AdamConfig::default();
        for g0 in [0.5, -2.0, 1e-3] {
            let mut s = scalar_store(1.0);
            let mut g = Grads::new();
            g.accumulate("w", &Tensor2::row(&[g0]));
            s.adam_update(&g, &cfg).unwrap();
            let delta = s.get("w").unwrap().data()[0] - 1.0;
            let expected = -cfg.lr * g0 / (g0.abs() + cfg.eps);
            assert!(
                (delta - expected).abs() < 1e-15,
                "g={g0}: {delta} vs {expected}"
            );
        }
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut s = scalar_store(1.0);
        let mut g = Grads::new();
        g.accumulate("w", &Tensor2::zeros(2, 2));
        assert!(s.adam_update(&g, &AdamConfig::default()).is_err());
        let mut g = Grads::new();
        g.accumulate("missing", &Tensor2::zeros(1, 1));
        assert!(s.adam_update(&g, &AdamConfig::default()).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut s = scalar_store(0.1 + 0.2);
        let mut g = Grads::new();
        g.accumulate("w", &Tensor2::row(&[std::f64::consts::PI]));
        s.adam_update(&g, &AdamConfig::default()).unwrap();
        let back = ParamStore::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.step(), 1);
    }
}
