//! Alternating adversarial training, prediction and checkpoints.

use std::path::Path;

use gazeforge_core::domain::{
    rng_stream, stream_id, EmotionDistribution, EmotionLabel, StreamDomain, NUM_EMOTIONS,
};
use gazeforge_core::sio::{PatchCache, SioSequence};
use gazeforge_tinynn::{AdamConfig, Grads, ParamStore, Tensor2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{LossError, ModelError};
use crate::losses::{
    adv_d_grad, adv_g_grad, adv_losses, cross_entropy, cross_entropy_grad, dtw_grad_frozen,
    dtw_path, kl_with_grad, mse, mse_grad, real_fake_cross_entropy, PROB_FLOOR,
};
use crate::mi::{mutual_information_loss, MI_MIN_BATCH};
use crate::net::{raw_coordinates, Discriminator, Generator, ModelConfig};
use crate::report::{compose_losses, LossComponents, LossReport, LossWeights};
use crate::target::AuxRegTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate reached at the last epoch by cosine decay from `lr`.
    pub lr_final: f64,
    pub seed: u64,
    pub weights: LossWeights,
    /// Probability on the true class of a "real" discriminator input.
    pub real_high: f64,
    /// Probability on every other class of a "real" input.
    pub real_low: f64,
    /// Weight of a cross-entropy term against the true label added to the
    /// generator objective; 0 leaves the generator purely adversarial.
    pub gen_supervision: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            lr: 1e-3,
            lr_final: 1e-4,
            seed: 0,
            weights: LossWeights::default(),
            real_high: 0.9,
            real_low: 0.02,
            gen_supervision: 1.0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.lr_final >= 0.0 && self.lr_final <= self.lr) {
            return bad(format!(
                "final learning rate {} must lie in [0, lr]",
                self.lr_final
            ));
        }
        let total = self.real_high + (NUM_EMOTIONS - 1) as f64 * self.real_low;
        if self.real_low < 0.0 || self.real_high < self.real_low || (total - 1.0).abs() > 1e-9 {
            return bad(format!(
                "real label smoothing {}/{} does not form a distribution",
                self.real_high, self.real_low
            ));
        }
        if !(self.gen_supervision >= 0.0 && self.gen_supervision.is_finite()) {
            return bad(format!(
                "gen_supervision {} must be finite and >= 0",
                self.gen_supervision
            ));
        }
        self.weights.validate().map_err(ModelError::Config)?;
        self.model.validate()
    }

    /// Optimizer settings for one epoch.
    pub fn adam(&self, epoch: usize) -> AdamConfig {
        let frac = if self.epochs > 1 {
            epoch as f64 / (self.epochs - 1) as f64
        } else {
            0.0
        };
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
        AdamConfig {
            lr: self.lr_final + (self.lr - self.lr_final) * cos,
            ..AdamConfig::default()
        }
    }
}

/// Parameters of both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub model: ModelConfig,
    pub gen: ParamStore,
    pub disc: ParamStore,
}

impl ModelState {
    pub fn new(model: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        model.validate()?;
        let mut gen = ParamStore::new();
        Generator::new(model).init(
            &mut gen,
            &mut rng_stream(seed, stream_id(StreamDomain::ModelInit, 0)),
        );
        let mut disc = ParamStore::new();
        Discriminator::new(model).init(
            &mut disc,
            &mut rng_stream(seed, stream_id(StreamDomain::ModelInit, 1)),
        );
        Ok(Self {
            model: model.clone(),
            gen,
            disc,
        })
    }

    pub fn generator(&self) -> Generator {
        Generator::new(&self.model)
    }

    pub fn discriminator(&self) -> Discriminator {
        Discriminator::new(&self.model)
    }

    /// Generator class distribution for one sequence.
    pub fn predict(&self, seq: &SioSequence) -> Result<EmotionDistribution, ModelError> {
        let pass = self.generator().forward_seq(&self.gen, seq)?;
        let mut p = [0.0; NUM_EMOTIONS];
        p.copy_from_slice(&pass.dist);
        EmotionDistribution::new(p).map_err(|e| ModelError::Data(e.to_string()))
    }

    /// Predicted duration and dispersion for one sequence.
    pub fn predict_regression(&self, seq: &SioSequence) -> Result<AuxRegTarget, ModelError> {
        let [duration, dispersion] = self.generator().forward_seq(&self.gen, seq)?.regression();
        Ok(AuxRegTarget {
            duration,
            dispersion,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        s.model.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A training sequence with its network inputs precomputed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub inputs: PatchCache,
    pub raw: Tensor2,
    pub raw_points: Vec<[f64; 2]>,
    pub label: usize,
    pub target: [f64; 2],
}

impl Prepared {
    pub fn new(seq: &SioSequence, model: &ModelConfig) -> Result<Self, ModelError> {
        let label = seq
            .emotion
            .ok_or_else(|| {
                ModelError::Data(format!("sequence on `{}` is unlabelled", seq.scene_id))
            })?
            .ordinal();
        if seq.patch_size != model.patch_size {
            return Err(ModelError::Data(format!(
                "patch size {} does not match the model's {}",
                seq.patch_size, model.patch_size
            )));
        }
        let inputs = Generator::new(model).encoder.embed.inputs(seq)?;
        Ok(Self {
            inputs,
            raw: raw_coordinates(seq)?,
            raw_points: seq.raw.clone(),
            label,
            target: AuxRegTarget::from_sio(seq)?.as_array(),
        })
    }
}

fn one_hot(c: usize) -> Vec<f64> {
    let mut v = vec![0.0; NUM_EMOTIONS];
    v[c] = 1.0;
    v
}

fn smoothed(c: usize, cfg: &TrainConfig) -> Vec<f64> {
    let mut v = vec![cfg.real_low; NUM_EMOTIONS];
    v[c] = cfg.real_high;
    v
}

fn points(t: &Tensor2) -> Vec<[f64; 2]> {
    (0..t.rows()).map(|r| [t.get(r, 0), t.get(r, 1)]).collect()
}

fn add_scaled(acc: &mut [f64], g: &[f64], s: f64) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += s * v;
    }
}

/// Discriminator objective of one batch: components, report and gradients
/// of the discriminator total. Generator outputs enter as constants.
pub struct DiscStep {
    pub components: LossComponents,
    pub report: LossReport,
    pub grads: Grads,
    /// Generator predictions, used for training accuracy.
    pub predictions: Vec<usize>,
}

pub fn discriminator_step(
    state: &ModelState,
    batch: &[&Prepared],
    cfg: &TrainConfig,
) -> Result<DiscStep, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Empty("batch".into()));
    }
    let g = state.generator();
    let d = state.discriminator();
    let b = batch.len() as f64;
    let mut gen_out = Vec::with_capacity(batch.len());
    let mut trunks = Vec::with_capacity(batch.len());
    let mut real_rf = Vec::with_capacity(batch.len());
    let mut fake_rf = Vec::with_capacity(batch.len());
    for s in batch {
        let gp = g.forward(&state.gen, &s.inputs)?;
        let t = d.trunk(&state.disc, &s.inputs, &s.raw)?;
        real_rf.push(d.real_fake(&state.disc, &t.encoder.pooled, &smoothed(s.label, cfg))?);
        fake_rf.push(d.real_fake(&state.disc, &t.encoder.pooled, &gp.dist)?);
        gen_out.push(gp);
        trunks.push(t);
    }

    let mut c = LossComponents::default();
    let mut paths = Vec::with_capacity(batch.len());
    for ((s, t), gp) in batch.iter().zip(&trunks).zip(&gen_out) {
        let y = one_hot(s.label);
        c.cls_aux += cross_entropy(&y, &t.p) / b;
        c.cls_traj += cross_entropy(&y, &t.q) / b;
        c.kl_pq += kl_with_grad(&t.p, &t.q).0 / b;
        c.kl_qp += kl_with_grad(&t.q, &t.p).0 / b;
        let recon = t.reconstruction();
        c.mse += mse(s.raw.data(), recon.data())? / b;
        let (dist, path) = dtw_path(&s.raw_points, &points(recon))?;
        c.dtw += dist / b;
        paths.push(path);
        c.reg += mse(&s.target, &gp.regression())? / b;
    }
    if batch.len() >= MI_MIN_BATCH {
        let xs: Vec<Vec<f64>> = trunks.iter().map(|t| t.x_features().to_vec()).collect();
        let ys: Vec<Vec<f64>> = trunks.iter().map(|t| t.y_features().to_vec()).collect();
        c.mi = mutual_information_loss(&xs, &ys)?;
    }
    let real: Vec<f64> = real_rf.iter().map(|r| r.score).collect();
    let fake: Vec<f64> = fake_rf.iter().map(|r| r.score).collect();
    c.cat_ce = real_fake_cross_entropy(&real, &fake)?;
    c.adv = adv_losses(&real, &fake)?.g;
    let report = compose_losses(&c, &cfg.weights)?;

    let k = cfg.weights.discriminator_coefficients();
    // the two-class cross-entropy averages over 2B scores: half the adversarial gradient
    let (d_real, d_fake) = adv_d_grad(&real, &fake);
    let mut grads = Grads::new();
    for (i, s) in batch.iter().enumerate() {
        let t = &trunks[i];
        let y = one_hot(s.label);
        let mut d_p = vec![0.0; NUM_EMOTIONS];
        let mut d_q = vec![0.0; NUM_EMOTIONS];
        add_scaled(&mut d_p, &cross_entropy_grad(&y, &t.p), k.cls_aux / b);
        add_scaled(&mut d_q, &cross_entropy_grad(&y, &t.q), k.cls_traj / b);
        let (_, kp, kq) = kl_with_grad(&t.p, &t.q);
        add_scaled(&mut d_p, &kp, k.kl_pq / b);
        add_scaled(&mut d_q, &kq, k.kl_pq / b);
        let (_, kq, kp) = kl_with_grad(&t.q, &t.p);
        add_scaled(&mut d_p, &kp, k.kl_qp / b);
        add_scaled(&mut d_q, &kq, k.kl_qp / b);

        let recon = t.reconstruction();
        let mut d_recon = vec![0.0; recon.data().len()];
        add_scaled(
            &mut d_recon,
            &mse_grad(s.raw.data(), recon.data()),
            k.mse / b,
        );
        let g_dtw: Vec<f64> = dtw_grad_frozen(&s.raw_points, &points(recon), &paths[i])
            .into_iter()
            .flatten()
            .collect();
        add_scaled(&mut d_recon, &g_dtw, k.dtw / b);
        let d_recon = Tensor2::from_vec(recon.rows(), 2, d_recon)?;

        let half = 0.5 * k.cat_ce;
        let (mut d_pooled, _) =
            d.real_fake_backward(&state.disc, &real_rf[i], half * d_real[i], &mut grads)?;
        let (d_pooled_fake, _) =
            d.real_fake_backward(&state.disc, &fake_rf[i], half * d_fake[i], &mut grads)?;
        d_pooled.add_assign(&d_pooled_fake)?;
        d.trunk_backward(
            &state.disc,
            &s.inputs,
            t,
            &d_pooled,
            &d_p,
            &d_q,
            &d_recon,
            &mut grads,
        )?;
    }
    let predictions = gen_out.iter().map(|gp| argmax(&gp.dist)).collect();
    Ok(DiscStep {
        components: c,
        report,
        grads,
        predictions,
    })
}

/// Generator objective `L_reg + L_adv` of one batch and its gradients, with
/// the discriminator held fixed.
/// Generator objective `L_reg + L_adv_G + w * CE(label, G)` with `w` the
/// configured supervision weight, and its gradient. The discriminator is fixed.
pub fn generator_step(
    state: &ModelState,
    batch: &[&Prepared],
    supervision: f64,
) -> Result<(f64, Grads), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Empty("batch".into()));
    }
    let g = state.generator();
    let d = state.discriminator();
    let b = batch.len() as f64;
    let mut passes = Vec::with_capacity(batch.len());
    for s in batch {
        let gp = g.forward(&state.gen, &s.inputs)?;
        let enc = d.encoder.forward(&state.disc, &s.inputs)?;
        let rf = d.real_fake(&state.disc, &enc.pooled, &gp.dist)?;
        passes.push((gp, rf));
    }
    let fake: Vec<f64> = passes.iter().map(|(_, rf)| rf.score).collect();
    let mut reg = 0.0;
    for (s, (gp, _)) in batch.iter().zip(&passes) {
        reg += mse(&s.target, &gp.regression())? / b;
    }
    let mut sup = 0.0;
    if supervision > 0.0 {
        for (s, (gp, _)) in batch.iter().zip(&passes) {
            sup += supervision * -gp.dist[s.label].max(PROB_FLOOR).ln() / b;
        }
    }
    let value = reg + adv_losses(&fake, &fake)?.g + sup;
    let d_fake = adv_g_grad(&fake);
    let mut grads = Grads::new();
    let mut scratch = Grads::new();
    for (i, s) in batch.iter().enumerate() {
        let (gp, rf) = &passes[i];
        let (_, mut d_dist) = d.real_fake_backward(&state.disc, rf, d_fake[i], &mut scratch)?;
        if supervision > 0.0 && gp.dist[s.label] > PROB_FLOOR {
            d_dist[s.label] -= supervision / (b * gp.dist[s.label]);
        }
        let pred = gp.regression();
        let gr = mse_grad(&s.target, &pred);
        g.backward(
            &state.gen,
            &s.inputs,
            gp,
            &d_dist,
            [gr[0] / b, gr[1] / b],
            &mut grads,
        )?;
    }
    Ok((value, grads))
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

/// One record per epoch; losses are sample-weighted means over batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub components: LossComponents,
    pub report: LossReport,
    /// Generator accuracy on the training batches before each update.
    pub train_accuracy: f64,
}

pub struct TrainOutcome {
    pub state: ModelState,
    pub log: Vec<EpochLog>,
}

pub fn prepare(data: &[SioSequence], model: &ModelConfig) -> Result<Vec<Prepared>, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Empty("training set".into()));
    }
    let prepared = data
        .iter()
        .map(|s| Prepared::new(s, model))
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = [0usize; NUM_EMOTIONS];
    for p in &prepared {
        counts[p.label] += 1;
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(ModelError::Data(format!(
            "no training sample of class {}",
            EmotionLabel::ALL[i].name()
        )));
    }
    Ok(prepared)
}

pub fn train(data: &[SioSequence], cfg: &TrainConfig) -> Result<TrainOutcome, ModelError> {
    train_with(data, cfg, |_, _| Ok(()))
}

/// Trains from a fresh initialization, calling `on_epoch` after every epoch.
pub fn train_with(
    data: &[SioSequence],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &ModelState) -> Result<(), ModelError>,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    let prepared = prepare(data, &cfg.model)?;
    let mut state = ModelState::new(&cfg.model, cfg.seed)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..cfg.epochs {
        let adam = cfg.adam(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng_stream(
            cfg.seed,
            stream_id(StreamDomain::Shuffle, epoch as u64),
        ));
        let mut parts = Vec::new();
        let mut correct = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let nonfinite = |term: &str| ModelError::NonFinite {
                term: term.to_string(),
                epoch,
                batch: bi,
            };
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &prepared[i]).collect();
            let step = discriminator_step(&state, &batch, cfg).map_err(|e| match e {
                ModelError::Loss(LossError::NonFinite(t)) => nonfinite(t),
                other => other,
            })?;
            if !step.grads.is_finite() {
                return Err(nonfinite("discriminator gradient"));
            }
            correct += step
                .predictions
                .iter()
                .zip(&batch)
                .filter(|(p, s)| **p == s.label)
                .count();
            state.disc.adam_update(&step.grads, &adam)?;
            let (g_value, g_grads) = generator_step(&state, &batch, cfg.gen_supervision)?;
            if !g_value.is_finite() {
                return Err(nonfinite("g_total"));
            }
            if !g_grads.is_finite() {
                return Err(nonfinite("generator gradient"));
            }
            state.gen.adam_update(&g_grads, &adam)?;
            parts.push((step.components, batch.len() as f64));
        }
        let components = LossComponents::weighted_mean(&parts);
        let entry = EpochLog {
            epoch,
            components,
            report: compose_losses(&components, &cfg.weights)?,
            train_accuracy: correct as f64 / prepared.len() as f64,
        };
        on_epoch(&entry, &state)?;
        log.push(entry);
    }
    Ok(TrainOutcome { state, log })
}
