//! Generator and discriminator networks with explicit backward passes.

use gazeforge_core::domain::NUM_EMOTIONS;
use gazeforge_core::sio::{PatchCache, PatchEmbed, SioSequence, DEFAULT_PATCH_SIZE};
use gazeforge_tinynn::{
    dense, dense_backward, softmax, softmax_backward, Activation, AttentionBlock, AttentionCache,
    Grads, ParamStore, RnnCell, RnnStepCache, Tensor2,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub embed_dim: usize,
    pub mlp_hidden: usize,
    pub gen_blocks: usize,
    pub disc_blocks: usize,
    /// Width of the auxiliary and trajectory necks.
    pub neck_dim: usize,
    pub rnn_hidden: usize,
    pub decoder_hidden: usize,
    pub real_fake_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            patch_size: DEFAULT_PATCH_SIZE,
            embed_dim: 32,
            mlp_hidden: 64,
            gen_blocks: 2,
            disc_blocks: 1,
            neck_dim: 16,
            rnn_hidden: 16,
            decoder_hidden: 16,
            real_fake_hidden: 16,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("mlp_hidden", self.mlp_hidden),
            ("gen_blocks", self.gen_blocks),
            ("neck_dim", self.neck_dim),
            ("rnn_hidden", self.rnn_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("real_fake_hidden", self.real_fake_hidden),
        ] {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Dense layer followed by an elementwise activation.
#[derive(Debug, Clone)]
pub struct Layer {
    pub prefix: String,
    pub input: usize,
    pub output: usize,
    pub act: Activation,
}

/// Pre-activation and output of a [`Layer`].
#[derive(Debug, Clone)]
pub struct LayerPass {
    pub pre: Tensor2,
    pub out: Tensor2,
}

impl Layer {
    pub fn new(prefix: impl Into<String>, input: usize, output: usize, act: Activation) -> Self {
        Self {
            prefix: prefix.into(),
            input,
            output,
            act,
        }
    }

    pub fn w(&self) -> String {
        format!("{}.w", self.prefix)
    }

    pub fn b(&self) -> String {
        format!("{}.b", self.prefix)
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        store.init_weight(&self.w(), self.input, self.output, rng);
        store.init_zeros(&self.b(), 1, self.output);
    }

    pub fn init_zero(&self, store: &mut ParamStore) {
        store.init_zeros(&self.w(), self.input, self.output);
        store.init_zeros(&self.b(), 1, self.output);
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<LayerPass, ModelError> {
        let pre = dense(x, store.get(&self.w())?, store.get(&self.b())?)?;
        let out = self.act.forward(&pre);
        Ok(LayerPass { pre, out })
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(
        &self,
        store: &ParamStore,
        x: &Tensor2,
        pass: &LayerPass,
        dy: &Tensor2,
        grads: &mut Grads,
    ) -> Result<Tensor2, ModelError> {
        let dpre = self.act.backward(&pass.pre, dy)?;
        let g = dense_backward(x, store.get(&self.w())?, &dpre)?;
        grads.accumulate(&self.w(), &g.dw);
        grads.accumulate(&self.b(), &g.db);
        Ok(g.dx)
    }
}

/// Patch embedding, attention blocks and mean pooling.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub embed: PatchEmbed,
    pub blocks: Vec<AttentionBlock>,
}

#[derive(Debug, Clone)]
pub struct EncoderPass {
    blocks: Vec<AttentionCache>,
    rows: usize,
    /// `1 x E` mean over tokens.
    pub pooled: Tensor2,
}

impl Encoder {
    pub fn new(prefix: &str, cfg: &ModelConfig, blocks: usize) -> Self {
        Self {
            embed: PatchEmbed::new(format!("{prefix}.pe"), cfg.patch_size, cfg.embed_dim),
            blocks: (0..blocks)
                .map(|k| {
                    AttentionBlock::new(format!("{prefix}.att{k}"), cfg.embed_dim, cfg.mlp_hidden)
                })
                .collect(),
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.embed.init(store, rng);
        for b in &self.blocks {
            b.init(store, rng);
        }
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        inputs: &PatchCache,
    ) -> Result<EncoderPass, ModelError> {
        if inputs.patches.rows() == 0 {
            return Err(ModelError::Empty("sequence has no items".into()));
        }
        let mut x = self.embed.forward_inputs(store, inputs)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(store, &x)?;
            caches.push(c);
            x = y;
        }
        Ok(EncoderPass {
            blocks: caches,
            rows: x.rows(),
            pooled: x.mean_rows(),
        })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        inputs: &PatchCache,
        pass: &EncoderPass,
        d_pooled: &Tensor2,
        grads: &mut Grads,
    ) -> Result<(), ModelError> {
        let share = d_pooled.scale(1.0 / pass.rows as f64);
        let mut dx = Tensor2::vstack(&vec![share; pass.rows])?;
        for (b, c) in self.blocks.iter().zip(&pass.blocks).rev() {
            dx = b.backward(store, c, &dx, grads)?;
        }
        self.embed.backward(store, inputs, &dx, grads)?;
        Ok(())
    }
}

/// Emotion classifier with a duration/dispersion regressor.
///
/// Parameter names start with `g.`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub encoder: Encoder,
    pub cls: Layer,
    pub reg: Layer,
}

#[derive(Debug, Clone)]
pub struct GenPass {
    pub encoder: EncoderPass,
    pub cls: LayerPass,
    pub reg: LayerPass,
    pub dist: Vec<f64>,
}

impl GenPass {
    pub fn regression(&self) -> [f64; 2] {
        [self.reg.out.data()[0], self.reg.out.data()[1]]
    }
}

impl Generator {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            encoder: Encoder::new("g", cfg, cfg.gen_blocks),
            cls: Layer::new("g.cls", cfg.embed_dim, NUM_EMOTIONS, Activation::Identity),
            reg: Layer::new("g.reg", cfg.embed_dim, 2, Activation::Softplus),
        }
    }

    /// Encoder and regression head are random; the class head starts at zero.
    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.encoder.init(store, rng);
        self.cls.init_zero(store);
        self.reg.init(store, rng);
    }

    pub fn forward(&self, store: &ParamStore, inputs: &PatchCache) -> Result<GenPass, ModelError> {
        let encoder = self.encoder.forward(store, inputs)?;
        let cls = self.cls.forward(store, &encoder.pooled)?;
        let reg = self.reg.forward(store, &encoder.pooled)?;
        let dist = softmax(cls.out.data());
        Ok(GenPass {
            encoder,
            cls,
            reg,
            dist,
        })
    }

    pub fn forward_seq(
        &self,
        store: &ParamStore,
        seq: &SioSequence,
    ) -> Result<GenPass, ModelError> {
        let inputs = self.encoder.embed.inputs(seq)?;
        self.forward(store, &inputs)
    }

    /// Backward from gradients on the output distribution and the regression.
    pub fn backward(
        &self,
        store: &ParamStore,
        inputs: &PatchCache,
        pass: &GenPass,
        d_dist: &[f64],
        d_reg: [f64; 2],
        grads: &mut Grads,
    ) -> Result<(), ModelError> {
        let pooled = &pass.encoder.pooled;
        let d_logits = Tensor2::row(&softmax_backward(&pass.dist, d_dist));
        let mut dh = self
            .cls
            .backward(store, pooled, &pass.cls, &d_logits, grads)?;
        let dh_reg = self
            .reg
            .backward(store, pooled, &pass.reg, &Tensor2::row(&d_reg), grads)?;
        dh.add_assign(&dh_reg)?;
        self.encoder
            .backward(store, inputs, &pass.encoder, &dh, grads)
    }
}

/// Real/fake head, auxiliary classifier, scanpath classifier and scanpath
/// decoder.
///
/// Parameter names start with `d.`.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub encoder: Encoder,
    pub aux_neck: Layer,
    pub aux_head: Layer,
    pub rnn: RnnCell,
    pub traj_neck: Layer,
    pub traj_head: Layer,
    pub dec1: Layer,
    pub dec2: Layer,
    pub rf1: Layer,
    pub rf2: Layer,
    /// Class projection of the pooled features, dotted with the candidate
    /// distribution and added to the real/fake logit.
    pub rf_proj: Layer,
}

/// Everything the discriminator computes before the real/fake head.
#[derive(Debug, Clone)]
pub struct TrunkPass {
    pub encoder: EncoderPass,
    pub aux_neck: LayerPass,
    pub aux_head: LayerPass,
    /// Auxiliary-branch distribution.
    pub p: Vec<f64>,
    rnn: Vec<RnnStepCache>,
    h_last: Tensor2,
    pub traj_neck: LayerPass,
    pub traj_head: LayerPass,
    /// Scanpath-branch distribution.
    pub q: Vec<f64>,
    dec_in: Tensor2,
    dec1: LayerPass,
    pub dec2: LayerPass,
}

impl TrunkPass {
    /// Auxiliary neck features.
    pub fn x_features(&self) -> &[f64] {
        self.aux_neck.out.data()
    }

    /// Scanpath neck features.
    pub fn y_features(&self) -> &[f64] {
        self.traj_neck.out.data()
    }

    /// `n x 2` reconstructed coordinates.
    pub fn reconstruction(&self) -> &Tensor2 {
        &self.dec2.out
    }
}

#[derive(Debug, Clone)]
pub struct RealFakePass {
    input: Tensor2,
    dist: Vec<f64>,
    h: LayerPass,
    out: LayerPass,
    proj: LayerPass,
    pub score: f64,
}

/// Decoder time stamps `k / (n - 1)`, zero for a single point.
pub fn decoder_times(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if n > 1 {
                k as f64 / (n - 1) as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Raw fixation coordinates of a sequence as an `n x 2` matrix.
pub fn raw_coordinates(seq: &SioSequence) -> Result<Tensor2, ModelError> {
    if seq.raw.is_empty() {
        return Err(ModelError::Empty(format!(
            "sequence on `{}` has no raw fixations",
            seq.scene_id
        )));
    }
    let data = seq.raw.iter().flat_map(|p| p.iter().copied()).collect();
    Ok(Tensor2::from_vec(seq.raw.len(), 2, data)?)
}

impl Discriminator {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (e, k, h) = (cfg.embed_dim, cfg.neck_dim, cfg.rnn_hidden);
        Self {
            encoder: Encoder::new("d", cfg, cfg.disc_blocks),
            aux_neck: Layer::new("d.auxn", e, k, Activation::Tanh),
            aux_head: Layer::new("d.aux", k, NUM_EMOTIONS, Activation::Identity),
            rnn: RnnCell::new("d.rnn", 2, h),
            traj_neck: Layer::new("d.trajn", h, k, Activation::Tanh),
            traj_head: Layer::new("d.traj", k, NUM_EMOTIONS, Activation::Identity),
            dec1: Layer::new("d.dec1", k + 1, cfg.decoder_hidden, Activation::Tanh),
            dec2: Layer::new("d.dec2", cfg.decoder_hidden, 2, Activation::Sigmoid),
            rf1: Layer::new(
                "d.rf1",
                e + NUM_EMOTIONS,
                cfg.real_fake_hidden,
                Activation::Tanh,
            ),
            rf2: Layer::new("d.rf2", cfg.real_fake_hidden, 1, Activation::Identity),
            rf_proj: Layer::new("d.rfp", e, NUM_EMOTIONS, Activation::Identity),
        }
    }

    pub fn init<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        self.encoder.init(store, rng);
        self.rnn.init(store, rng);
        for l in [
            &self.aux_neck,
            &self.aux_head,
            &self.traj_neck,
            &self.traj_head,
            &self.dec1,
            &self.dec2,
            &self.rf1,
            &self.rf2,
            &self.rf_proj,
        ] {
            l.init(store, rng);
        }
    }

    pub fn trunk(
        &self,
        store: &ParamStore,
        inputs: &PatchCache,
        raw: &Tensor2,
    ) -> Result<TrunkPass, ModelError> {
        if raw.rows() == 0 || raw.cols() != 2 {
            return Err(ModelError::Empty("raw coordinates".into()));
        }
        let encoder = self.encoder.forward(store, inputs)?;
        let aux_neck = self.aux_neck.forward(store, &encoder.pooled)?;
        let aux_head = self.aux_head.forward(store, &aux_neck.out)?;
        let p = softmax(aux_head.out.data());

        let h0 = Tensor2::zeros(1, self.rnn.hidden);
        let rnn = self.rnn.unroll(store, &h0, raw)?;
        let h_last = rnn.last().expect("non-empty").h.clone();
        let traj_neck = self.traj_neck.forward(store, &h_last)?;
        let traj_head = self.traj_head.forward(store, &traj_neck.out)?;
        let q = softmax(traj_head.out.data());

        let n = raw.rows();
        let k = traj_neck.out.cols();
        let mut dec_data = Vec::with_capacity(n * (k + 1));
        for tau in decoder_times(n) {
            dec_data.extend_from_slice(traj_neck.out.data());
            dec_data.push(tau);
        }
        let dec_in = Tensor2::from_vec(n, k + 1, dec_data)?;
        let dec1 = self.dec1.forward(store, &dec_in)?;
        let dec2 = self.dec2.forward(store, &dec1.out)?;
        Ok(TrunkPass {
            encoder,
            aux_neck,
            aux_head,
            p,
            rnn,
            h_last,
            traj_neck,
            traj_head,
            q,
            dec_in,
            dec1,
            dec2,
        })
    }

    /// Probability that `dist` is the true label distribution of the sequence
    /// whose pooled features are `pooled`: sigmoid of an MLP over both,
    /// concatenated, plus `dist . (pooled Wp + bp)`.
    pub fn real_fake(
        &self,
        store: &ParamStore,
        pooled: &Tensor2,
        dist: &[f64],
    ) -> Result<RealFakePass, ModelError> {
        let input = pooled.hcat(&Tensor2::row(dist))?;
        let h = self.rf1.forward(store, &input)?;
        let out = self.rf2.forward(store, &h.out)?;
        let proj = self.rf_proj.forward(store, pooled)?;
        let logit = out.out.data()[0]
            + dist
                .iter()
                .zip(proj.out.data())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        Ok(RealFakePass {
            input,
            dist: dist.to_vec(),
            h,
            out,
            proj,
            score: gazeforge_tinynn::ops::sigmoid(logit),
        })
    }

    /// Returns gradients for the pooled features and the candidate distribution.
    pub fn real_fake_backward(
        &self,
        store: &ParamStore,
        pass: &RealFakePass,
        d_score: f64,
        grads: &mut Grads,
    ) -> Result<(Tensor2, Vec<f64>), ModelError> {
        let d_logit = d_score * pass.score * (1.0 - pass.score);
        let dh = self.rf2.backward(
            store,
            &pass.h.out,
            &pass.out,
            &Tensor2::row(&[d_logit]),
            grads,
        )?;
        let dx = self.rf1.backward(store, &pass.input, &pass.h, &dh, grads)?;
        let (mut d_pooled, d_dist) = dx.split_cols(pass.input.cols() - NUM_EMOTIONS);
        let d_proj: Vec<f64> = pass.dist.iter().map(|p| d_logit * p).collect();
        let d_pooled_proj = self.rf_proj.backward(
            store,
            &pass.input.split_cols(pass.input.cols() - NUM_EMOTIONS).0,
            &pass.proj,
            &Tensor2::row(&d_proj),
            grads,
        )?;
        d_pooled.add_assign(&d_pooled_proj)?;
        let mut d_dist = d_dist.into_data();
        for (d, w) in d_dist.iter_mut().zip(pass.proj.out.data()) {
            *d += d_logit * w;
        }
        Ok((d_pooled, d_dist))
    }

    /// Backward through the trunk from gradients on the pooled features, both
    /// branch distributions and the reconstruction.
    #[allow(clippy::too_many_arguments)]
    pub fn trunk_backward(
        &self,
        store: &ParamStore,
        inputs: &PatchCache,
        pass: &TrunkPass,
        d_pooled: &Tensor2,
        d_p: &[f64],
        d_q: &[f64],
        d_recon: &Tensor2,
        grads: &mut Grads,
    ) -> Result<(), ModelError> {
        // decoder
        let d_dec1 = self
            .dec2
            .backward(store, &pass.dec1.out, &pass.dec2, d_recon, grads)?;
        let d_dec_in = self
            .dec1
            .backward(store, &pass.dec_in, &pass.dec1, &d_dec1, grads)?;
        let k = pass.traj_neck.out.cols();
        let mut d_y = vec![0.0; k];
        for r in 0..d_dec_in.rows() {
            for (acc, v) in d_y.iter_mut().zip(&d_dec_in.row_slice(r)[..k]) {
                *acc += v;
            }
        }
        let mut d_y = Tensor2::row(&d_y);

        // scanpath branch
        let d_q_logits = Tensor2::row(&softmax_backward(&pass.q, d_q));
        let d_y_head = self.traj_head.backward(
            store,
            &pass.traj_neck.out,
            &pass.traj_head,
            &d_q_logits,
            grads,
        )?;
        d_y.add_assign(&d_y_head)?;
        let d_h = self
            .traj_neck
            .backward(store, &pass.h_last, &pass.traj_neck, &d_y, grads)?;
        let n = pass.rnn.len();
        let mut dh_steps = Tensor2::zeros(n, self.rnn.hidden);
        dh_steps.row_slice_mut(n - 1).copy_from_slice(d_h.data());
        self.rnn
            .unroll_backward(store, &pass.rnn, &dh_steps, grads)?;

        // auxiliary branch
        let d_p_logits = Tensor2::row(&softmax_backward(&pass.p, d_p));
        let d_x = self.aux_head.backward(
            store,
            &pass.aux_neck.out,
            &pass.aux_head,
            &d_p_logits,
            grads,
        )?;
        let mut d_f =
            self.aux_neck
                .backward(store, &pass.encoder.pooled, &pass.aux_neck, &d_x, grads)?;
        d_f.add_assign(d_pooled)?;
        self.encoder
            .backward(store, inputs, &pass.encoder, &d_f, grads)
    }
}
