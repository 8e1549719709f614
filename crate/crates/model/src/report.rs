//! Loss weights and the composed loss report.

use serde::{Deserialize, Serialize};

use crate::error::LossError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of `KL(P || Q)` in the auxiliary classification loss.
    pub lambda: f64,
    /// Weight of `KL(Q || P)` in the trajectory loss.
    pub beta_sup: f64,
    /// MSE weight inside the reconstruction loss.
    pub alpha_rec: f64,
    /// DTW weight inside the reconstruction loss.
    pub beta_rec: f64,
    /// Drop the reconstruction terms that the discriminator total otherwise
    /// counts a second time.
    pub dedup: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            beta_sup: 0.1,
            alpha_rec: 0.5,
            beta_rec: 0.5,
            dedup: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("beta_sup", self.beta_sup),
            ("alpha_rec", self.alpha_rec),
            ("beta_rec", self.beta_rec),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("loss weight {name} = {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Coefficient of each primitive term in the discriminator total.
    pub fn discriminator_coefficients(&self) -> DiscCoefficients {
        let extra = if self.dedup { 0.0 } else { 1.0 };
        DiscCoefficients {
            cls_aux: 1.0,
            cls_traj: 1.0,
            kl_pq: self.lambda,
            kl_qp: self.beta_sup,
            mse: (1.0 + extra) * self.alpha_rec + extra,
            dtw: (1.0 + extra) * self.beta_rec + extra,
            cat_ce: 1.0,
        }
    }
}

/// Linear weights of the differentiable terms in the discriminator total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscCoefficients {
    pub cls_aux: f64,
    pub cls_traj: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub mse: f64,
    pub dtw: f64,
    pub cat_ce: f64,
}

/// Primitive batch losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub cls_aux: f64,
    pub cls_traj: f64,
    pub mi: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub mse: f64,
    pub dtw: f64,
    pub cat_ce: f64,
    pub adv: f64,
    pub reg: f64,
}

impl LossComponents {
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("cls_aux", self.cls_aux),
            ("cls_traj", self.cls_traj),
            ("mi", self.mi),
            ("kl_pq", self.kl_pq),
            ("kl_qp", self.kl_qp),
            ("mse", self.mse),
            ("dtw", self.dtw),
            ("cat_ce", self.cat_ce),
            ("adv", self.adv),
            ("reg", self.reg),
        ]
    }

    /// Componentwise weighted mean.
    pub fn weighted_mean(parts: &[(LossComponents, f64)]) -> LossComponents {
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        let mut out = LossComponents::default();
        if total <= 0.0 {
            return out;
        }
        for (c, w) in parts {
            let f = w / total;
            out.cls_aux += f * c.cls_aux;
            out.cls_traj += f * c.cls_traj;
            out.mi += f * c.mi;
            out.kl_pq += f * c.kl_pq;
            out.kl_qp += f * c.kl_qp;
            out.mse += f * c.mse;
            out.dtw += f * c.dtw;
            out.cat_ce += f * c.cat_ce;
            out.adv += f * c.adv;
            out.reg += f * c.reg;
        }
        out
    }
}

/// Every named loss term of one batch or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub cls_aux: f64,
    pub cls_traj: f64,
    pub mi: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub mse: f64,
    pub dtw: f64,
    pub rec: f64,
    pub aux_cls: f64,
    pub traj: f64,
    pub ars_total: f64,
    pub cat_ce: f64,
    pub adv: f64,
    pub reg: f64,
    pub g_total: f64,
    pub d_total: f64,
    pub total: f64,
}

/// Builds the report; fails on the first non-finite component.
pub fn compose_losses(c: &LossComponents, w: &LossWeights) -> Result<LossReport, LossError> {
    for (name, v) in c.named() {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    let rec = w.alpha_rec * c.mse + w.beta_rec * c.dtw;
    let aux_cls = c.cls_aux + w.lambda * c.kl_pq;
    let traj = c.cls_traj + rec + w.beta_sup * c.kl_qp;
    let ars_total = traj + aux_cls + c.mi;
    let g_total = c.reg + c.adv;
    let d_total = if w.dedup {
        ars_total + c.cat_ce
    } else {
        ars_total + c.cat_ce + c.dtw + c.mse + rec
    };
    let report = LossReport {
        cls_aux: c.cls_aux,
        cls_traj: c.cls_traj,
        mi: c.mi,
        kl_pq: c.kl_pq,
        kl_qp: c.kl_qp,
        mse: c.mse,
        dtw: c.dtw,
        rec,
        aux_cls,
        traj,
        ars_total,
        cat_ce: c.cat_ce,
        adv: c.adv,
        reg: c.reg,
        g_total,
        d_total,
        total: d_total + g_total,
    };
    for (name, v) in [
        ("rec", rec),
        ("aux_cls", aux_cls),
        ("traj", traj),
        ("ars_total", ars_total),
        ("g_total", g_total),
        ("d_total", d_total),
        ("total", report.total),
    ] {
        if !v.is_finite() {
            return Err(LossError::NonFinite(name));
        }
    }
    Ok(report)
}
