//! Held-out evaluation of a trained model and its tables.

use anyhow::Context;
use gazeforge_core::domain::{
    EmotionDistribution, EmotionLabel, ErpPoint, Raster, Scanpath, Scene,
};
use gazeforge_core::metrics::{
    cawf1, class_pr_curve, classification_report, extract_features, fcc, metrics_table, pr_table,
    render_attention, CawVariant, ClassificationReport, EvalRecord, FccConfig, HistGradExtractor,
    PrPoint,
};
use gazeforge_core::sio::SioSequence;
use gazeforge_model::ModelState;
use serde::{Deserialize, Serialize};

use crate::output::RunDir;

/// One held-out episode with the scene it was recorded on.
pub struct EvalInput<'a> {
    pub seq: &'a SioSequence,
    pub gaze: ErpPoint,
    pub scene: &'a Scene,
    pub raster: &'a Raster,
}

/// Point of the longest fixation, the first one on ties.
pub fn focus_point(scan: &Scanpath) -> ErpPoint {
    let mut best = &scan.fixations[0];
    for f in &scan.fixations[1..] {
        if f.duration > best.duration {
            best = f;
        }
    }
    best.point
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCurve {
    pub class: EmotionLabel,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: ClassificationReport,
    pub variant: CawVariant,
    pub cawf1: f64,
    pub fcc_mean: f64,
    pub fcc_scores: Vec<f64>,
    pub truth: Vec<EmotionLabel>,
    pub dists: Vec<EmotionDistribution>,
    pub scene_ids: Vec<String>,
    pub curves: Vec<ClassCurve>,
}

pub fn evaluate(
    state: &ModelState,
    inputs: &[EvalInput],
    fcc_cfg: &FccConfig,
    variant: CawVariant,
) -> anyhow::Result<Evaluation> {
    if inputs.is_empty() {
        anyhow::bail!("nothing to evaluate");
    }
    let mut records = Vec::with_capacity(inputs.len());
    for inp in inputs {
        let true_label = inp
            .seq
            .emotion
            .with_context(|| format!("episode on {} has no label", inp.seq.scene_id))?;
        let pred_dist = state.predict(inp.seq)?;
        let attended = render_attention(inp.scene, inp.raster, &inp.seq.object_ids());
        let features = extract_features(
            &attended,
            inp.raster,
            &inp.gaze,
            fcc_cfg,
            &HistGradExtractor,
        )?;
        records.push(EvalRecord {
            true_label,
            pred_dist,
            gaze_point: inp.gaze,
            scene_id: inp.seq.scene_id.clone(),
            features,
        });
    }
    let truth: Vec<EmotionLabel> = records.iter().map(|r| r.true_label).collect();
    let pred: Vec<EmotionLabel> = records.iter().map(|r| r.predicted()).collect();
    let dists: Vec<EmotionDistribution> = records.iter().map(|r| r.pred_dist).collect();
    let report = classification_report(&truth, &pred)?;
    let consistency = fcc(&records, fcc_cfg)?;
    let weighted = cawf1(&records, &report.class_f1(), &consistency.scores, variant)?;
    let curves = EmotionLabel::ALL
        .iter()
        .filter(|c| truth.contains(c))
        .map(|&c| {
            Ok(ClassCurve {
                class: c,
                points: class_pr_curve(&truth, &dists, c)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Evaluation {
        report,
        variant,
        cawf1: weighted,
        fcc_mean: consistency.mean,
        fcc_scores: consistency.scores,
        truth,
        dists,
        scene_ids: records.into_iter().map(|r| r.scene_id).collect(),
        curves,
    })
}

impl Evaluation {
    /// Writes `metrics.csv`, `predictions.csv`, one `pr_<class>.csv` per
    /// class and `summary.json` under `prefix`.
    pub fn write(&self, out: &RunDir, prefix: &str, extra: &[(&str, f64)]) -> anyhow::Result<()> {
        let mut rows = vec![("cawf1", self.cawf1), ("fcc_mean", self.fcc_mean)];
        rows.extend_from_slice(extra);
        out.write_text(
            &format!("{prefix}/metrics.csv"),
            &metrics_table(&self.report, &rows),
        )?;
        let mut pred = String::from("index,scene_id,true,predicted,fcc");
        for e in EmotionLabel::ALL {
            pred.push_str(&format!(",p_{}", e.name().to_lowercase()));
        }
        pred.push('\n');
        for (i, ((t, d), s)) in self
            .truth
            .iter()
            .zip(&self.dists)
            .zip(&self.scene_ids)
            .enumerate()
        {
            pred.push_str(&format!(
                "{i},{s},{t},{},{}",
                d.argmax(),
                self.fcc_scores[i]
            ));
            for p in d.0 {
                pred.push_str(&format!(",{p}"));
            }
            pred.push('\n');
        }
        out.write_text(&format!("{prefix}/predictions.csv"), &pred)?;
        for c in &self.curves {
            out.write_text(
                &format!("{prefix}/pr_{}.csv", c.class.name().to_lowercase()),
                &pr_table(&c.points),
            )?;
        }
        out.write_json(&format!("{prefix}/summary.json"), self)
    }
}
