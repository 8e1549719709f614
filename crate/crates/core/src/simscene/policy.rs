//! Emotion-conditioned object preference policies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{EmotionLabel, Scene, NUM_EMOTIONS};

use super::SimError;

const DEFAULT_TABLE: &str = include_str!("../../data/emotion_policies.txt");

pub const FEATURE_NAMES: [&str; 4] = ["saliency", "brightness", "corner", "detail"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionPolicy {
    /// Weights over [`FEATURE_NAMES`].
    pub weights: [f64; 4],
    /// Softmax temperature; zero selects the best-scoring object.
    pub temperature: f64,
    /// Mean fixation duration in seconds.
    pub mean_duration: f64,
    /// Standard deviation of fixation jitter in degrees.
    pub dispersion_deg: f64,
    pub revisit_prob: f64,
}

impl EmotionPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidPolicy(m));
        if !self.weights.iter().all(|w| w.is_finite()) {
            return bad("weights must be finite".into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.mean_duration > 0.0 && self.mean_duration.is_finite()) {
            return bad(format!("duration {} must be > 0", self.mean_duration));
        }
        if !(self.dispersion_deg >= 0.0 && self.dispersion_deg.is_finite()) {
            return bad(format!("dispersion {} must be >= 0", self.dispersion_deg));
        }
        if !(0.0..=1.0).contains(&self.revisit_prob) {
            return bad(format!(
                "revisit probability {} outside [0, 1]",
                self.revisit_prob
            ));
        }
        Ok(())
    }

    /// Unnormalized log-preference of each object, in scene order.
    pub fn scores(&self, scene: &Scene) -> Vec<f64> {
        object_features(scene)
            .iter()
            .map(|f| f.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Raw per-object features `[saliency, brightness, corner, detail]`.
pub fn raw_features(scene: &Scene) -> Vec<[f64; 4]> {
    let max_area = scene
        .objects
        .iter()
        .map(|o| o.bbox.area())
        .fold(0.0f64, f64::max);
    let (w, h) = (scene.size.w(), scene.size.h());
    scene
        .objects
        .iter()
        .map(|o| {
            let (cx, cy) = o.bbox.centroid();
            let corner = ((cx - w / 2.0).abs() / (w / 2.0)).max((cy - h / 2.0).abs() / (h / 2.0));
            let detail = if max_area > 0.0 {
                1.0 - o.bbox.area() / max_area
            } else {
                0.0
            };
            [o.saliency, o.brightness, corner, detail]
        })
        .collect()
}

/// Features standardized to zero mean and unit variance within the scene;
/// a constant feature becomes zero.
pub fn object_features(scene: &Scene) -> Vec<[f64; 4]> {
    let raw = raw_features(scene);
    let n = raw.len() as f64;
    let mut out = raw.clone();
    for j in 0..4 {
        let mean = raw.iter().map(|f| f[j]).sum::<f64>() / n;
        let var = raw.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for (o, r) in out.iter_mut().zip(&raw) {
            o[j] = if sd > 1e-12 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// One policy per emotion, indexed by ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub policies: Vec<EmotionPolicy>,
}

impl Default for PolicyTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped policy table parses")
    }
}

impl PolicyTable {
    pub fn get(&self, e: EmotionLabel) -> &EmotionPolicy {
        &self.policies[e.ordinal()]
    }

    /// Parses `Name key=value ...` lines; `#` starts a comment. Every emotion
    /// must appear exactly once with all eight keys.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut slots: Vec<Option<EmotionPolicy>> = vec![None; NUM_EMOTIONS];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| SimError::InvalidPolicy(format!("line {}: {m}", i + 1));
            let mut tokens = line.split_whitespace();
            let name = tokens.next().unwrap_or_default();
            let emotion = EmotionLabel::from_name(name)
                .ok_or_else(|| err(format!("unknown emotion `{name}`")))?;
            let mut kv = BTreeMap::new();
            for tok in tokens {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got `{tok}`")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|e| err(format!("bad value for `{k}`: {e}")))?;
                if kv.insert(k.to_string(), v).is_some() {
                    return Err(err(format!("duplicate key `{k}`")));
                }
            }
            let mut take = |k: &str| {
                kv.remove(k)
                    .ok_or_else(|| err(format!("missing key `{k}`")))
            };
            let policy = EmotionPolicy {
                weights: [
                    take("saliency")?,
                    take("brightness")?,
                    take("corner")?,
                    take("detail")?,
                ],
                temperature: take("temperature")?,
                mean_duration: take("duration")?,
                dispersion_deg: take("dispersion")?,
                revisit_prob: take("revisit")?,
            };
            if let Some(k) = kv.keys().next() {
                return Err(err(format!("unknown key `{k}`")));
            }
            policy.validate().map_err(|e| err(e.to_string()))?;
            let slot = &mut slots[emotion.ordinal()];
            if slot.is_some() {
                return Err(err(format!("{name} defined twice")));
            }
            *slot = Some(policy);
        }
        let policies = slots
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.ok_or_else(|| {
                    SimError::InvalidPolicy(format!(
                        "no policy for {}",
                        EmotionLabel::ALL[i].name()
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { policies })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (e, p) in EmotionLabel::ALL.iter().zip(&self.policies) {
            let _ = writeln!(
                out,
                "{} saliency={} brightness={} corner={} detail={} temperature={} duration={} dispersion={} revisit={}",
                e.name(),
                p.weights[0],
                p.weights[1],
                p.weights[2],
                p.weights[3],
                p.temperature,
                p.mean_duration,
                p.dispersion_deg,
                p.revisit_prob
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_has_six_valid_policies() {
        let t = PolicyTable::default();
        assert_eq!(t.policies.len(), NUM_EMOTIONS);
        for p in &t.policies {
            p.validate().unwrap();
        }
    }

    #[test]
    fn text_round_trip() {
        let t = PolicyTable::default();
        assert_eq!(PolicyTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn parse_errors() {
        let t = PolicyTable::default().to_text();
        let missing = t.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(PolicyTable::parse(&missing)
            .unwrap_err()
            .to_string()
            .contains("no policy for Angry"));
        let extra = t.replacen("revisit=", "bogus=1 revisit=", 1);
        assert!(PolicyTable::parse(&extra)
            .unwrap_err()
            .to_string()
            .contains("unknown key `bogus`"));
        let bad_p = t.replacen("revisit=0.1", "revisit=1.5", 1);
        assert!(PolicyTable::parse(&bad_p).is_err());
        assert!(PolicyTable::parse(&format!("{t}\nJoy saliency=1")).is_err());
    }
}
