//! Run configuration: shipped defaults, then an optional TOML file, then
//! dotted `key=value` overrides. Keys absent from the default tree are rejected.

use std::path::Path;

use gazeforge_core::calib::SessionConfig;
use gazeforge_core::domain::digest_bytes;
use gazeforge_core::metrics::{CawVariant, FccConfig};
use gazeforge_core::simscene::{DatasetSpec, PolicyTable, TICK_S};
use gazeforge_model::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Path to an emotion policy table; empty selects the shipped table.
    pub policy: String,
    pub dataset: DatasetSpec,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
    pub rig: RigConfig,
    pub projection: ProjectionConfig,
    pub fcc: FccConfig,
    pub eval: EvalConfig,
    pub pipeline: PipelineSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            policy: String::new(),
            dataset: DatasetSpec::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            calibration: CalibrationConfig::default(),
            rig: RigConfig::default(),
            projection: ProjectionConfig::default(),
            fcc: FccConfig::default(),
            eval: EvalConfig::default(),
            pipeline: PipelineSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    /// Stratified cross-validation folds run by the pipeline; 0 disables.
    pub folds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            folds: 0,
        }
    }
}

/// The simulated subject cohort used for calibration and biased gaze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Subjects `0..biased_subjects` get an affine bias; the rest see identity.
    pub biased_subjects: usize,
    pub bias_min_deg: f64,
    pub bias_max_deg: f64,
    pub matrix_jitter: f64,
    /// Gaze noise of every subject, degrees.
    pub noise_deg: f64,
    /// Number of dataset scenes shown during calibration sessions.
    pub scenes: usize,
    pub session: SessionConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            biased_subjects: 6,
            bias_min_deg: 3.0,
            bias_max_deg: 6.0,
            matrix_jitter: 0.01,
            noise_deg: 0.5,
            scenes: 12,
            session: SessionConfig::default(),
        }
    }
}

/// Ring of cameras around the room and the subject placement model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigConfig {
    pub cameras: usize,
    /// Ring radius, metres.
    pub radius: f64,
    /// Mounting height of every camera, metres.
    pub height: f64,
    /// Height of the point all cameras aim at; also the scene sphere centre.
    pub target_height: f64,
    pub focal: f64,
    pub frame_width: u32,
    pub frame_height: u32,
    pub pixel_sigma: f64,
    pub capture_rate: f64,
    /// A camera sees the eyes when its bearing from the head lies within
    /// this angle of the facing direction.
    pub eye_visibility_deg: f64,
    /// Subjects stand uniformly inside this disc around the room centre.
    pub room_radius: f64,
    pub head_height_min: f64,
    pub head_height_max: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            cameras: 8,
            radius: 2.5,
            height: 1.8,
            target_height: 1.65,
            focal: 900.0,
            frame_width: 1280,
            frame_height: 720,
            pixel_sigma: 0.5,
            capture_rate: 30.0,
            eye_visibility_deg: 100.0,
            room_radius: 0.8,
            head_height_min: 1.5,
            head_height_max: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    /// Gaze sampling interval, seconds; a multiple of the scanpath tick.
    pub interval_s: f64,
    pub fov_deg: f64,
    /// Side of the square headset viewport, pixels.
    pub patch_px: usize,
    /// Time the head needs to follow a gaze shift.
    pub head_turn_s: f64,
    /// Radius of the sphere the panorama is displayed on, metres.
    pub scene_radius: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            interval_s: 0.1,
            fov_deg: 120.0,
            patch_px: 512,
            head_turn_s: 0.25,
            scene_radius: 3.0,
        }
    }
}

impl ProjectionConfig {
    /// Sampling interval in scanpath ticks.
    pub fn interval_ticks(&self) -> u64 {
        (self.interval_s / TICK_S).round() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub variant: CawVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Dataset,
    Rig,
    Observe,
    Triangulate,
    Project,
    Calibrate,
    Sio,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Dataset,
        Stage::Rig,
        Stage::Observe,
        Stage::Triangulate,
        Stage::Project,
        Stage::Calibrate,
        Stage::Sio,
        Stage::Train,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Dataset => "dataset",
            Stage::Rig => "rig",
            Stage::Observe => "observe",
            Stage::Triangulate => "triangulate",
            Stage::Project => "project",
            Stage::Calibrate => "calibrate",
            Stage::Sio => "sio",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }
}

/// Stages to run; always a prefix of [`Stage::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSpec {
    pub stages: Vec<Stage>,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            stages: Stage::ALL.to_vec(),
        }
    }
}

impl PipelineSpec {
    pub fn runs(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    /// Defaults, then `file`, then each `key=value` in `sets`.
    pub fn load(file: Option<&Path>, sets: &[String]) -> Result<Self, CliError> {
        let mut tree = Table::try_from(Config::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let table: Table = text
                .parse()
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            merge(&mut tree, table, "")?;
        }
        for s in sets {
            apply_set(&mut tree, s)?;
        }
        let cfg: Config = Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        digest_bytes(self.to_toml().as_bytes())
    }

    /// The shipped table, or the file named by `policy`.
    pub fn policies(&self) -> anyhow::Result<PolicyTable> {
        if self.policy.is_empty() {
            return Ok(PolicyTable::default());
        }
        let text = std::fs::read_to_string(&self.policy)
            .map_err(|e| anyhow::anyhow!("policy file {}: {e}", self.policy))?;
        PolicyTable::parse(&text).map_err(|e| anyhow::anyhow!("policy file {}: {e}", self.policy))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.dataset;
        if d.n_scenes == 0 || d.n_subjects == 0 || d.objects_per_scene == 0 {
            return Err(invalid("dataset needs scenes, subjects and objects"));
        }
        if d.fixations_per_episode == 0 {
            return Err(invalid("dataset.fixations_per_episode must be positive"));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(invalid(format!(
                "split.train_fraction {} must lie in (0, 1)",
                self.split.train_fraction
            )));
        }
        if self.split.folds == 1 {
            return Err(invalid("split.folds must be 0 or at least 2"));
        }
        self.train
            .validate()
            .map_err(|e| invalid(format!("train: {e}")))?;
        self.fcc
            .validate()
            .map_err(|e| invalid(format!("fcc: {e}")))?;
        let c = &self.calibration;
        if c.biased_subjects > d.n_subjects {
            return Err(invalid(format!(
                "calibration.biased_subjects {} exceeds dataset.n_subjects {}",
                c.biased_subjects, d.n_subjects
            )));
        }
        if !(c.bias_min_deg >= 0.0 && c.bias_min_deg <= c.bias_max_deg) {
            return Err(invalid(
                "calibration bias range must satisfy 0 <= min <= max",
            ));
        }
        if !(c.noise_deg >= 0.0 && c.matrix_jitter >= 0.0 && c.matrix_jitter < 0.5) {
            return Err(invalid(
                "calibration noise and jitter must be small and non-negative",
            ));
        }
        if c.scenes == 0 {
            return Err(invalid("calibration.scenes must be positive"));
        }
        let r = &self.rig;
        if r.cameras == 0 {
            return Err(invalid("rig.cameras must be positive"));
        }
        let positive = [
            ("rig.radius", r.radius),
            ("rig.focal", r.focal),
            ("rig.capture_rate", r.capture_rate),
            ("rig.eye_visibility_deg", r.eye_visibility_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(r.pixel_sigma >= 0.0 && r.room_radius >= 0.0) {
            return Err(invalid("rig.pixel_sigma and rig.room_radius must be >= 0"));
        }
        if !(r.head_height_min <= r.head_height_max) {
            return Err(invalid("rig head height range is empty"));
        }
        let p = &self.projection;
        let ticks = p.interval_s / TICK_S;
        if !(ticks >= 1.0 - 1e-9 && (ticks - ticks.round()).abs() < 1e-6) {
            return Err(invalid(format!(
                "projection.interval_s {} must be a positive multiple of {TICK_S}",
                p.interval_s
            )));
        }
        if !(p.fov_deg > 0.0 && p.fov_deg < 180.0) {
            return Err(invalid(format!(
                "projection.fov_deg {} must lie in (0, 180)",
                p.fov_deg
            )));
        }
        if p.patch_px == 0 || !(p.head_turn_s >= 0.0) {
            return Err(invalid(
                "projection.patch_px and head_turn_s must be positive",
            ));
        }
        if !(p.scene_radius > r.room_radius + 0.1) {
            return Err(invalid("projection.scene_radius must enclose the room"));
        }
        let stages = &self.pipeline.stages;
        if stages.is_empty() || stages[..] != Stage::ALL[..stages.len()] {
            let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            return Err(invalid(format!(
                "pipeline.stages must be a non-empty prefix of [{}]",
                names.join(", ")
            )));
        }
        Ok(())
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Converts `new` to the type of `old` where TOML is looser than the schema.
fn coerce(old: &Value, new: Value) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(o), Value::Array(n)) if !o.is_empty() => {
            Value::Array(n.into_iter().map(|v| coerce(&o[0], v)).collect())
        }
        (_, n) => n,
    }
}

fn merge(tree: &mut Table, incoming: Table, prefix: &str) -> Result<(), CliError> {
    for (k, v) in incoming {
        let path = join(prefix, &k);
        let Some(slot) = tree.get_mut(&k) else {
            return Err(CliError::UnknownKey(path));
        };
        match (slot, v) {
            (Value::Table(t), Value::Table(n)) => merge(t, n, &path)?,
            (slot, v) => *slot = coerce(slot, v),
        }
    }
    Ok(())
}

fn apply_set(tree: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = tree;
    for (i, part) in parts.iter().enumerate() {
        let path = parts[..=i].join(".");
        let Some(slot) = node.get_mut(*part) else {
            return Err(CliError::UnknownKey(path));
        };
        if i + 1 == parts.len() {
            if matches!(slot, Value::Table(_)) {
                return Err(invalid(format!("`{path}` is a section, not a value")));
            }
            let parsed = format!("v = {raw}")
                .parse::<Table>()
                .ok()
                .and_then(|mut t| t.remove("v"));
            let value = match (&*slot, parsed) {
                (Value::String(_), _) | (_, None) => {
                    Value::String(raw.trim_matches('"').to_string())
                }
                (_, Some(v)) => v,
            };
            *slot = coerce(slot, value);
            return Ok(());
        }
        node = match slot {
            Value::Table(t) => t,
            _ => return Err(CliError::UnknownKey(parts[..=i + 1].join("."))),
        };
    }
    unreachable!("split yields at least one part")
}
