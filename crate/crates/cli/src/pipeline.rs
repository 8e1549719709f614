//! End-to-end runs and ablation sweeps.
//!
//! Run directory layout:
//!
//! ```text
//! config.toml  manifest.json  summary.json
//! dataset/     scenes, true scanpaths, subject profiles
//! rig/         rig.txt, observations.csv, triangulation.csv
//! fov/         samples.csv (viewport pixel of every gaze sample)
//! calibration/ profiles, per-subject reports, summary.csv
//! collection/  recovered scanpaths, per-fixation hits
//! sio/         records.jsonl
//! split.json   model/  metrics/  plots/
//! ```

use std::collections::HashMap;
use std::path::Path;

use anyhow::Context;
use gazeforge_core::calib::{calibrate_session, median, CalibrationReport, StudentModel};
use gazeforge_core::domain::{
    read_records, EmotionLabel, Fixation, Raster, Scanpath, Scene, SCANPATH_FILE, SCENE_FILE,
};
use gazeforge_core::geometry::rig_to_text;
use gazeforge_core::metrics::gaze_accuracy;
use gazeforge_core::simscene::{gen_dataset, render_scene, SubjectProfile};
use gazeforge_core::sio::{build_sio, SioError, SioSequence};
use gazeforge_model::{train, ModelState, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    cohort, observe_head, place_subject, project_episode, recover_fixations, scene_centre,
    triangulate_head, GazeSample, HeadFix, HeadObservation, Placement,
};
use crate::config::{Config, Stage};
use crate::evaluate::{evaluate, focus_point, EvalInput, Evaluation};
use crate::output::{num, RunDir};
use crate::plot::{confusion_svg, pr_svg, scanpath_svg};
use crate::split::{stratified_folds, stratified_split, Split};
use crate::CliError;

pub const PROFILES_FILE: &str = "profiles.jsonl";

/// Scenes with their rendered rasters, looked up by id.
pub struct SceneBank {
    pub scenes: Vec<Scene>,
    pub rasters: Vec<Raster>,
    index: HashMap<String, usize>,
}

impl SceneBank {
    pub fn new(scenes: Vec<Scene>) -> Self {
        let rasters = scenes.iter().map(render_scene).collect();
        let index = scenes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Self {
            scenes,
            rasters,
            index,
        }
    }

    pub fn get(&self, id: &str) -> anyhow::Result<(&Scene, &Raster)> {
        let i = *self
            .index
            .get(id)
            .with_context(|| format!("unknown scene `{id}`"))?;
        Ok((&self.scenes[i], &self.rasters[i]))
    }
}

/// Scenes and scanpaths stored under `dir` in the dataset layout.
pub fn load_data(dir: &Path) -> anyhow::Result<(Vec<Scene>, Vec<Scanpath>)> {
    let scenes: Vec<Scene> = read_records(&dir.join(SCENE_FILE))?;
    let scans: Vec<Scanpath> = read_records(&dir.join(SCANPATH_FILE))?;
    if scans.is_empty() {
        return Err(CliError::Input(format!("{} holds no scanpaths", dir.display())).into());
    }
    Ok((scenes, scans))
}

/// SIO sequences of `scans`; episodes where no fixation lands on an object
/// are skipped. Returns the sequences and the indices they came from.
pub fn sequences(
    bank: &SceneBank,
    scans: &[Scanpath],
    patch: usize,
) -> anyhow::Result<(Vec<SioSequence>, Vec<usize>)> {
    let mut seqs = Vec::new();
    let mut kept = Vec::new();
    for (i, s) in scans.iter().enumerate() {
        let (scene, raster) = bank.get(&s.scene_id)?;
        match build_sio(scene, raster, s, patch) {
            Ok(seq) => {
                seqs.push(seq);
                kept.push(i);
            }
            Err(SioError::Empty(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok((seqs, kept))
}

pub fn labels(seqs: &[SioSequence]) -> anyhow::Result<Vec<EmotionLabel>> {
    seqs.iter()
        .map(|s| {
            s.emotion
                .with_context(|| format!("sequence on {} has no label", s.scene_id))
        })
        .collect()
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

/// Trains on `split.train` and writes the checkpoint and per-epoch log.
pub fn train_split(
    out: &RunDir,
    seqs: &[SioSequence],
    split: &Split,
    cfg: &TrainConfig,
) -> anyhow::Result<ModelState> {
    let outcome = train(&pick(seqs, &split.train), cfg)?;
    out.write_jsonl("model/train_log.jsonl", &outcome.log)?;
    outcome.state.save(&out.path("model/model.json"))?;
    Ok(outcome.state)
}

/// Evaluates `state` on the sequences at `idx`.
pub fn evaluate_indices(
    state: &ModelState,
    bank: &SceneBank,
    seqs: &[SioSequence],
    scans: &[Scanpath],
    idx: &[usize],
    cfg: &Config,
) -> anyhow::Result<Evaluation> {
    let mut inputs = Vec::with_capacity(idx.len());
    for &i in idx {
        let (scene, raster) = bank.get(&seqs[i].scene_id)?;
        inputs.push(EvalInput {
            seq: &seqs[i],
            gaze: focus_point(&scans[i]),
            scene,
            raster,
        });
    }
    evaluate(state, &inputs, &cfg.fcc, cfg.eval.variant)
}

/// Confusion and precision-recall plots of an evaluation.
pub fn write_eval_plots(out: &RunDir, ev: &Evaluation) -> anyhow::Result<()> {
    out.write_text(
        "plots/confusion.svg",
        &confusion_svg(&ev.report.confusion_norm),
    )?;
    out.write_text("plots/pr.svg", &pr_svg(&ev.curves)?)?;
    Ok(())
}

/// Improvement `1 - post / pre` of one calibrated subject.
pub fn improvement(r: &CalibrationReport) -> f64 {
    1.0 - r.post_median_deg / r.pre_median_deg
}

/// Median improvement over biased subjects, or over everyone when no
/// subject is biased.
pub fn cohort_improvement(profiles: &[SubjectProfile], reports: &[CalibrationReport]) -> f64 {
    let biased: Vec<f64> = profiles
        .iter()
        .zip(reports)
        .filter(|(p, _)| !p.tags.iter().any(|t| t == "identity"))
        .map(|(_, r)| improvement(r))
        .collect();
    if biased.is_empty() {
        median(reports.iter().map(improvement).collect())
    } else {
        median(biased)
    }
}

/// Runs one calibration session per profile and writes the reports.
pub fn calibrate_cohort(
    out: &RunDir,
    prefix: &str,
    scenes: &[Scene],
    profiles: &[SubjectProfile],
    cfg: &Config,
    seed: u64,
) -> anyhow::Result<(Vec<StudentModel>, Vec<CalibrationReport>)> {
    let mut students = Vec::with_capacity(profiles.len());
    let mut reports = Vec::with_capacity(profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        let (m, r) = calibrate_session(scenes, p, &cfg.calibration.session, seed, i as u64)
            .with_context(|| format!("calibrating {}", p.id))?;
        students.push(m);
        reports.push(r);
    }
    let mut table =
        String::from("subject,kind,bias_deg,pre_median_deg,post_median_deg,improvement,n_pairs\n");
    for (p, r) in profiles.iter().zip(&reports) {
        let bias = (p.b[0].powi(2) + p.b[1].powi(2)).sqrt().to_degrees();
        table.push_str(&format!(
            "{},{:?},{bias},{},{},{},{}\n",
            p.id,
            r.kind,
            r.pre_median_deg,
            r.post_median_deg,
            improvement(r),
            r.n_pairs
        ));
    }
    out.write_jsonl(&format!("{prefix}/{PROFILES_FILE}"), profiles)?;
    out.write_jsonl(&format!("{prefix}/reports.jsonl"), &reports)?;
    out.write_text(&format!("{prefix}/summary.csv"), &table)?;
    Ok((students, reports))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub scenes: usize,
    pub episodes: usize,
    pub cameras: usize,
    pub coverage_errors: Option<usize>,
    /// Median head position error over all episodes, fallbacks included.
    pub tri_median_error_m: Option<f64>,
    /// Median over episodes with at least two views.
    pub tri_median_error_covered_m: Option<f64>,
    pub gaze_samples: Option<usize>,
    /// Samples whose gaze fell outside the headset viewport.
    pub dropped_samples: Option<usize>,
    pub fixations: Option<usize>,
    /// Fixations without a single kept sample.
    pub missed_fixations: Option<usize>,
    pub calibration_improvement: Option<f64>,
    /// Fraction of fixations whose recovered point lies in the target box.
    pub gaze_accuracy: Option<f64>,
    /// The same without the calibrated correction.
    pub gaze_accuracy_raw: Option<f64>,
    pub sio_episodes: Option<usize>,
    pub empty_episodes: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub final_train_accuracy: Option<f64>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub cawf1: Option<f64>,
    pub fcc_mean: Option<f64>,
    pub fold_accuracy_mean: Option<f64>,
}

fn stage<T>(name: Stage, r: anyhow::Result<T>) -> anyhow::Result<T> {
    r.map_err(|source| {
        CliError::Stage {
            stage: name.name(),
            source,
        }
        .into()
    })
}

fn xyz(p: [f64; 3]) -> String {
    format!("{},{},{}", p[0], p[1], p[2])
}

/// Executes the configured stages into `out` and writes the manifest.
pub fn run_pipeline(
    cfg: &Config,
    seed: u64,
    out: &Path,
    workers: usize,
) -> anyhow::Result<PipelineSummary> {
    let out = RunDir::create(out)?;
    let spec = &cfg.pipeline;
    let mut sum = PipelineSummary {
        seed,
        stages: spec.stages.clone(),
        cameras: cfg.rig.cameras,
        ..Default::default()
    };

    let profiles = cohort(seed, cfg.dataset.n_subjects, &cfg.calibration);
    let data = stage(
        Stage::Dataset,
        (|| {
            let policies = cfg.policies()?;
            let data = gen_dataset(seed, &cfg.dataset, &policies, workers)?;
            out.write_jsonl(&format!("dataset/{SCENE_FILE}"), &data.scenes)?;
            out.write_jsonl(&format!("dataset/{SCANPATH_FILE}"), &data.scanpaths)?;
            out.write_jsonl(&format!("dataset/{PROFILES_FILE}"), &profiles)?;
            Ok(data)
        })(),
    )?;
    sum.scenes = data.scenes.len();
    sum.episodes = data.scanpaths.len();
    let scans = &data.scanpaths;
    if !spec.runs(Stage::Rig) {
        return finish(&out, cfg, seed, sum);
    }

    let rig = stage(
        Stage::Rig,
        (|| {
            let rig = crate::acquisition::build_rig(&cfg.rig)?;
            out.write_text("rig/rig.txt", &rig_to_text(&rig))?;
            Ok(rig)
        })(),
    )?;
    if !spec.runs(Stage::Observe) {
        return finish(&out, cfg, seed, sum);
    }

    let observed: Vec<(Placement, HeadObservation)> = stage(
        Stage::Observe,
        (|| {
            let mut rows = String::from("episode,head_x,head_y,head_z,facing,visible,observed\n");
            let mut v = Vec::with_capacity(scans.len());
            for (k, s) in scans.iter().enumerate() {
                let at = place_subject(seed, k, &cfg.rig, s);
                let obs = observe_head(&rig, &cfg.rig, &at, seed, k)?;
                rows.push_str(&format!(
                    "{k},{},{},{},{}\n",
                    xyz(at.head),
                    at.facing,
                    obs.visible.len(),
                    obs.views.as_ref().map_or(0, |v| v.len())
                ));
                v.push((at, obs));
            }
            out.write_text("rig/observations.csv", &rows)?;
            Ok(v)
        })(),
    )?;
    if !spec.runs(Stage::Triangulate) {
        return finish(&out, cfg, seed, sum);
    }

    let fixes: Vec<HeadFix> = stage(
        Stage::Triangulate,
        (|| {
            let c = scene_centre(&cfg.rig);
            let fallback = [
                c[0],
                c[1],
                0.5 * (cfg.rig.head_height_min + cfg.rig.head_height_max),
            ];
            let mut rows = String::from(
                "episode,true_x,true_y,true_z,est_x,est_y,est_z,cameras,covered,error_m\n",
            );
            let mut v = Vec::with_capacity(observed.len());
            for (k, (at, obs)) in observed.iter().enumerate() {
                let f = triangulate_head(&rig, obs, at.head, fallback);
                rows.push_str(&format!(
                    "{k},{},{},{},{},{}\n",
                    xyz(f.truth),
                    xyz(f.estimate),
                    f.cameras.len(),
                    f.covered,
                    f.error_m
                ));
                v.push(f);
            }
            out.write_text("rig/triangulation.csv", &rows)?;
            Ok(v)
        })(),
    )?;
    sum.coverage_errors = Some(fixes.iter().filter(|f| !f.covered).count());
    sum.tri_median_error_m = Some(median(fixes.iter().map(|f| f.error_m).collect()));
    let covered: Vec<f64> = fixes
        .iter()
        .filter(|f| f.covered)
        .map(|f| f.error_m)
        .collect();
    sum.tri_median_error_covered_m = (!covered.is_empty()).then(|| median(covered));
    if !spec.runs(Stage::Project) {
        return finish(&out, cfg, seed, sum);
    }

    let subject_index: HashMap<&str, usize> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let profile_of = |s: &Scanpath| -> anyhow::Result<usize> {
        subject_index
            .get(s.subject_id.as_str())
            .copied()
            .with_context(|| format!("no profile for subject `{}`", s.subject_id))
    };
    let centre = scene_centre(&cfg.rig);
    let samples: Vec<Vec<GazeSample>> = stage(
        Stage::Project,
        (|| {
            let mut rows = String::from("episode,tick,fixation,head_lon,head_lat,row,col\n");
            let mut v = Vec::with_capacity(scans.len());
            for (k, s) in scans.iter().enumerate() {
                let p = &profiles[profile_of(s)?];
                let g = project_episode(s, p, fixes[k].truth, &cfg.projection, centre, seed, k)?;
                for x in &g {
                    let (r, c) = x.pixel.map_or((String::new(), String::new()), |(r, c)| {
                        (r.to_string(), c.to_string())
                    });
                    rows.push_str(&format!(
                        "{k},{},{},{},{},{r},{c}\n",
                        x.tick,
                        x.fixation,
                        x.head.lon(),
                        x.head.lat()
                    ));
                }
                v.push(g);
            }
            out.write_text("fov/samples.csv", &rows)?;
            Ok(v)
        })(),
    )?;
    sum.gaze_samples = Some(samples.iter().map(Vec::len).sum());
    sum.dropped_samples = Some(
        samples
            .iter()
            .flatten()
            .filter(|s| s.observed.is_none())
            .count(),
    );
    if !spec.runs(Stage::Calibrate) {
        return finish(&out, cfg, seed, sum);
    }

    let (students, reports) = stage(Stage::Calibrate, {
        let n = cfg.calibration.scenes.min(data.scenes.len());
        calibrate_cohort(&out, "calibration", &data.scenes[..n], &profiles, cfg, seed)
    })?;
    sum.calibration_improvement = Some(cohort_improvement(&profiles, &reports));
    if !spec.runs(Stage::Sio) {
        return finish(&out, cfg, seed, sum);
    }

    let bank = SceneBank::new(data.scenes.clone());
    let (collected, seqs, seq_scans) = stage(
        Stage::Sio,
        (|| {
            let radius = cfg.projection.scene_radius;
            let mut rows = String::from("episode,fixation,target,samples,hit,hit_raw\n");
            let (mut hits, mut hits_raw, mut total, mut missed) = (0usize, 0usize, 0usize, 0usize);
            let mut collected = Vec::new();
            for (k, s) in scans.iter().enumerate() {
                let student = &students[profile_of(s)?];
                let est = fixes[k].estimate;
                let fixed = recover_fixations(s, &samples[k], Some(student), est, centre, radius);
                let raw = recover_fixations(s, &samples[k], None, est, centre, radius);
                let (scene, _) = bank.get(&s.scene_id)?;
                let mut kept = Vec::new();
                for (i, f) in s.fixations.iter().enumerate() {
                    let n = samples[k]
                        .iter()
                        .filter(|x| x.fixation == i && x.observed.is_some())
                        .count();
                    let target = f.target.and_then(|t| scene.object(t)).map(|o| o.bbox);
                    let hit = |p: &Option<_>| match (p, target) {
                        (Some(p), Some(b)) => gaze_accuracy(p, &[b]),
                        _ => false,
                    };
                    let (h, hr) = (hit(&fixed[i]), hit(&raw[i]));
                    total += 1;
                    hits += h as usize;
                    hits_raw += hr as usize;
                    missed += fixed[i].is_none() as usize;
                    rows.push_str(&format!(
                        "{k},{i},{},{n},{h},{hr}\n",
                        f.target.map(|t| t.to_string()).unwrap_or_default()
                    ));
                    if let Some(point) = fixed[i] {
                        kept.push(Fixation { point, ..*f });
                    }
                }
                if !kept.is_empty() {
                    collected.push((
                        k,
                        Scanpath {
                            fixations: kept,
                            ..s.clone()
                        },
                    ));
                }
            }
            let recovered: Vec<Scanpath> = collected.iter().map(|(_, s)| s.clone()).collect();
            out.write_jsonl("collection/scanpaths.jsonl", &recovered)?;
            out.write_text("collection/fixations.csv", &rows)?;
            let (seqs, kept) = sequences(&bank, &recovered, cfg.train.model.patch_size)?;
            let records: Vec<_> = seqs.iter().map(|s| s.to_record()).collect();
            out.write_jsonl("sio/records.jsonl", &records)?;
            let seq_scans: Vec<Scanpath> = kept.iter().map(|&i| recovered[i].clone()).collect();
            Ok((
                (hits, hits_raw, total, missed, scans.len() - seqs.len()),
                seqs,
                seq_scans,
            ))
        })(),
    )?;
    let (hits, hits_raw, total, missed, empty) = collected;
    sum.fixations = Some(total);
    sum.missed_fixations = Some(missed);
    sum.gaze_accuracy = Some(hits as f64 / total.max(1) as f64);
    sum.gaze_accuracy_raw = Some(hits_raw as f64 / total.max(1) as f64);
    sum.sio_episodes = Some(seqs.len());
    sum.empty_episodes = Some(empty);
    if !spec.runs(Stage::Train) {
        return finish(&out, cfg, seed, sum);
    }

    let (split, state) = stage(
        Stage::Train,
        (|| {
            let labels = labels(&seqs)?;
            let split = stratified_split(&labels, cfg.split.train_fraction, seed);
            out.write_json("split.json", &split)?;
            let state = train_split(&out, &seqs, &split, &cfg.train)?;
            Ok((split, state))
        })(),
    )?;
    sum.n_train = Some(split.train.len());
    sum.n_test = Some(split.test.len());
    let log: Vec<gazeforge_model::EpochLog> =
        crate::output::read_jsonl(&out.path("model/train_log.jsonl"))?;
    sum.final_train_accuracy = log.last().map(|l| l.train_accuracy);
    if !spec.runs(Stage::Eval) {
        return finish(&out, cfg, seed, sum);
    }

    stage(
        Stage::Eval,
        (|| {
            let ev = evaluate_indices(&state, &bank, &seqs, &seq_scans, &split.test, cfg)?;
            let extra = [
                ("gaze_accuracy", sum.gaze_accuracy.unwrap_or(f64::NAN)),
                (
                    "gaze_accuracy_raw",
                    sum.gaze_accuracy_raw.unwrap_or(f64::NAN),
                ),
            ];
            ev.write(&out, "metrics", &extra)?;
            write_eval_plots(&out, &ev)?;
            let first = split.test[0];
            let (scene, _) = bank.get(&seq_scans[first].scene_id)?;
            out.write_text(
                "plots/scanpath.svg",
                &scanpath_svg(scene, &seq_scans[first])?,
            )?;
            sum.accuracy = Some(ev.report.accuracy);
            sum.macro_f1 = Some(ev.report.macro_f1);
            sum.cawf1 = Some(ev.cawf1);
            sum.fcc_mean = Some(ev.fcc_mean);
            if cfg.split.folds >= 2 {
                let labels = labels(&seqs)?;
                let mut rows = String::from("fold,n_train,n_test,accuracy,macro_f1,cawf1\n");
                let mut accs = Vec::new();
                for (f, sp) in stratified_folds(&labels, cfg.split.folds, seed)
                    .iter()
                    .enumerate()
                {
                    let fold_dir = RunDir::create(&out.path(&format!("folds/fold-{f}")))?;
                    let st = train_split(&fold_dir, &seqs, sp, &cfg.train)?;
                    let ev = evaluate_indices(&st, &bank, &seqs, &seq_scans, &sp.test, cfg)?;
                    rows.push_str(&format!(
                        "{f},{},{},{},{},{}\n",
                        sp.train.len(),
                        sp.test.len(),
                        ev.report.accuracy,
                        ev.report.macro_f1,
                        ev.cawf1
                    ));
                    accs.push(ev.report.accuracy);
                }
                out.write_text("metrics/folds.csv", &rows)?;
                sum.fold_accuracy_mean = Some(accs.iter().sum::<f64>() / accs.len() as f64);
            }
            Ok(())
        })(),
    )?;
    finish(&out, cfg, seed, sum)
}

fn finish(
    out: &RunDir,
    cfg: &Config,
    seed: u64,
    sum: PipelineSummary,
) -> anyhow::Result<PipelineSummary> {
    out.write_json("summary.json", &sum)?;
    out.finish(cfg, seed)?;
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    CameraCount,
    ProjectionInterval,
    FovDeg,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::CameraCount => "camera_count",
            Axis::ProjectionInterval => "projection_interval",
            Axis::FovDeg => "fov_deg",
        }
    }

    /// `cfg` with the axis set to `value`, validated.
    pub fn apply(self, cfg: &Config, value: &str) -> Result<Config, CliError> {
        let bad = |why: String| {
            CliError::Input(format!("invalid {} value `{value}`: {why}", self.name()))
        };
        let mut c = cfg.clone();
        match self {
            Axis::CameraCount => {
                let n: usize = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
                if n < 2 {
                    return Err(bad("a rig needs at least 2 cameras".into()));
                }
                c.rig.cameras = n;
            }
            Axis::ProjectionInterval => {
                c.projection.interval_s = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
            }
            Axis::FovDeg => {
                c.projection.fov_deg = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
            }
        }
        c.validate().map_err(|e| bad(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: Axis,
    pub value: String,
    pub summary: PipelineSummary,
}

/// One pipeline run per value under `out/<axis>-<value>/`, all with `seed`,
/// plus a merged `ablation.csv`.
pub fn ablation_sweep(
    cfg: &Config,
    axis: Axis,
    values: &[String],
    seed: u64,
    out: &Path,
    workers: usize,
) -> anyhow::Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(CliError::Input("no axis values given".into()).into());
    }
    let configs = values
        .iter()
        .map(|v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = RunDir::create(out)?;
    let mut rows = Vec::new();
    let mut table = String::from(
        "axis,value,accuracy,macro_f1,cawf1,gaze_accuracy,gaze_accuracy_raw,tri_median_error_m,tri_median_error_covered_m,coverage_errors,missed_fixations,dropped_samples,calibration_improvement\n",
    );
    for (v, c) in values.iter().zip(&configs) {
        let name = format!("{}-{}", axis.name(), v.trim());
        let s = run_pipeline(c, seed, &dir.path(&name), workers)
            .with_context(|| format!("ablation run {name}"))?;
        let count = |x: Option<usize>| x.map(|n| n.to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            axis.name(),
            v.trim(),
            num(s.accuracy),
            num(s.macro_f1),
            num(s.cawf1),
            num(s.gaze_accuracy),
            num(s.gaze_accuracy_raw),
            num(s.tri_median_error_m),
            num(s.tri_median_error_covered_m),
            count(s.coverage_errors),
            count(s.missed_fixations),
            count(s.dropped_samples),
            num(s.calibration_improvement)
        ));
        rows.push(AblationRow {
            axis,
            value: v.trim().to_string(),
            summary: s,
        });
    }
    dir.write_text("ablation.csv", &table)?;
    dir.finish(cfg, seed)?;
    Ok(rows)
}

/// Summary of the run for `value`.
pub fn row<'a>(rows: &'a [AblationRow], value: &str) -> Option<&'a PipelineSummary> {
    rows.iter().find(|r| r.value == value).map(|r| &r.summary)
}
