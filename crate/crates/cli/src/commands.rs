//! Subcommands. Each writes its outputs, the effective `config.toml` and a
//! manifest into `--out`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use gazeforge_core::calib::CalibrationReport;
use gazeforge_core::domain::{EmotionLabel, Scene, NUM_EMOTIONS, SCANPATH_FILE, SCENE_FILE};
use gazeforge_core::simscene::{dataset_scene, gen_dataset, SubjectProfile};
use gazeforge_model::ModelState;
use serde::{Deserialize, Serialize};

use crate::acquisition::cohort;
use crate::evaluate::Evaluation;
use crate::output::{read_json, read_jsonl, RunDir};
use crate::pipeline::{
    ablation_sweep, calibrate_cohort, cohort_improvement, evaluate_indices, labels, load_data,
    run_pipeline, sequences, train_split, write_eval_plots, AblationRow, Axis, PipelineSummary,
    SceneBank, PROFILES_FILE,
};
use crate::plot::{confusion_svg, pr_svg, scanpath_svg};
use crate::split::{stratified_split, Split};
use crate::{CliError, Config};

#[derive(Debug, Parser)]
#[command(
    name = "gazeforge",
    version,
    about = "Synthetic gaze capture, calibration and emotion classification"
)]
pub struct Cli {
    /// Run seed; falls back to GAZEFORGE_SEED, then 0.
    #[arg(long, global = true, env = "GAZEFORGE_SEED")]
    pub seed: Option<u64>,
    /// TOML config layered over the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Dotted override, e.g. `--set train.epochs=20`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Threads for episode generation; never changes the outputs.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenes.
    Scene {
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Generate scenes plus a balanced set of labelled scanpaths.
    Scanpaths {
        #[arg(long)]
        per_class: usize,
        /// Emotion policy table replacing the configured one.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Calibrate every subject of the cohort and report held-out errors.
    Calibrate {
        /// Dataset directory holding scenes and subject profiles.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fail with exit code 2 when the median improvement is lower.
        #[arg(long)]
        min_improvement: Option<f64>,
    },
    /// Train on the stratified training part of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate a trained model on the held-out part of its split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Output directory of `train`.
        #[arg(long)]
        model_dir: PathBuf,
        /// Fail with exit code 2 when held-out accuracy is lower.
        #[arg(long)]
        min_accuracy: Option<f64>,
    },
    /// Draw an episode's scanpath and, given metrics, the confusion and PR plots.
    Plot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        episode: usize,
        /// Output directory of `eval`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run the configured pipeline stages end to end.
    Pipeline {
        /// Pipeline spec; same format as `--config`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Sweep one axis with one pipeline run per value.
    Ablate {
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

/// Resolved options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub seed: u64,
    pub cfg: Config,
    pub out: PathBuf,
    pub workers: usize,
}

impl Ctx {
    /// Loads the config, with `seed` replacing the training seed.
    pub fn new(
        seed: u64,
        config: Option<&Path>,
        sets: &[String],
        out: &Path,
    ) -> anyhow::Result<Self> {
        let mut cfg = Config::load(config, sets)?;
        cfg.train.seed = seed;
        Ok(Self {
            seed,
            cfg,
            out: out.to_path_buf(),
            workers: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub scenes: usize,
    pub per_class: [usize; NUM_EMOTIONS],
}

pub fn cmd_scene(ctx: &Ctx, n: usize) -> anyhow::Result<ClassCounts> {
    if n == 0 {
        return Err(CliError::Input("--n must be positive".into()).into());
    }
    let out = RunDir::create(&ctx.out)?;
    let scenes = (0..n)
        .map(|i| dataset_scene(ctx.seed, &ctx.cfg.dataset, i))
        .collect::<Result<Vec<_>, _>>()?;
    out.write_jsonl(SCENE_FILE, &scenes)?;
    out.finish(&ctx.cfg, ctx.seed)?;
    Ok(ClassCounts {
        scenes: n,
        per_class: [0; NUM_EMOTIONS],
    })
}

pub fn cmd_scanpaths(
    ctx: &Ctx,
    per_class: usize,
    policy: Option<&Path>,
) -> anyhow::Result<ClassCounts> {
    if per_class == 0 {
        return Err(CliError::Input("--per-class must be positive".into()).into());
    }
    let mut cfg = ctx.cfg.clone();
    cfg.dataset.episodes_per_emotion = per_class;
    if let Some(p) = policy {
        cfg.policy = p.display().to_string();
    }
    let policies = cfg.policies()?;
    let data = gen_dataset(ctx.seed, &cfg.dataset, &policies, ctx.workers)?;
    let out = RunDir::create(&ctx.out)?;
    out.write_jsonl(SCENE_FILE, &data.scenes)?;
    out.write_jsonl(SCANPATH_FILE, &data.scanpaths)?;
    let profiles = cohort(ctx.seed, cfg.dataset.n_subjects, &cfg.calibration);
    out.write_jsonl(PROFILES_FILE, &profiles)?;
    out.finish(&cfg, ctx.seed)?;
    let mut counts = [0; NUM_EMOTIONS];
    for s in &data.scanpaths {
        counts[s.emotion.ordinal()] += 1;
    }
    Ok(ClassCounts {
        scenes: data.scenes.len(),
        per_class: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub profiles: Vec<SubjectProfile>,
    pub reports: Vec<CalibrationReport>,
    pub median_improvement: f64,
}

pub fn cmd_calibrate(
    ctx: &Ctx,
    data: Option<&Path>,
    min_improvement: Option<f64>,
) -> anyhow::Result<CalibrationSummary> {
    let cfg = &ctx.cfg;
    let (scenes, profiles): (Vec<Scene>, Vec<SubjectProfile>) = match data {
        Some(dir) => {
            let scenes: Vec<Scene> = gazeforge_core::domain::read_records(&dir.join(SCENE_FILE))?;
            let path = dir.join(PROFILES_FILE);
            if !path.exists() {
                return Err(CliError::Input(format!(
                    "missing bias ground truth: {} not found",
                    path.display()
                ))
                .into());
            }
            let profiles: Vec<SubjectProfile> = read_jsonl(&path)?;
            let n = cfg.calibration.scenes.min(scenes.len());
            (scenes[..n].to_vec(), profiles)
        }
        None => {
            let scenes = (0..cfg.calibration.scenes)
                .map(|i| dataset_scene(ctx.seed, &cfg.dataset, i))
                .collect::<Result<Vec<_>, _>>()?;
            (
                scenes,
                cohort(ctx.seed, cfg.dataset.n_subjects, &cfg.calibration),
            )
        }
    };
    if scenes.is_empty() || profiles.is_empty() {
        return Err(CliError::Input("calibration needs scenes and subjects".into()).into());
    }
    for p in &profiles {
        p.validate()?;
    }
    let out = RunDir::create(&ctx.out)?;
    let (_, reports) = calibrate_cohort(&out, "calibration", &scenes, &profiles, cfg, ctx.seed)?;
    let median_improvement = cohort_improvement(&profiles, &reports);
    out.finish(cfg, ctx.seed)?;
    let summary = CalibrationSummary {
        profiles,
        reports,
        median_improvement,
    };
    if let Some(min) = min_improvement {
        if !(median_improvement >= min) {
            return Err(CliError::Threshold {
                what: "median calibration improvement".into(),
                value: median_improvement,
                required: min,
            }
            .into());
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub n_test: usize,
    /// Episodes without a single fixation on an object.
    pub skipped: usize,
    pub epochs: usize,
    pub final_train_accuracy: f64,
}

/// Which episodes of the dataset went where, by scanpath index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn cmd_train(ctx: &Ctx, data: &Path) -> anyhow::Result<TrainSummary> {
    let (scenes, scans) = load_data(data)?;
    let bank = SceneBank::new(scenes);
    let (seqs, kept) = sequences(&bank, &scans, ctx.cfg.train.model.patch_size)?;
    let split = stratified_split(&labels(&seqs)?, ctx.cfg.split.train_fraction, ctx.seed);
    let out = RunDir::create(&ctx.out)?;
    let by_scan = SplitFile {
        train: split.train.iter().map(|&i| kept[i]).collect(),
        test: split.test.iter().map(|&i| kept[i]).collect(),
    };
    out.write_json("split.json", &by_scan)?;
    let state = train_split(&out, &seqs, &split, &ctx.cfg.train)?;
    drop(state);
    let log: Vec<gazeforge_model::EpochLog> = read_jsonl(&out.path("model/train_log.jsonl"))?;
    out.finish(&ctx.cfg, ctx.seed)?;
    Ok(TrainSummary {
        n_train: split.train.len(),
        n_test: split.test.len(),
        skipped: scans.len() - seqs.len(),
        epochs: log.len(),
        final_train_accuracy: log.last().map_or(f64::NAN, |l| l.train_accuracy),
    })
}

pub fn cmd_eval(
    ctx: &Ctx,
    data: &Path,
    model_dir: &Path,
    min_accuracy: Option<f64>,
) -> anyhow::Result<Evaluation> {
    let state = ModelState::load(&model_dir.join("model/model.json"))?;
    let split: SplitFile = read_json(&model_dir.join("split.json"))?;
    let (scenes, scans) = load_data(data)?;
    if let Some(&bad) = split.test.iter().find(|&&i| i >= scans.len()) {
        return Err(CliError::Input(format!(
            "split refers to episode {bad}, dataset has {}",
            scans.len()
        ))
        .into());
    }
    let bank = SceneBank::new(scenes);
    let test_scans: Vec<_> = split.test.iter().map(|&i| scans[i].clone()).collect();
    let (seqs, kept) = sequences(&bank, &test_scans, state.model.patch_size)?;
    let kept_scans: Vec<_> = kept.iter().map(|&i| test_scans[i].clone()).collect();
    let idx: Vec<usize> = (0..seqs.len()).collect();
    let ev = evaluate_indices(&state, &bank, &seqs, &kept_scans, &idx, &ctx.cfg)?;
    let out = RunDir::create(&ctx.out)?;
    ev.write(&out, "metrics", &[])?;
    write_eval_plots(&out, &ev)?;
    out.finish(&ctx.cfg, ctx.seed)?;
    if let Some(min) = min_accuracy {
        if !(ev.report.accuracy >= min) {
            return Err(CliError::Threshold {
                what: "held-out accuracy".into(),
                value: ev.report.accuracy,
                required: min,
            }
            .into());
        }
    }
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub files: Vec<String>,
    pub fixations: usize,
}

pub fn cmd_plot(
    ctx: &Ctx,
    data: &Path,
    episode: usize,
    metrics: Option<&Path>,
) -> anyhow::Result<PlotSummary> {
    let (scenes, scans) = load_data(data)?;
    let scan = scans.get(episode).ok_or_else(|| {
        CliError::Input(format!(
            "episode {episode} out of range; dataset has {}",
            scans.len()
        ))
    })?;
    let scene = scenes
        .iter()
        .find(|s| s.id == scan.scene_id)
        .with_context(|| format!("scene `{}` missing from {}", scan.scene_id, data.display()))?;
    let out = RunDir::create(&ctx.out)?;
    let mut files = vec!["plots/scanpath.svg".to_string()];
    out.write_text(&files[0], &scanpath_svg(scene, scan)?)?;
    if let Some(dir) = metrics {
        let ev: Evaluation = read_json(&dir.join("metrics/summary.json"))?;
        out.write_text(
            "plots/confusion.svg",
            &confusion_svg(&ev.report.confusion_norm),
        )?;
        out.write_text("plots/pr.svg", &pr_svg(&ev.curves)?)?;
        files.push("plots/confusion.svg".into());
        files.push("plots/pr.svg".into());
    }
    out.finish(&ctx.cfg, ctx.seed)?;
    Ok(PlotSummary {
        files,
        fixations: scan.fixations.len(),
    })
}

pub fn cmd_pipeline(ctx: &Ctx, folds: Option<usize>) -> anyhow::Result<PipelineSummary> {
    let mut cfg = ctx.cfg.clone();
    if let Some(k) = folds {
        cfg.split.folds = k;
        cfg.validate()?;
    }
    run_pipeline(&cfg, ctx.seed, &ctx.out, ctx.workers)
}

pub fn cmd_ablate(ctx: &Ctx, axis: Axis, values: &[String]) -> anyhow::Result<Vec<AblationRow>> {
    ablation_sweep(&ctx.cfg, axis, values, ctx.seed, &ctx.out, ctx.workers)
}

fn class_line(counts: &[usize; NUM_EMOTIONS]) -> String {
    EmotionLabel::ALL
        .iter()
        .zip(counts)
        .map(|(e, c)| format!("{e}={c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

/// Parses nothing; runs `cli` and returns the text to print.
pub fn run(cli: Cli) -> anyhow::Result<String> {
    let seed = cli.seed.unwrap_or(0);
    let config = match &cli.command {
        Command::Pipeline { spec: Some(s), .. } | Command::Ablate { spec: Some(s), .. } => {
            if cli.config.is_some() {
                return Err(CliError::Input("give either --config or --spec".into()).into());
            }
            Some(s.clone())
        }
        _ => cli.config.clone(),
    };
    let mut ctx = Ctx::new(seed, config.as_deref(), &cli.sets, &cli.out)?;
    ctx.workers = cli.workers.max(1);
    let text = match &cli.command {
        Command::Scene { n } => {
            let c = cmd_scene(&ctx, *n)?;
            format!("scenes={} seed={seed}", c.scenes)
        }
        Command::Scanpaths { per_class, policy } => {
            let c = cmd_scanpaths(&ctx, *per_class, policy.as_deref())?;
            format!(
                "scenes={} episodes={} {}",
                c.scenes,
                c.per_class.iter().sum::<usize>(),
                class_line(&c.per_class)
            )
        }
        Command::Calibrate {
            data,
            min_improvement,
        } => {
            let s = cmd_calibrate(&ctx, data.as_deref(), *min_improvement)?;
            let mut t = String::from("subject kind pre_deg post_deg improvement\n");
            for (p, r) in s.profiles.iter().zip(&s.reports) {
                t.push_str(&format!(
                    "{} {:?} {:.3} {:.3} {:.3}\n",
                    p.id,
                    r.kind,
                    r.pre_median_deg,
                    r.post_median_deg,
                    crate::pipeline::improvement(r)
                ));
            }
            t.push_str(&format!("median_improvement={:.4}", s.median_improvement));
            t
        }
        Command::Train { data } => {
            let s = cmd_train(&ctx, data)?;
            format!(
                "train={} test={} skipped={} epochs={} train_accuracy={:.4}",
                s.n_train, s.n_test, s.skipped, s.epochs, s.final_train_accuracy
            )
        }
        Command::Eval {
            data,
            model_dir,
            min_accuracy,
        } => {
            let e = cmd_eval(&ctx, data, model_dir, *min_accuracy)?;
            format!(
                "n={} accuracy={:.4} macro_f1={:.4} cawf1={:.4} fcc_mean={:.4}",
                e.report.n, e.report.accuracy, e.report.macro_f1, e.cawf1, e.fcc_mean
            )
        }
        Command::Plot {
            data,
            episode,
            metrics,
        } => {
            let s = cmd_plot(&ctx, data, *episode, metrics.as_deref())?;
            s.files.join("\n")
        }
        Command::Pipeline { folds, .. } => {
            let s = cmd_pipeline(&ctx, *folds)?;
            format!(
                "episodes={} coverage_errors={} tri_median_error_m={} gaze_accuracy={} calibration_improvement={} accuracy={} macro_f1={} cawf1={}",
                s.episodes,
                s.coverage_errors.map_or("-".into(), |n| n.to_string()),
                opt(s.tri_median_error_m),
                opt(s.gaze_accuracy),
                opt(s.calibration_improvement),
                opt(s.accuracy),
                opt(s.macro_f1),
                opt(s.cawf1)
            )
        }
        Command::Ablate { axis, values, .. } => {
            let rows = cmd_ablate(&ctx, *axis, values)?;
            let mut t = String::from("value tri_median_error_m gaze_accuracy accuracy\n");
            for r in &rows {
                t.push_str(&format!(
                    "{} {} {} {}\n",
                    r.value,
                    opt(r.summary.tri_median_error_m),
                    opt(r.summary.gaze_accuracy),
                    opt(r.summary.accuracy)
                ));
            }
            t.trim_end().to_string()
        }
    };
    Ok(text)
}

/// Stratified split over raw labels, re-exported for callers holding only labels.
pub fn split_labels(labels: &[EmotionLabel], fraction: f64, seed: u64) -> Split {
    stratified_split(labels, fraction, seed)
}
