//! Output directories: text and record files, the manifest, and the
//! directory digest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gazeforge_core::domain::{digest_bytes, write_records, RunManifest, MANIFEST_FILE};
use serde::de::DeserializeOwned;
use serde::Serialize;
use walkdir::WalkDir;

use crate::Config;

pub const CONFIG_FILE: &str = "config.toml";

/// An output directory under construction.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write_text(&self, rel: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    pub fn write_jsonl<T: Serialize>(&self, rel: &str, records: &[T]) -> anyhow::Result<()> {
        Ok(write_records(&self.path(rel), records)?)
    }

    /// Writes the effective config and a manifest covering every file.
    pub fn finish(&self, cfg: &Config, seed: u64) -> anyhow::Result<RunManifest> {
        self.write_text(CONFIG_FILE, &cfg.to_toml())?;
        let mut manifest = RunManifest::new(seed, cfg.digest());
        for rel in files(&self.root)? {
            manifest.record_file(&self.root, &rel)?;
        }
        manifest.save(&self.root)?;
        Ok(manifest)
    }
}

/// Relative paths of every file under `root` except manifests, sorted.
pub fn files(root: &Path) -> anyhow::Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)?
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        // nested run directories carry their own timestamped manifests
        if entry.file_name() != MANIFEST_FILE {
            out.push(rel);
        }
    }
    Ok(out)
}

/// Digest of a run directory: every file's content keyed by its relative
/// path, plus the manifest without its timestamp.
pub fn run_digest(root: &Path) -> anyhow::Result<String> {
    let mut acc = String::new();
    for rel in files(root)? {
        let bytes = fs::read(root.join(&rel))?;
        acc.push_str(&rel);
        acc.push(' ');
        acc.push_str(&digest_bytes(&bytes));
        acc.push('\n');
    }
    if root.join(MANIFEST_FILE).exists() {
        acc.push_str(&RunManifest::load(root)?.stable_digest());
    }
    Ok(digest_bytes(acc.as_bytes()))
}

/// Reads a JSON-lines file without schema validation.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Shortest round-trip rendering, empty for missing values.
pub fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
