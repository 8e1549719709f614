//! Line-delimited JSON records and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DomainError, Scanpath, Scene, Validate};

pub const SCENE_FILE: &str = "scenes/records.jsonl";
pub const SCANPATH_FILE: &str = "scanpaths/records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path, source: std::io::Error) -> DomainError {
    DomainError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes one JSON record per line, creating parent directories.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DomainError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record types serialize");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads and validates every line of a record file. Blank lines are skipped.
pub fn read_records<T: DeserializeOwned + Validate>(path: &Path) -> Result<Vec<T>, DomainError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| DomainError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let rec: T = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        rec.validate().map_err(|e| parse(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String, DomainError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(digest_bytes(&bytes))
}

/// Provenance written next to every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; excluded from [`RunManifest::stable_digest`].
    pub created_unix: u64,
    /// Relative path to SHA-256 of each emitted file.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(seed: u64, config_digest: impl Into<String>) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            seed,
            config_digest: config_digest.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            files: BTreeMap::new(),
        }
    }

    /// Records the digest of `dir/rel`.
    pub fn record_file(&mut self, dir: &Path, rel: &str) -> Result<(), DomainError> {
        let d = digest_file(&dir.join(rel))?;
        self.files.insert(rel.to_string(), d);
        Ok(())
    }

    /// Digest over everything except the timestamp.
    pub fn stable_digest(&self) -> String {
        let mut copy = self.clone();
        copy.created_unix = 0;
        digest_bytes(
            serde_json::to_string(&copy)
                .expect("manifest serializes")
                .as_bytes(),
        )
    }

    pub fn save(&self, dir: &Path) -> Result<(), DomainError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self, DomainError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| DomainError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Scenes and scanpaths stored together under one directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub scanpaths: Vec<Scanpath>,
}

/// Writes `scenes/`, `scanpaths/` and the manifest (with file digests) to `dir`.
pub fn save_dataset(
    dir: &Path,
    data: &Dataset,
    manifest: &mut RunManifest,
) -> Result<(), DomainError> {
    for s in &data.scenes {
        s.validate()?;
    }
    for s in &data.scanpaths {
        s.validate()?;
    }
    write_records(&dir.join(SCENE_FILE), &data.scenes)?;
    write_records(&dir.join(SCANPATH_FILE), &data.scanpaths)?;
    manifest.record_file(dir, SCENE_FILE)?;
    manifest.record_file(dir, SCANPATH_FILE)?;
    manifest.save(dir)
}

/// Loads a directory written by [`save_dataset`]; either record file may be absent.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, RunManifest), DomainError> {
    let manifest = RunManifest::load(dir)?;
    let scenes_path = dir.join(SCENE_FILE);
    let scanpaths_path = dir.join(SCANPATH_FILE);
    let scenes = if scenes_path.exists() {
        read_records(&scenes_path)?
    } else {
        Vec::new()
    };
    let scanpaths = if scanpaths_path.exists() {
        read_records(&scanpaths_path)?
    } else {
        Vec::new()
    };
    Ok((Dataset { scenes, scanpaths }, manifest))
}
