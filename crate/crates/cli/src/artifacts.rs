//! Stage directories, manifests and provenance checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use burnscope::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

/// Pipeline stages in execution order; each owns one output directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Phantom,
    Scan,
    Calibrate,
    Preprocess,
    Maps,
    Lsci,
    TrainCae,
    Cluster,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Phantom,
        Stage::Scan,
        Stage::Calibrate,
        Stage::Preprocess,
        Stage::Maps,
        Stage::Lsci,
        Stage::TrainCae,
        Stage::Cluster,
        Stage::Report,
    ];

    pub fn command(self) -> &'static str {
        match self {
            Stage::Phantom => "phantom",
            Stage::Scan => "scan",
            Stage::Calibrate => "calibrate",
            Stage::Preprocess => "preprocess",
            Stage::Maps => "maps",
            Stage::Lsci => "lsci",
            Stage::TrainCae => "train-cae",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        }
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::TrainCae => "cae",
            s => s.command(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    /// File name → SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| io_err(path, source))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| io_err(path, source))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Output tree of one configured run, with the provenance hash each stage
/// must carry.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    hashes: BTreeMap<Stage, String>,
}

impl Workspace {
    /// Every stage shares one hash.
    pub fn new(root: impl Into<PathBuf>, hash: impl Into<String>) -> Self {
        let hash = hash.into();
        Self {
            root: root.into(),
            hashes: Stage::ALL.iter().map(|&s| (s, hash.clone())).collect(),
        }
    }

    pub fn for_config(cfg: &PipelineConfig) -> Result<Self> {
        let hashes = Stage::ALL
            .iter()
            .map(|&s| Ok((s, cfg.stage_hash(s)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            root: cfg.out_dir.clone(),
            hashes,
        })
    }

    pub fn hash(&self, stage: Stage) -> &str {
        &self.hashes[&stage]
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir_name())
    }

    /// Path (or file stem) of an artifact inside a stage directory.
    pub fn path(&self, stage: Stage, name: &str) -> PathBuf {
        self.dir(stage).join(name)
    }

    /// Empties and recreates a stage directory.
    pub fn begin(&self, stage: Stage) -> Result<PathBuf> {
        let dir = self.dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|source| io_err(&dir, source))?;
        }
        fs::create_dir_all(&dir).map_err(|source| io_err(&dir, source))?;
        Ok(dir)
    }

    /// Records checksums of everything the stage wrote.
    pub fn finish(&self, stage: Stage) -> Result<Manifest> {
        let dir = self.dir(stage);
        let mut names: Vec<String> = fs::read_dir(&dir)
            .map_err(|source| io_err(&dir, source))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        let mut files = BTreeMap::new();
        for n in names {
            files.insert(n.clone(), sha256_file(&dir.join(&n))?);
        }
        let m = Manifest {
            command: stage.command().to_string(),
            config_hash: self.hash(stage).to_string(),
            files,
        };
        write_json(&dir.join(MANIFEST), &m)?;
        Ok(m)
    }

    /// Confirms an upstream stage ran with this configuration.
    pub fn require(&self, stage: Stage) -> Result<Manifest> {
        let path = self.path(stage, MANIFEST);
        if !path.exists() {
            return Err(Error::Data(format!(
                "missing {} output in {}; run `burnscope {}` first",
                stage.command(),
                self.dir(stage).display(),
                stage.command()
            )));
        }
        let m: Manifest = read_json(&path)?;
        let expected = self.hash(stage);
        if m.config_hash != expected {
            return Err(Error::Data(format!(
                "{} output was produced with config {} but the current config gives {}; rerun `burnscope {}`",
                stage.command(),
                short(&m.config_hash),
                short(expected),
                stage.command()
            )));
        }
        for (name, digest) in &m.files {
            let p = self.path(stage, name);
            if !p.exists() {
                return Err(Error::Data(format!(
                    "{} is missing; rerun `burnscope {}`",
                    p.display(),
                    stage.command()
                )));
            }
            if &sha256_file(&p)? != digest {
                return Err(Error::Data(format!(
                    "{} changed since `burnscope {}` wrote it",
                    p.display(),
                    stage.command()
                )));
            }
        }
        Ok(m)
    }

    /// Rejects a header whose recorded config hash is not the one `stage`
    /// would produce now.
    pub fn check_header_hash(&self, stage: Stage, what: &Path, recorded: Option<&str>) -> Result<()> {
        let expected = self.hash(stage);
        match recorded {
            Some(h) if h == expected => Ok(()),
            Some(h) => Err(Error::Data(format!(
                "{} carries config {} but `burnscope {}` now expects {}",
                what.display(),
                short(h),
                stage.command(),
                short(expected)
            ))),
            None => Err(Error::Data(format!("{} has no config hash", what.display()))),
        }
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_stage_names_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path(), "abc");
        let err = ws.require(Stage::TrainCae).unwrap_err().to_string();
        assert!(err.contains("burnscope train-cae"), "{err}");
    }

    #[test]
    fn manifest_round_trip_and_hash_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path(), "abc");
        let d = ws.begin(Stage::Scan).unwrap();
        fs::write(d.join("a.txt"), "x").unwrap();
        let m = ws.finish(Stage::Scan).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(ws.require(Stage::Scan).unwrap(), m);
        let other = Workspace::new(dir.path(), "def");
        let err = other.require(Stage::Scan).unwrap_err().to_string();
        assert!(err.contains("rerun `burnscope scan`"), "{err}");
    }

    #[test]
    fn tampered_file_detected() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path(), "abc");
        let d = ws.begin(Stage::Maps).unwrap();
        fs::write(d.join("a.txt"), "x").unwrap();
        ws.finish(Stage::Maps).unwrap();
        fs::write(d.join("a.txt"), "y").unwrap();
        assert!(ws.require(Stage::Maps).is_err());
    }

    #[test]
    fn header_hash_check() {
        let ws = Workspace::new("/tmp", "abc");
        let p = Path::new("x");
        assert!(ws.check_header_hash(Stage::Maps, p, Some("abc")).is_ok());
        assert!(ws.check_header_hash(Stage::Maps, p, Some("abd")).is_err());
        assert!(ws.check_header_hash(Stage::Maps, p, None).is_err());
    }
}
