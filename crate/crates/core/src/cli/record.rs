//! Run records, digests and result-file writing.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::{hex, ExperimentConfig};

/// Version of this crate, echoed in every record.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// File name of the run record inside a run directory.
pub const RECORD_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Complete,
    /// A resource cap or replica budget stopped the run early.
    Truncated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub steps: Vec<StepTiming>,
    pub files: Vec<FileDigest>,
    pub status: Status,
    #[serde(default)]
    pub message: Option<String>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(RECORD_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
    }

    pub fn digest_of(&self, path: &str) -> Option<&str> {
        self.files.iter().find(|f| f.path == path).map(|f| f.sha256.as_str())
    }
}

/// JSON result wrapper carrying the config digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_digest: String,
    pub result: T,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path)?;
    Ok((hex(&Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Reads a JSON envelope written by [`RunWriter::write_json`].
pub fn read_envelope<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes results into one run directory and assembles the record.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    subcommand: String,
    config: ExperimentConfig,
    digest: String,
    started: Instant,
    started_unix: u64,
    steps: Vec<StepTiming>,
    files: Vec<String>,
}

impl RunWriter {
    pub fn create(dir: PathBuf, subcommand: &str, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            subcommand: subcommand.into(),
            digest: config.digest()?,
            config: config.clone(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            steps: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_digest(&self) -> &str {
        &self.digest
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn step<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.steps.push(StepTiming {
            name: name.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    /// Records a step timed by the caller.
    pub fn record(&mut self, name: &str, seconds: f64) {
        self.steps.push(StepTiming {
            name: name.into(),
            seconds,
        });
    }

    fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
    }

    /// Writes via a temporary file so a reader never sees a partial file.
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)?;
        self.register(name);
        Ok(())
    }

    /// CSV body prefixed by a `# config_sha256=` comment line.
    pub fn write_csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("# config_sha256={}\n{body}", self.digest);
        self.put(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let env = Envelope {
            config_digest: self.digest.clone(),
            result: value,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
        self.put(name, text.as_bytes())
    }

    /// Loads a JSON result of this run if present and written under the same
    /// config digest.
    pub fn resume_json<T: DeserializeOwned>(&mut self, name: &str) -> Result<Option<T>> {
        let path = self.dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let env: Envelope<T> = read_envelope(&path)?;
        if env.config_digest != self.digest {
            return Err(Error::Config(format!(
                "{} was written by a different config (digest {}); refusing to resume",
                path.display(),
                env.config_digest
            )));
        }
        self.register(name);
        Ok(Some(env.result))
    }

    /// Digests every registered file and writes `run.json`.
    pub fn finish(self, status: Status, message: Option<String>) -> Result<RunRecord> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let (sha256, bytes) = sha256_file(&self.dir.join(name))?;
            files.push(FileDigest {
                path: name.clone(),
                sha256,
                bytes,
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let rec = RunRecord {
            subcommand: self.subcommand,
            version: VERSION.into(),
            config: self.config,
            config_digest: self.digest,
            started_unix: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            steps: self.steps,
            files,
            status,
            message,
        };
        let text = serde_json::to_string_pretty(&rec).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(self.dir.join(RECORD_FILE), text)?;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_embed_digest_and_are_recorded() {
        let dir = std::env::temp_dir().join(format!("lrop-record-{}", std::process::id()));
        let cfg = ExperimentConfig::default();
        let mut w = RunWriter::create(dir.clone(), "kernel", &cfg).unwrap();
        w.write_csv("a.csv", "x,y\n1,2\n").unwrap();
        w.write_json("b.json", &vec![1.5, 2.5]).unwrap();
        let d = w.config_digest().to_string();
        let rec = w.finish(Status::Complete, None).unwrap();
        assert!(std::fs::read_to_string(dir.join("a.csv")).unwrap().contains(&d));
        let env: Envelope<Vec<f64>> = read_envelope(&dir.join("b.json")).unwrap();
        assert_eq!(env.config_digest, d);
        assert_eq!(rec.files.len(), 2);
        assert_eq!(RunRecord::load(&dir).unwrap(), rec);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
