//! Corpus persistence: JSONL case files and staged directory writes.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::triage::{SynStartsCase, TriageTag};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const BUILD_STATS_FILE: &str = "build_stats.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("duplicate case id {0}")]
    DuplicateId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub cases: Vec<SynStartsCase>,
}

impl Corpus {
    pub fn new(cases: Vec<SynStartsCase>) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for case in &cases {
            if !seen.insert(case.id.as_str()) {
                return Err(CorpusError::DuplicateId(case.id.clone()));
            }
        }
        Ok(Corpus { cases })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn tag_counts(&self) -> BTreeMap<TriageTag, usize> {
        let mut counts: BTreeMap<TriageTag, usize> = TriageTag::ALL.iter().map(|t| (*t, 0)).collect();
        for case in &self.cases {
            *counts.entry(case.tag).or_default() += 1;
        }
        counts
    }

    pub fn index(&self) -> HashMap<&str, &SynStartsCase> {
        self.cases.iter().map(|c| (c.id.as_str(), c)).collect()
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Corpus::new(read_jsonl(path)?)
    }

    /// Load `corpus.jsonl` from a corpus directory (or a direct file path).
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        if dir.is_file() {
            Self::load(dir)
        } else {
            Self::load(&dir.join(CORPUS_FILE))
        }
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| io_err(path)(e.into()))?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| io_err(path)(e.into()))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

/// A directory that is written under `<target>.partial` and only renamed
/// onto `<target>` by [`StagedDir::commit`]. Dropping it uncommitted leaves
/// the partial directory in place for inspection.
pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
}

impl StagedDir {
    pub fn create(target: &Path) -> Result<Self, CorpusError> {
        let mut name = target.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "out".into());
        name.push(".partial");
        let staging = target.with_file_name(name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        if let Some(parent) = target.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
        }
        Ok(StagedDir { target: target.to_path_buf(), staging })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn join(&self, name: impl AsRef<Path>) -> PathBuf {
        self.staging.join(name)
    }

    pub fn commit(self) -> Result<PathBuf, CorpusError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(io_err(&self.target))?;
        }
        fs::rename(&self.staging, &self.target).map_err(io_err(&self.target))?;
        Ok(self.target)
    }
}
