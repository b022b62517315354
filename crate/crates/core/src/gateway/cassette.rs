//! Cassettes: JSONL logs of request digests and responses.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub digest: String,
    pub request_tag: String,
    pub model_id: String,
    pub response: ChatResponse,
}

/// Ordered list of recorded exchanges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cassette {
    pub records: Vec<CassetteRecord>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| {
                GatewayError::Io(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                ))
            })?;
            records.push(record);
        }
        Ok(Cassette { records })
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let mut out = BufWriter::new(File::create(path)?);
        for record in &self.records {
            serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Wraps a backend and appends every successful exchange to a cassette file.
pub struct Recorder<B> {
    inner: B,
    sink: Mutex<BufWriter<File>>,
}

impl<B: ChatBackend> Recorder<B> {
    pub fn create(inner: B, path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Recorder { inner, sink: Mutex::new(BufWriter::new(file)) })
    }
}

impl<B: ChatBackend> ChatBackend for Recorder<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(req)?;
        let record = CassetteRecord {
            digest: req.digest(),
            request_tag: req.request_tag.clone(),
            model_id: req.model_id.clone(),
            response: response.clone(),
        };
        let mut sink = self.sink.lock().expect("cassette lock");
        serde_json::to_writer(&mut *sink, &record).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(response)
    }
}

/// Serves responses from a cassette.
///
/// Records sharing a digest are consumed in order; a record whose
/// `request_tag` matches the request is preferred, which keeps replay
/// deterministic when the recording run issued requests in parallel.
pub struct ReplayBackend {
    id: String,
    pending: Mutex<HashMap<String, Vec<Option<CassetteRecord>>>>,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        let mut pending: HashMap<String, Vec<Option<CassetteRecord>>> = HashMap::new();
        for record in cassette.records {
            pending.entry(record.digest.clone()).or_default().push(Some(record));
        }
        ReplayBackend { id: "replay".into(), pending: Mutex::new(pending) }
    }

    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::new(Cassette::load(path)?))
    }

    pub fn remaining(&self) -> usize {
        let pending = self.pending.lock().expect("replay lock");
        pending.values().flatten().filter(|r| r.is_some()).count()
    }
}

impl ChatBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let digest = req.digest();
        let mut pending = self.pending.lock().expect("replay lock");
        let miss = || GatewayError::ReplayMiss { digest: digest.clone() };
        let queue = pending.get_mut(&digest).ok_or_else(miss)?;
        let slot = queue
            .iter()
            .position(|r| r.as_ref().is_some_and(|r| r.request_tag == req.request_tag))
            .or_else(|| queue.iter().position(Option::is_some))
            .ok_or_else(miss)?;
        let record = queue[slot].take().expect("slot is filled");
        Ok(record.response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, MockConfig};
    use crate::triage::TriageTag;

    fn gen_req(i: usize) -> ChatRequest {
        ChatRequest {
            model_id: "mock".into(),
            system_prompt: "sys".into(),
            user_prompt: "gen".into(),
            temperature: 0.7,
            max_tokens: 512,
            request_tag: format!("gen:{}:{i}", TriageTag::Red),
        }
    }

    #[test]
    fn record_then_replay_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cassette.jsonl");
        let recorder = Recorder::create(MockBackend::new(MockConfig::default()), &path).unwrap();
        let recorded: Vec<String> = (0..5).map(|i| recorder.complete(&gen_req(i)).unwrap().text).collect();
        drop(recorder);

        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.remaining(), 5);
        let replayed: Vec<String> = (0..5).map(|i| replay.complete(&gen_req(i)).unwrap().text).collect();
        assert_eq!(recorded, replayed);
        assert!(matches!(replay.complete(&gen_req(0)), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn replay_prefers_matching_tag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let recorder = Recorder::create(MockBackend::new(MockConfig::default()), &path).unwrap();
        let a = recorder.complete(&gen_req(0)).unwrap().text;
        let b = recorder.complete(&gen_req(1)).unwrap().text;
        drop(recorder);
        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.complete(&gen_req(1)).unwrap().text, b);
        assert_eq!(replay.complete(&gen_req(0)).unwrap().text, a);
    }

    #[test]
    fn unknown_request_misses() {
        let replay = ReplayBackend::new(Cassette::default());
        assert!(matches!(replay.complete(&gen_req(0)), Err(GatewayError::ReplayMiss { .. })));
    }
}
