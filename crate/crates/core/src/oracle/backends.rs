use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, ChatMessage, OracleError, OracleGame, Query};

/// Hex sha256 of the message list as compact JSON.
pub fn query_hash(messages: &[ChatMessage]) -> String {
    let json = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&json))
}

/// Deterministic heuristic answers computed from the structured query.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedBackend;

impl<G: OracleGame> Backend<G> for ScriptedBackend {
    fn complete(&self, query: &Query<G>) -> Result<String, OracleError> {
        Ok(G::scripted_reply(&query.context))
    }
}

/// One line of a replay transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub query_hash: String,
    pub reply_text: String,
}

/// Answers from a recorded transcript keyed by query hash.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    replies: BTreeMap<String, String>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut replies = BTreeMap::new();
        for r in records {
            replies.entry(r.query_hash).or_insert(r.reply_text);
        }
        ReplayBackend { replies }
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let file = std::fs::File::open(path)
            .map_err(|e| OracleError::Config(format!("replay transcript {}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| OracleError::Config(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| OracleError::Config(format!("{} line {}: {e}", path.display(), n + 1)))?;
            records.push(rec);
        }
        Ok(ReplayBackend::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl<G: OracleGame> Backend<G> for ReplayBackend {
    fn complete(&self, query: &Query<G>) -> Result<String, OracleError> {
        let hash = query_hash(&query.messages);
        self.replies.get(&hash).cloned().ok_or(OracleError::ReplayMiss(hash))
    }
}

/// Wraps a backend and keeps every successful exchange for later replay.
pub struct RecordingBackend<G: OracleGame> {
    inner: Arc<dyn Backend<G>>,
    seen: Mutex<BTreeMap<String, String>>,
}

impl<G: OracleGame> RecordingBackend<G> {
    pub fn new(inner: Arc<dyn Backend<G>>) -> Self {
        RecordingBackend { inner, seen: Mutex::new(BTreeMap::new()) }
    }

    /// Recorded exchanges sorted by hash, so the file does not depend on the
    /// order parallel workers finished in.
    pub fn records(&self) -> Vec<ReplayRecord> {
        let seen = self.seen.lock().expect("recording lock");
        seen.iter().map(|(h, r)| ReplayRecord { query_hash: h.clone(), reply_text: r.clone() }).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let io = |e: std::io::Error| OracleError::Config(format!("writing {}: {e}", path.display()));
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec).expect("record serializes");
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

impl<G: OracleGame> Backend<G> for RecordingBackend<G> {
    fn complete(&self, query: &Query<G>) -> Result<String, OracleError> {
        let reply = self.inner.complete(query)?;
        let hash = query_hash(&query.messages);
        self.seen.lock().expect("recording lock").entry(hash).or_insert_with(|| reply.clone());
        Ok(reply)
    }
}
