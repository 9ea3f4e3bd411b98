//! Transcript recording and replay keyed by prompt digest.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, BackendError, CompletionBackend, CompletionRequest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub stop: Vec<String>,
}

/// One JSON line of a transcript file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub prompt: String,
    pub completion: String,
    pub params: TranscriptParams,
}

impl TranscriptRecord {
    pub fn new(req: &CompletionRequest, completion: &str) -> Self {
        Self {
            digest: prompt_digest(&req.prompt),
            prompt: req.prompt.clone(),
            completion: completion.to_string(),
            params: TranscriptParams {
                max_tokens: req.max_tokens,
                temperature: req.temperature,
                top_p: req.top_p,
                frequency_penalty: req.frequency_penalty,
                stop: req.stop.clone(),
            },
        }
    }
}

pub fn load_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>, BackendError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| BackendError::Io(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Serves recorded completions; the first record for a digest wins.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    completions: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        let mut completions = HashMap::new();
        for r in records {
            completions.entry(r.digest).or_insert(r.completion);
        }
        Self { completions }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        Ok(Self::from_records(load_transcript(path)?))
    }

    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let digest = prompt_digest(&req.prompt);
        self.completions.get(&digest).cloned().ok_or(BackendError::UnknownPrompt { digest })
    }

    fn name(&self) -> &str {
        "replay"
    }

    fn concurrency_limit(&self) -> usize {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Decorator appending every successful call to a JSON-lines transcript.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<BufWriter<File>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, sink: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = sink.as_ref();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self { inner, sink: Mutex::new(BufWriter::new(file)) })
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let out = self.inner.complete(req)?;
        let line = serde_json::to_string(&TranscriptRecord::new(req, &out)).expect("record serializes");
        let mut sink = self.sink.lock().expect("transcript sink poisoned");
        writeln!(sink, "{line}").and_then(|_| sink.flush()).map_err(|e| BackendError::Io(e.to_string()))?;
        Ok(out)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }

    fn concurrency_limit(&self) -> usize {
        self.inner.concurrency_limit()
    }
}
