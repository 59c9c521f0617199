//! The JSONL transcript: one line per exchange, append-only, and sufficient
//! on its own to recompute metrics or resume an interrupted run.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::TokenUsage;
use crate::prompting::PromptFamily;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    /// The exchange never produced a response (transport failure, retries
    /// exhausted). The task stays unsolved and is retried next round.
    Error,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, Debug, Serialize, Deserialize)]
pub struct UsageRecord {
    pub prompt: u64,
    pub completion: u64,
    pub reasoning: u64,
    #[serde(default)]
    pub folded: bool,
}

impl From<TokenUsage> for UsageRecord {
    fn from(u: TokenUsage) -> UsageRecord {
        UsageRecord {
            prompt: u.prompt_tokens,
            completion: u.completion_tokens,
            reasoning: u.reasoning_tokens,
            folded: u.reasoning_folded,
        }
    }
}

impl From<UsageRecord> for TokenUsage {
    fn from(u: UsageRecord) -> TokenUsage {
        TokenUsage {
            prompt_tokens: u.prompt,
            completion_tokens: u.completion,
            reasoning_tokens: u.reasoning,
            reasoning_folded: u.folded,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FailureRecord {
    pub step: usize,
    pub action: String,
}

/// One exchange. Field order is the wire order; keep it stable.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub run_id: String,
    pub task_id: String,
    pub round: u32,
    pub family: PromptFamily,
    pub prompt_hash: String,
    pub response_text: String,
    pub usage: UsageRecord,
    pub cost_usd: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureRecord>,
    /// Unix milliseconds; zero under the mock backend so transcripts are
    /// byte-reproducible.
    pub started_at_ms: u64,
    pub finished_at_ms: u64,
    pub template_versions: BTreeMap<String, String>,
}

pub struct TranscriptWriter {
    out: BufWriter<File>,
}

impl TranscriptWriter {
    /// Opens for append, creating parent directories as needed.
    pub fn open(path: &Path) -> std::io::Result<TranscriptWriter> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranscriptWriter {
            out: BufWriter::new(file),
        })
    }

    /// Appends one record and flushes, so a crash loses at most the line
    /// being written.
    pub fn append(&mut self, record: &TranscriptRecord) -> std::io::Result<()> {
        let json = serde_json::to_string(record).expect("records serialize");
        writeln!(self.out, "{json}")?;
        self.out.flush()
    }
}

/// Reads every complete record; a trailing partial line (torn write) is
/// reported, not fatal.
pub fn read_transcript(path: &Path) -> std::io::Result<(Vec<TranscriptRecord>, bool)> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut records = Vec::new();
    let mut torn = false;
    let complete_len = match text.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    if complete_len < text.len() {
        torn = true;
    }
    for line in text[..complete_len].lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TranscriptRecord>(line) {
            Ok(record) => records.push(record),
            Err(_) => {
                torn = true;
                break;
            }
        }
    }
    Ok((records, torn))
}

/// Like `read_transcript`, but rewrites the file to contain exactly the
/// complete records so appends resume from a clean boundary.
pub fn repair_transcript(path: &Path) -> std::io::Result<Vec<TranscriptRecord>> {
    let (records, torn) = read_transcript(path)?;
    if torn {
        let mut out = BufWriter::new(File::create(path)?);
        for record in &records {
            let json = serde_json::to_string(record).expect("records serialize");
            writeln!(out, "{json}")?;
        }
        out.flush()?;
    }
    Ok(records)
}
