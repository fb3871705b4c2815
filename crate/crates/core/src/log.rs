//! Append-only run log: one JSON object per line, each carrying
//! `schema_version`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Condition;
use crate::model::{Sentiment, Significance};
use crate::providers::Capability;
use crate::templates::TemplateId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum LogEvent {
    RunStarted {
        condition: Condition,
        iterations: u32,
        seed: u64,
        config_digest: String,
    },
    /// Seeds are logged with `step = -1`.
    ArtworkCreated {
        artwork: String,
        creator: String,
        step: i64,
        art_prompt: String,
        image: String,
    },
    SignificanceUpdated {
        artwork: String,
        step: i64,
        points: u32,
        total: Significance,
    },
    DecayApplied {
        step: i64,
        artworks: usize,
    },
    KeywordsUpdated {
        step: i64,
        top: Vec<String>,
        keywords: Vec<String>,
    },
    PromptIssued {
        seq: u64,
        template: TemplateId,
        text: String,
    },
    ProviderResponse {
        seq: u64,
        capability: Capability,
        request: String,
        response: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        raw: Option<String>,
        retries: u32,
        latency_ms: u64,
    },
    CritiqueRecorded {
        critic: String,
        artwork: String,
        step: i64,
        sentiment: Sentiment,
        propagated: bool,
        reevaluation: bool,
        text: String,
    },
    ReflectionAppended {
        artist: String,
        step: i64,
        log_len: usize,
        text: String,
    },
    SummarizationApplied {
        artist: String,
        step: i64,
        folded: usize,
        summary: String,
    },
    ContaminationWarning {
        artwork: String,
        markers: Vec<String>,
    },
    Warning {
        step: i64,
        message: String,
    },
    StepCompleted {
        t: i64,
    },
    RunCompleted {
        steps: u32,
    },
}

impl LogEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            LogEvent::RunStarted { .. } => "RunStarted",
            LogEvent::ArtworkCreated { .. } => "ArtworkCreated",
            LogEvent::SignificanceUpdated { .. } => "SignificanceUpdated",
            LogEvent::DecayApplied { .. } => "DecayApplied",
            LogEvent::KeywordsUpdated { .. } => "KeywordsUpdated",
            LogEvent::PromptIssued { .. } => "PromptIssued",
            LogEvent::ProviderResponse { .. } => "ProviderResponse",
            LogEvent::CritiqueRecorded { .. } => "CritiqueRecorded",
            LogEvent::ReflectionAppended { .. } => "ReflectionAppended",
            LogEvent::SummarizationApplied { .. } => "SummarizationApplied",
            LogEvent::ContaminationWarning { .. } => "ContaminationWarning",
            LogEvent::Warning { .. } => "Warning",
            LogEvent::StepCompleted { .. } => "StepCompleted",
            LogEvent::RunCompleted { .. } => "RunCompleted",
        }
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    event: &'a LogEvent,
}

#[derive(Deserialize)]
struct LineIn {
    #[serde(flatten)]
    event: LogEvent,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("run log I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt run log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("run log line {line} has schema_version {found}, expected {SCHEMA_VERSION}")]
    SchemaMismatch { line: usize, found: String },
}

/// Serialize one event as a log line (no trailing newline).
pub fn encode_line(event: &LogEvent) -> String {
    serde_json::to_string(&LineOut {
        schema_version: SCHEMA_VERSION,
        event,
    })
    .expect("log events serialize")
}

/// Parse one line; `line_no` is 1-based and only used in errors.
pub fn decode_line(text: &str, line_no: usize) -> Result<LogEvent, LogError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LogError::Corrupt {
        line: line_no,
        message: e.to_string(),
    })?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
        Some(v) => {
            return Err(LogError::SchemaMismatch {
                line: line_no,
                found: v.to_string(),
            });
        }
        None => {
            return Err(LogError::SchemaMismatch {
                line: line_no,
                found: "none".into(),
            });
        }
    }
    serde_json::from_value::<LineIn>(value)
        .map(|l| l.event)
        .map_err(|e| LogError::Corrupt {
            line: line_no,
            message: e.to_string(),
        })
}

/// Read a whole log, returning raw lines alongside decoded events.
pub fn read_log(path: &Path) -> Result<Vec<(String, LogEvent)>, LogError> {
    let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push((line.to_string(), decode_line(line, i + 1)?));
    }
    Ok(out)
}

/// Destination for log events.
pub trait EventSink {
    fn emit(&mut self, event: &LogEvent) -> Result<(), LogError>;
}

/// Appends each event to a file as soon as it is emitted.
pub struct RunLogWriter {
    path: PathBuf,
    file: File,
}

impl RunLogWriter {
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let file = File::create(path).map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(RunLogWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|source| LogError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(RunLogWriter {
            path: path.to_path_buf(),
            file,
        })
    }
}

impl EventSink for RunLogWriter {
    fn emit(&mut self, event: &LogEvent) -> Result<(), LogError> {
        let mut line = encode_line(event);
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|source| LogError::Io {
            path: self.path.display().to_string(),
            source,
        })
    }
}

/// Keeps events in memory.
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    pub events: Vec<LogEvent>,
}

impl EventSink for MemoryLog {
    fn emit(&mut self, event: &LogEvent) -> Result<(), LogError> {
        self.events.push(event.clone());
        Ok(())
    }
}

impl MemoryLog {
    pub fn lines(&self) -> Vec<String> {
        self.events.iter().map(encode_line).collect()
    }
}

/// Compares emitted events against previously recorded lines, byte for byte.
pub struct VerifyingSink {
    expected: Vec<String>,
    cursor: usize,
}

impl VerifyingSink {
    pub fn new(expected: Vec<String>) -> Self {
        VerifyingSink { expected, cursor: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.expected.len() - self.cursor
    }
}

impl EventSink for VerifyingSink {
    fn emit(&mut self, event: &LogEvent) -> Result<(), LogError> {
        let line = encode_line(event);
        let line_no = self.cursor + 1;
        match self.expected.get(self.cursor) {
            Some(recorded) if *recorded == line => {
                self.cursor += 1;
                Ok(())
            }
            Some(recorded) => Err(LogError::Corrupt {
                line: line_no,
                message: format!("replay diverged: recorded {recorded}, replayed {line}"),
            }),
            None => Err(LogError::Corrupt {
                line: line_no,
                message: format!("replay emitted an event past the recorded end: {line}"),
            }),
        }
    }
}
