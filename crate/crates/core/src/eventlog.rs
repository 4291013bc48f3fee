//! JSON Lines event log: one header line, then one [`NoteEvent`] per line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NoteEvent;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub engine_version: String,
    pub rng: String,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("event log is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn write_event_log(header: &LogHeader, events: &[NoteEvent]) -> String {
    let mut out = serde_json::to_string(&HeaderLine { header: header.clone() }).expect("header serializes");
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Reads a log. The header line is optional so hand-made logs also load.
pub fn read_event_log(text: &str) -> Result<(Option<LogHeader>, Vec<NoteEvent>), EventLogError> {
    let mut header = None;
    let mut events = Vec::new();
    let mut seen_any = false;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if !seen_any {
            seen_any = true;
            if let Ok(h) = serde_json::from_str::<HeaderLine>(line) {
                header = Some(h.header);
                continue;
            }
        }
        let e = serde_json::from_str(line).map_err(|source| EventLogError::Json { line: i + 1, source })?;
        events.push(e);
    }
    if !seen_any {
        return Err(EventLogError::Empty);
    }
    Ok((header, events))
}
