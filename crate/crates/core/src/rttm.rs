//! Speaker turns and the NIST RTTM text format.
//!
//! Lines follow the 10-field layout
//! `SPEAKER <file> <chan> <onset> <dur> <NA> <NA> <speaker> <NA> <NA>`.
//! Only `SPEAKER` records are accepted; anything else is a malformed line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RttmError {
    #[error("line {0}: malformed RTTM record")]
    MalformedLine(usize),
    #[error("line {0}: onset or duration is not a finite number")]
    NonNumericTime(usize),
    #[error("line {0}: duration must be positive")]
    NonPositiveDuration(usize),
}

/// One speaker's contiguous interval of speech.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub file_id: String,
    pub speaker_id: String,
    pub onset_s: f64,
    pub duration_s: f64,
}

impl Turn {
    pub fn new(file_id: impl Into<String>, speaker_id: impl Into<String>, onset_s: f64, duration_s: f64) -> Self {
        Self { file_id: file_id.into(), speaker_id: speaker_id.into(), onset_s, duration_s }
    }

    pub fn offset_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }

    pub fn is_valid(&self) -> bool {
        self.onset_s.is_finite() && self.duration_s.is_finite() && self.onset_s >= 0.0 && self.duration_s > 0.0
    }
}

/// Parses RTTM text. Blank lines are ignored; line numbers in errors are 1-based.
pub fn parse_rttm(text: &str) -> Result<Vec<Turn>, RttmError> {
    let mut turns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 9 || fields[0] != "SPEAKER" {
            return Err(RttmError::MalformedLine(line_no));
        }
        let number = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
        let onset = number(fields[3]).ok_or(RttmError::NonNumericTime(line_no))?;
        let duration = number(fields[4]).ok_or(RttmError::NonNumericTime(line_no))?;
        if onset < 0.0 {
            return Err(RttmError::NonNumericTime(line_no));
        }
        if duration <= 0.0 {
            return Err(RttmError::NonPositiveDuration(line_no));
        }
        turns.push(Turn::new(fields[1], fields[7], onset, duration));
    }
    Ok(turns)
}

/// Emits one line per turn with millisecond precision.
pub fn emit_rttm(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            t.file_id, t.onset_s, t.duration_s, t.speaker_id
        );
    }
    out
}

/// Groups turns by file id, preserving order within each file.
pub fn group_by_file(turns: Vec<Turn>) -> BTreeMap<String, Vec<Turn>> {
    let mut map: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for t in turns {
        map.entry(t.file_id.clone()).or_default().push(t);
    }
    map
}

/// Rescales every turn time by `scale`, e.g. `1 / speed_factor` after a playback-rate change.
pub fn rescale_turns(turns: &[Turn], scale: f64) -> Vec<Turn> {
    turns
        .iter()
        .map(|t| Turn { onset_s: t.onset_s * scale, duration_s: t.duration_s * scale, ..t.clone() })
        .collect()
}
