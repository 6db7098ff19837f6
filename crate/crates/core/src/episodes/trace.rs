//! Line-delimited JSON rollout traces.
//!
//! The first line is a [`TraceHeader`]; every following line is one
//! [`TraceRecord`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::rollout::Rollout;
use super::turn::TurnKind;
use super::vocab::{Token, Vocabulary};
use crate::error::{IgpoError, Result};

pub const TRACE_FORMAT: &str = "igpo-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub vocab: Vocabulary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnBoundary {
    pub index: usize,
    pub kind: TurnKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub question: Vec<Token>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ground_truth: Vec<Token>,
    pub tokens: Vec<Token>,
    pub turns: Vec<TurnBoundary>,
    pub decision_mask: Vec<bool>,
    pub format_valid: bool,
    /// Per-turn information gains for turns `1..T`, when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_gains: Option<Vec<f64>>,
}

impl TraceRecord {
    pub fn from_rollout(rollout: &Rollout) -> Self {
        Self {
            question: Vec::new(),
            ground_truth: Vec::new(),
            tokens: rollout.tokens.clone(),
            turns: rollout
                .turns
                .iter()
                .map(|t| TurnBoundary {
                    index: t.index,
                    kind: t.kind,
                    start: t.start(),
                    end: t.end(),
                })
                .collect(),
            decision_mask: rollout.decision_mask.clone(),
            format_valid: rollout.format_valid,
            info_gains: None,
        }
    }
}

pub fn write_traces<W: Write>(mut out: W, vocab: &Vocabulary, records: &[TraceRecord]) -> std::io::Result<()> {
    let header = TraceHeader {
        format: TRACE_FORMAT.to_string(),
        version: TRACE_VERSION,
        vocab: *vocab,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_traces<R: BufRead>(input: R) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| IgpoError::format("trace", "missing header"))?
        .map_err(|e| IgpoError::format("trace", e.to_string()))?;
    let header: TraceHeader =
        serde_json::from_str(&first).map_err(|e| IgpoError::format("trace header", e.to_string()))?;
    if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
        return Err(IgpoError::format(
            "trace header",
            format!("unsupported {} v{}", header.format, header.version),
        ));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| IgpoError::format("trace", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| IgpoError::format("trace record", format!("line {}: {e}", n + 2)))?;
        records.push(rec);
    }
    Ok((header, records))
}
