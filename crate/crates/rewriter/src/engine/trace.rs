//! Rewrite-run traces shared by both engines.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    /// No candidate reached agreement 1 (seq2seq selection failure).
    Missing,
    /// An iteration finished with zero replacements (gated engine).
    NoReplacement,
    /// Step-limit guard fired.
    Timeout,
}

/// One rewrite attempt. Seq2seq engines record one step per loop turn;
/// the segmentation engine records one step per (iteration, leaf).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replaced: Option<bool>,
    /// Whether the candidate re-parses as a leaf formula or atomic value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_leaf: Option<bool>,
}

impl TraceStep {
    pub fn new(index: usize, input: String) -> Self {
        TraceStep {
            index,
            input,
            candidate: None,
            confidence: None,
            agreement: None,
            mask: None,
            span: None,
            solver_output: None,
            log_confidence: None,
            replaced: None,
            valid_leaf: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub engine: String,
    pub input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub status: RunStatus,
    pub steps: Vec<TraceStep>,
}

/// Stable content hash of a rendered input, used to seed per-input rng
/// substreams.
pub fn input_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
