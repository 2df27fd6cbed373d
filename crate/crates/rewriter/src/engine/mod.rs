//! The two rewriting engines and their shared run traces.

pub mod fastnrs;
pub mod nrs;
pub mod trace;

pub use fastnrs::{cond_repl, extract, run_fastnrs, ExtractedLeaf, ReplacementPolicy};
pub use nrs::{
    combine, leaf_shape_ok, match_convolve, run_nrs, select, window, window_drop,
    LeafCandidate, MatchResult, SelectorConfig, WINDOW_GROUPS,
};
pub use trace::{input_hash, RunStatus, RunTrace, TraceStep};
