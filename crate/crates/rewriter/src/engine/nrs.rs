//! Sequential rewriting engine: sampled seq2seq selection with dynamic
//! windowing, convolutional match scoring and deterministic replacement.

use super::trace::{input_hash, RunStatus, RunTrace, TraceStep};
use crate::datagen::substream;
use crate::models::{LeafProposer, SolveModel};
use crate::term::{lex, parse_tokens, Formula};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub const WINDOW_GROUPS: usize = 20;

#[derive(Debug, Clone)]
pub struct SelectorConfig {
    /// Candidates sampled per selection step.
    pub m: usize,
    /// Windowing length threshold; `None` disables windowing.
    pub t: Option<usize>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig { m: 10, t: None }
    }
}

#[derive(Debug, Clone)]
pub struct LeafCandidate {
    pub tokens: Vec<String>,
    pub confidence: f64,
    pub agreement: f64,
    /// Tokens dropped from the front of the input by windowing.
    pub window_offset: usize,
    /// Best-match start in full-formula coordinates.
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub position: usize,
    pub score: usize,
    pub agreement: f64,
}

/// Suffix of length |f|−k.
pub fn window(f: &Formula, k: usize) -> Formula {
    assert!(k < f.len(), "window drop {k} must be below the length {}", f.len());
    Formula { domain: f.domain, tokens: f.tokens[k..].to_vec() }
}

/// Reduction amount for trial `i` on an input of |f| tokens.
pub fn window_drop(len: usize, trial: usize) -> usize {
    len * (trial % WINDOW_GROUPS) / WINDOW_GROUPS
}

/// Slides the one-hot matrix of `leaf` over the one-hot matrix of `f`;
/// the score at an offset counts agreeing positions. Ties break to the
/// rightmost offset, matching a selector trained on the last leaf.
pub fn match_convolve(f: &[String], leaf: &[String]) -> MatchResult {
    if leaf.is_empty() || leaf.len() > f.len() {
        return MatchResult { position: 0, score: 0, agreement: 0.0 };
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for t in f.iter().chain(leaf.iter()) {
        let next = ids.len();
        ids.entry(t.as_str()).or_insert(next);
    }
    let onehot = |tokens: &[String]| {
        let mut m = Array2::<f64>::zeros((tokens.len(), ids.len()));
        for (r, t) in tokens.iter().enumerate() {
            m[(r, ids[t.as_str()])] = 1.0;
        }
        m
    };
    let fm = onehot(f);
    let lm = onehot(leaf);
    let sims = fm.dot(&lm.t());
    let mut best = MatchResult { position: 0, score: 0, agreement: 0.0 };
    for o in 0..=f.len() - leaf.len() {
        let score = (0..leaf.len()).map(|i| sims[(o + i, i)]).sum::<f64>().round() as usize;
        if score >= best.score {
            best = MatchResult {
                position: o,
                score,
                agreement: score as f64 / leaf.len() as f64,
            };
        }
    }
    best
}

/// Samples M candidates (windowed for long inputs) and returns the
/// highest-confidence one with agreement 1.
pub fn select(
    f: &Formula,
    config: &SelectorConfig,
    proposer: &dyn LeafProposer,
    seed: u64,
) -> Option<LeafCandidate> {
    let hash = input_hash(&f.render());
    let windowed = config.t.map_or(false, |t| f.len() >= t);
    let mut best: Option<LeafCandidate> = None;
    for trial in 0..config.m {
        let k = if windowed { window_drop(f.len(), trial) } else { 0 };
        let view = if k == 0 { f.clone() } else { window(f, k) };
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed ^ hash, trial as u64));
        let sampled = proposer.propose(&view, &mut rng);
        if sampled.tokens.is_empty() {
            continue;
        }
        let m = match_convolve(&view.tokens, &sampled.tokens);
        let cand = LeafCandidate {
            confidence: sampled.confidence(),
            agreement: m.agreement,
            window_offset: k,
            position: m.position + k,
            tokens: sampled.tokens,
        };
        if cand.agreement == 1.0
            && best.as_ref().map_or(true, |b| cand.confidence > b.confidence)
        {
            best = Some(cand);
        }
    }
    best
}

/// Replaces tokens [position, position+|leaf|) of `f` with `e`.
pub fn combine(f: &Formula, leaf_len: usize, e: &[String], position: usize) -> Formula {
    let mut tokens = Vec::with_capacity(f.len() - leaf_len + e.len());
    tokens.extend_from_slice(&f.tokens[..position]);
    tokens.extend_from_slice(e);
    tokens.extend_from_slice(&f.tokens[position + leaf_len..]);
    Formula { domain: f.domain, tokens }
}

/// Whether tokens re-parse as a leaf formula or an atomic value.
pub fn leaf_shape_ok(tokens: &[String], domain: crate::term::Domain) -> bool {
    // A leaf is an atomic value or a node whose arguments are atomic.
    matches!(parse_tokens(tokens, domain), Ok(ast) if ast.depth() <= 1)
}

/// Outer rewrite loop: select → solve → combine until ω.
pub fn run_nrs(
    f: &Formula,
    proposer: &dyn LeafProposer,
    solver: &dyn SolveModel,
    config: &SelectorConfig,
    seed: u64,
) -> (Option<Formula>, RunTrace) {
    let limit = 4 * f.operator_count() + 4;
    let mut trace = RunTrace {
        engine: "nrs".into(),
        input: f.render(),
        output: None,
        status: RunStatus::Timeout,
        steps: Vec::new(),
    };
    let mut cur = f.clone();
    for index in 0..limit {
        let mut step = TraceStep::new(index, cur.render());
        let cand = match select(&cur, config, proposer, substream(seed, index as u64)) {
            Some(c) => c,
            None => {
                trace.status = RunStatus::Missing;
                trace.steps.push(step);
                return (None, trace);
            }
        };
        let leaf = Formula { domain: f.domain, tokens: cand.tokens.clone() };
        step.candidate = Some(leaf.render());
        step.confidence = Some(cand.confidence);
        step.agreement = Some(cand.agreement);
        step.span = Some((cand.position, cand.position + cand.tokens.len()));
        step.valid_leaf = Some(leaf_shape_ok(&cand.tokens, f.domain));
        let mut rng =
            ChaCha8Rng::seed_from_u64(substream(seed ^ 0x501e, index as u64));
        let out = solver.solve(&leaf, &mut rng);
        step.solver_output = Some(out.text.clone());
        step.log_confidence = Some(out.log_confidence);
        if out.is_omega() {
            trace.steps.push(step);
            trace.status = RunStatus::Success;
            trace.output = Some(cur.render());
            return (Some(cur), trace);
        }
        let e = lex(&out.text, f.domain).unwrap_or_else(|_| vec![out.text.clone()]);
        cur = combine(&cur, cand.tokens.len(), &e, cand.position);
        step.replaced = Some(true);
        trace.steps.push(step);
    }
    (None, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AbsentProposer, OracleProposer, OracleSolver};
    use crate::term::{parse, reduce_fully, Domain};

    #[test]
    fn window_returns_suffixes() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        assert_eq!(window(&f, 0).tokens, f.tokens);
        let w = window(&f, 4);
        assert_eq!(w.len(), f.len() - 4);
        assert_eq!(w.tokens[0], "3");
        assert_eq!(window_drop(200, 9), 90);
    }

    #[test]
    fn window_groups_cover_all_fractions() {
        let mut drops: Vec<usize> = (0..40).map(|i| window_drop(200, i)).collect();
        drops.sort_unstable();
        drops.dedup();
        let expect: Vec<usize> = (0..20).map(|j| 200 * j / 20).collect();
        assert_eq!(drops, expect);
    }

    #[test]
    fn match_convolve_agrees_with_a_naive_counter() {
        let naive = |f: &[String], l: &[String]| -> MatchResult {
            let mut best = MatchResult { position: 0, score: 0, agreement: 0.0 };
            if l.is_empty() || l.len() > f.len() {
                return best;
            }
            for o in 0..=f.len() - l.len() {
                let score = (0..l.len()).filter(|&i| f[o + i] == l[i]).count();
                if score >= best.score {
                    best = MatchResult {
                        position: o,
                        score,
                        agreement: score as f64 / l.len() as f64,
                    };
                }
            }
            best
        };
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let alphabet = ["(", ")", "+", "1", "2", "3"];
        for _ in 0..500 {
            let fl = rng.gen_range(1..20);
            let ll = rng.gen_range(1..8);
            let f: Vec<String> =
                (0..fl).map(|_| alphabet[rng.gen_range(0..6)].to_string()).collect();
            let l: Vec<String> =
                (0..ll).map(|_| alphabet[rng.gen_range(0..6)].to_string()).collect();
            assert_eq!(match_convolve(&f, &l), naive(&f, &l));
        }
    }

    #[test]
    fn agreement_one_iff_contiguous_occurrence() {
        let f: Vec<String> = "ababcab".chars().map(|c| c.to_string()).collect();
        let l: Vec<String> = "abc".chars().map(|c| c.to_string()).collect();
        let m = match_convolve(&f, &l);
        assert_eq!(m.agreement, 1.0);
        assert_eq!(m.position, 2);
        let missing: Vec<String> = "accc".chars().map(|c| c.to_string()).collect();
        assert!(match_convolve(&f, &missing).agreement < 1.0);
        // Repeated leaves: rightmost occurrence wins.
        let rep: Vec<String> = "ab".chars().map(|c| c.to_string()).collect();
        assert_eq!(match_convolve(&f, &rep).position, 5);
    }

    #[test]
    fn combine_splices_value_into_nested_sum() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        let leaf = parse("(4+5)", Domain::Arithmetic).unwrap();
        let out = combine(&f, leaf.len(), &["9".to_string()], 6);
        assert_eq!(out.render(), "(12+(3-9))");
        assert_eq!(out.len(), f.len() - leaf.len() + 1);
    }

    #[test]
    fn oracle_run_reaches_the_reduced_value() {
        for (text, domain) in [
            ("(12+(3-(4+5)))", Domain::Arithmetic),
            ("[MIN[SM54][MIN39]]", Domain::ListOps),
            ("(23*a*b-5*a*b)", Domain::Algebra),
        ] {
            let f = parse(text, domain).unwrap();
            let (out, trace) =
                run_nrs(&f, &OracleProposer, &OracleSolver, &SelectorConfig::default(), 1);
            let (expect, _) = reduce_fully(&f).unwrap();
            assert_eq!(out.unwrap().render(), expect.render());
            assert_eq!(trace.status, RunStatus::Success);
            for pair in trace.steps.windows(2) {
                assert_ne!(pair[0].input, pair[1].input);
            }
        }
    }

    #[test]
    fn atomic_input_returns_unchanged() {
        let f = parse("7", Domain::Arithmetic).unwrap();
        let (out, trace) =
            run_nrs(&f, &OracleProposer, &OracleSolver, &SelectorConfig::default(), 1);
        assert_eq!(out.unwrap().render(), "7");
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn absent_candidates_fail_as_missing() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        let (out, trace) =
            run_nrs(&f, &AbsentProposer, &OracleSolver, &SelectorConfig::default(), 1);
        assert!(out.is_none());
        assert_eq!(trace.status, RunStatus::Missing);
    }

    #[test]
    fn selection_is_reproducible_for_a_seed() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        let a = select(&f, &SelectorConfig::default(), &OracleProposer, 9).unwrap();
        let b = select(&f, &SelectorConfig::default(), &OracleProposer, 9).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.position, b.position);
    }
}
