//! Parallel rewriting engine: segmentation selection, leaf extraction
//! and confidence-gated replacement.

use super::trace::{input_hash, RunStatus, RunTrace, TraceStep};
use crate::datagen::substream;
use crate::models::{SegmentModel, SolveModel};
use crate::term::{lex, Formula};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct ReplacementPolicy {
    /// Minimum solver log-confidence for a replacement.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedLeaf {
    pub span: (usize, usize),
    pub tokens: Vec<String>,
}

/// Maximal contiguous positive runs, left to right. A run covering
/// several adjacent leaves (bracketed list arguments have no separator
/// tokens) is split at balanced-bracket boundaries, but only when every
/// piece re-parses as a leaf; defective runs stay whole so downstream
/// gating sees them unchanged.
pub fn extract(mask: &[bool], f: &Formula) -> Vec<ExtractedLeaf> {
    assert_eq!(mask.len(), f.len());
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=mask.len() {
        match (start, i < mask.len() && mask[i]) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                for (a, b) in split_run(f, s, i) {
                    out.push(ExtractedLeaf { span: (a, b), tokens: f.tokens[a..b].to_vec() });
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn split_run(f: &Formula, start: usize, end: usize) -> Vec<(usize, usize)> {
    let (open, close) = f.domain.brackets();
    let mut segments = Vec::new();
    let mut depth = 0usize;
    let mut seg_start = start;
    for i in start..end {
        let t = f.tokens[i].as_str();
        if t == open {
            depth += 1;
        } else if t == close {
            if depth == 0 {
                return vec![(start, end)];
            }
            depth -= 1;
        }
        if depth == 0 {
            segments.push((seg_start, i + 1));
            seg_start = i + 1;
        }
    }
    if depth != 0 || segments.len() <= 1 {
        return vec![(start, end)];
    }
    let all_leaves = segments
        .iter()
        .all(|&(a, b)| super::nrs::leaf_shape_ok(&f.tokens[a..b], f.domain));
    if all_leaves {
        segments
    } else {
        vec![(start, end)]
    }
}

/// Gated splice: replace iff the solver confidence clears the threshold.
pub fn cond_repl(
    f: &Formula,
    leaf: &ExtractedLeaf,
    e: &[String],
    c_e: f64,
    policy: &ReplacementPolicy,
) -> (Formula, bool) {
    if c_e >= policy.theta {
        let mut tokens = Vec::with_capacity(f.len() - (leaf.span.1 - leaf.span.0) + e.len());
        tokens.extend_from_slice(&f.tokens[..leaf.span.0]);
        tokens.extend_from_slice(e);
        tokens.extend_from_slice(&f.tokens[leaf.span.1..]);
        (Formula { domain: f.domain, tokens }, true)
    } else {
        (f.clone(), false)
    }
}

fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Iterate segment → extract → solve/gate until ω, a zero-replacement
/// iteration, or the step limit.
pub fn run_fastnrs(
    f: &Formula,
    segmenter: &dyn SegmentModel,
    solver: &dyn SolveModel,
    policy: &ReplacementPolicy,
    seed: u64,
) -> (Option<Formula>, RunTrace) {
    let limit = 4 * f.operator_count() + 4;
    let hash = input_hash(&f.render());
    let mut trace = RunTrace {
        engine: "fastnrs".into(),
        input: f.render(),
        output: None,
        status: RunStatus::Timeout,
        steps: Vec::new(),
    };
    let mut cur = f.clone();
    for iter in 0..limit {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed ^ hash, iter as u64));
        let mask = segmenter.segment(&cur, &mut rng);
        let leaves = extract(&mask, &cur);
        if leaves.is_empty() {
            let mut step = TraceStep::new(iter, cur.render());
            step.mask = Some(mask_string(&mask));
            step.replaced = Some(false);
            trace.steps.push(step);
            trace.status = RunStatus::NoReplacement;
            return (None, trace);
        }
        let mut replaced_any = false;
        // Replacements shift later spans; delta tracks the offset.
        let mut delta: isize = 0;
        for (li, leaf) in leaves.iter().enumerate() {
            let mut step = TraceStep::new(iter, cur.render());
            step.mask = Some(mask_string(&mask));
            let leaf_f = Formula { domain: f.domain, tokens: leaf.tokens.clone() };
            step.candidate = Some(leaf_f.render());
            step.valid_leaf = Some(super::nrs::leaf_shape_ok(&leaf.tokens, f.domain));
            let mut srng = ChaCha8Rng::seed_from_u64(substream(
                seed ^ hash ^ 0x5017e,
                (iter * 1024 + li) as u64,
            ));
            let out = solver.solve(&leaf_f, &mut srng);
            step.solver_output = Some(out.text.clone());
            step.log_confidence = Some(out.log_confidence);
            if out.is_omega() {
                step.replaced = Some(false);
                trace.steps.push(step);
                trace.status = RunStatus::Success;
                trace.output = Some(cur.render());
                return (Some(cur), trace);
            }
            let e = lex(&out.text, f.domain).unwrap_or_else(|_| vec![out.text.clone()]);
            let span = (
                (leaf.span.0 as isize + delta) as usize,
                (leaf.span.1 as isize + delta) as usize,
            );
            step.span = Some(span);
            let shifted = ExtractedLeaf { span, tokens: leaf.tokens.clone() };
            let (next, replaced) = cond_repl(&cur, &shifted, &e, out.log_confidence, policy);
            step.replaced = Some(replaced);
            if replaced {
                delta += e.len() as isize - (leaf.span.1 - leaf.span.0) as isize;
                cur = next;
                replaced_any = true;
            }
            trace.steps.push(step);
        }
        if !replaced_any {
            trace.status = RunStatus::NoReplacement;
            return (None, trace);
        }
    }
    (None, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{OracleSegmenter, OracleSolver, SegmentModel};
    use crate::term::{parse, reduce_fully, Domain};
    use rand::SeedableRng;

    fn policy() -> ReplacementPolicy {
        ReplacementPolicy { theta: -2.0 }
    }

    #[test]
    fn extract_finds_ordered_maximal_runs() {
        let f = parse("((1+2)*(3-4))", Domain::Arithmetic).unwrap();
        let mask = OracleSegmenter.segment(&f, &mut ChaCha8Rng::seed_from_u64(0));
        let leaves = extract(&mask, &f);
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].tokens.concat(), "(1+2)");
        assert_eq!(leaves[1].tokens.concat(), "(3-4)");
        assert!(leaves[0].span.1 <= leaves[1].span.0);
        assert!(extract(&vec![false; f.len()], &f).is_empty());
    }

    #[test]
    fn cond_repl_gates_on_the_threshold() {
        let f = parse("(4+5)", Domain::Arithmetic).unwrap();
        let leaf = ExtractedLeaf { span: (0, 5), tokens: f.tokens.clone() };
        let e = vec!["9".to_string()];
        let (out, replaced) = cond_repl(&f, &leaf, &e, 0.0, &policy());
        assert!(replaced);
        assert_eq!(out.render(), "9");
        let (out, replaced) = cond_repl(&f, &leaf, &e, -10.0, &ReplacementPolicy { theta: -6.0 });
        assert!(!replaced);
        assert_eq!(out.render(), "(4+5)");
    }

    #[test]
    fn multi_leaf_offsets_match_a_rebuild_oracle() {
        let f = parse("((1+2)*(3-4))", Domain::Arithmetic).unwrap();
        let (out, trace) = run_fastnrs(&f, &OracleSegmenter, &OracleSolver, &policy(), 3);
        assert_eq!(out.unwrap().render(), "-3");
        // First iteration replaced both leaves in order.
        let first: Vec<_> = trace.steps.iter().filter(|s| s.index == 0).collect();
        assert_eq!(first.len(), 2);
        assert!(first.iter().all(|s| s.replaced == Some(true)));
    }

    #[test]
    fn nested_sum_takes_three_rewrite_iterations_plus_omega() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        let (out, trace) = run_fastnrs(&f, &OracleSegmenter, &OracleSolver, &policy(), 3);
        assert_eq!(out.unwrap().render(), "6");
        let iters: std::collections::HashSet<_> =
            trace.steps.iter().map(|s| s.index).collect();
        assert_eq!(iters.len(), 4);
    }

    #[test]
    fn oracle_runs_match_reduce_fully_and_never_miss() {
        use crate::datagen::{generate_formula, GenSpec};
        for domain in Domain::ALL {
            for nesting in 1..=4 {
                for seed in 0..10 {
                    let f = generate_formula(&GenSpec {
                        domain,
                        nesting,
                        seed,
                        listops_args: 2,
                    });
                    let (out, trace) =
                        run_fastnrs(&f, &OracleSegmenter, &OracleSolver, &policy(), seed);
                    let (expect, _) = reduce_fully(&f).unwrap();
                    assert_eq!(out.unwrap().render(), expect.render());
                    assert_ne!(trace.status, RunStatus::Missing);
                }
            }
        }
    }

    #[test]
    fn iteration_count_tracks_depth_for_balanced_formulas() {
        // Fully nested chains reduce one level per iteration plus the
        // final ω pass.
        for d in 1..=6usize {
            let mut text = String::new();
            for _ in 0..d {
                text.push_str("(1+");
            }
            text.push('2');
            for _ in 0..d {
                text.push(')');
            }
            let f = parse(&text, Domain::Arithmetic).unwrap();
            let (_, trace) = run_fastnrs(&f, &OracleSegmenter, &OracleSolver, &policy(), 1);
            let iters: std::collections::HashSet<_> =
                trace.steps.iter().map(|s| s.index).collect();
            assert_eq!(iters.len(), d + 1);
        }
    }

    #[test]
    fn raising_theta_never_increases_replacements() {
        let f = parse("((1+2)*(3-4))", Domain::Arithmetic).unwrap();
        struct Shaky;
        impl crate::models::SolveModel for Shaky {
            fn solve(
                &self,
                leaf: &Formula,
                rng: &mut ChaCha8Rng,
            ) -> crate::models::SolverOutput {
                let mut out = OracleSolver.solve(leaf, rng);
                out.log_confidence = -(leaf.tokens.concat().len() as f64);
                out
            }
        }
        let mut last = usize::MAX;
        for theta in [-10.0, -6.0, -5.0, -3.0] {
            let (_, trace) =
                run_fastnrs(&f, &OracleSegmenter, &Shaky, &ReplacementPolicy { theta }, 1);
            let replaced =
                trace.steps.iter().filter(|s| s.replaced == Some(true)).count();
            assert!(replaced <= last);
            last = replaced;
        }
    }

    #[test]
    fn atomic_input_short_circuits_on_omega() {
        let f = parse("z", Domain::Logic).unwrap();
        let (out, trace) = run_fastnrs(&f, &OracleSegmenter, &OracleSolver, &policy(), 5);
        assert_eq!(out.unwrap().render(), "z");
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.status, RunStatus::Success);
    }
}
