//! Development and test split construction.
//!
//! Selector training covers top-level formulas of nesting 1-3, every
//! intermediate simplification produced while solving them, and atomic
//! elements. The OOD validation split holds nesting 4-6 formulas with
//! intermediate steps, balanced across the nesting levels of the
//! formulas. Solver splits pair leaf formulas with their values and
//! atomic elements with ω.

use super::gen::{generate_with_rng, substream};
use crate::term::{nesting_depth, reduce_fully, Domain, Formula, OMEGA};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    IdVal,
    OodVal,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Seq2Seq,
    Segmentation,
    Solver,
    EndToEnd,
}

/// One line of a JSONL dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub input: String,
    pub target: String,
    pub nesting: usize,
    pub split: Split,
    pub domain: Domain,
    pub mode: Mode,
}

/// A Selector input with both target forms.
#[derive(Debug, Clone)]
pub struct SelectorExample {
    pub tokens: Vec<String>,
    /// The last leaf formula occurring in the input (seq2seq target).
    pub target_leaf: Vec<String>,
    /// Positive over every token that is part of a leaf formula.
    pub mask: Vec<bool>,
    pub nesting: usize,
}

impl SelectorExample {
    fn from_formula(f: &Formula) -> SelectorExample {
        let spans = f.find_leaf_spans();
        let mut mask = vec![false; f.len()];
        for s in &spans {
            for b in &mut mask[s.start..s.end] {
                *b = true;
            }
        }
        let last = spans.last().expect("at least one span");
        SelectorExample {
            tokens: f.tokens.clone(),
            target_leaf: last.tokens.clone(),
            mask,
            nesting: nesting_depth(f).expect("generated formulas are valid"),
        }
    }
}

#[derive(Debug)]
pub struct SelectorDataset {
    pub domain: Domain,
    /// Train records grouped by nesting level (0 = atomic); batches draw
    /// uniformly over groups, then uniformly within a group.
    pub train_groups: Vec<Vec<SelectorExample>>,
    pub id_val: Vec<SelectorExample>,
    pub ood_val: Vec<SelectorExample>,
}

#[derive(Debug, Clone)]
pub struct SolverExample {
    pub input: String,
    pub target: String,
    pub is_atomic: bool,
}

#[derive(Debug)]
pub struct SolverDataset {
    pub domain: Domain,
    pub train_leaf: Vec<SolverExample>,
    pub train_atomic: Vec<SolverExample>,
    pub id_val: Vec<SolverExample>,
}

#[derive(Debug, Clone)]
pub struct TestRecord {
    pub input: Formula,
    pub target: String,
    pub nesting: usize,
}

/// Per-split unique-sample targets. The published split sizes are scale
/// references; these defaults are desk-scale and recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train_toplevel_per_nesting: usize,
    pub id_val_toplevel_per_nesting: usize,
    pub ood_val_total: usize,
    pub solver_train: usize,
    pub solver_val: usize,
    pub test_per_nesting: usize,
    pub listops_args: usize,
    /// Resampling budget per unique sample before giving up on a split
    /// target (small spaces saturate).
    pub retry_factor: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        DatasetSizes {
            train_toplevel_per_nesting: 1200,
            id_val_toplevel_per_nesting: 60,
            ood_val_total: 900,
            solver_train: 6000,
            solver_val: 1500,
            test_per_nesting: 100,
            listops_args: 3,
            retry_factor: 30,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(seed, stream))
}

/// Generate up to `count` unique top-level formulas of one nesting level.
fn unique_formulas(
    domain: Domain,
    nesting: usize,
    count: usize,
    listops_args: usize,
    seed: u64,
    stream: &mut u64,
    seen: &mut HashSet<String>,
    retry_factor: usize,
) -> Vec<Formula> {
    let mut out = Vec::new();
    let budget = count * retry_factor;
    let mut tries = 0;
    while out.len() < count && tries < budget {
        let mut rng = rng_for(seed, *stream);
        *stream += 1;
        tries += 1;
        let f = generate_with_rng(domain, nesting, listops_args, &mut rng);
        if seen.insert(f.render()) {
            out.push(f);
        }
    }
    out
}

/// All distinct formulas along one solution trace, input included,
/// final atomic value excluded.
fn trace_formulas(f: &Formula) -> Vec<Formula> {
    let (_, steps) = reduce_fully(f).expect("generated formulas reduce");
    let mut out = vec![f.clone()];
    for s in &steps {
        if !s.after.is_atomic() {
            out.push(s.after.clone());
        }
    }
    out
}

/// Atomic-element formulas of a domain (sampled for algebra where the
/// monomial space is large).
fn atomic_formulas(domain: Domain, seed: u64) -> Vec<Formula> {
    match domain {
        Domain::Algebra => {
            let mut rng = rng_for(seed, 0xa70);
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            while out.len() < 120 {
                let f = generate_with_rng(domain, 0, 2, &mut rng);
                if seen.insert(f.render()) {
                    out.push(f);
                }
            }
            out
        }
        _ => domain
            .atomic_values()
            .into_iter()
            .map(|v| {
                crate::term::parse(&v, domain).expect("atomic values parse")
            })
            .collect(),
    }
}

pub fn build_selector_dataset(
    domain: Domain,
    sizes: &DatasetSizes,
    seed: u64,
) -> SelectorDataset {
    let mut seen = HashSet::new();
    let mut stream = 1u64;
    let max_train = domain.max_train_nesting();

    let collect = |nesting: usize,
                       toplevel: usize,
                       seen: &mut HashSet<String>,
                       stream: &mut u64|
     -> Vec<SelectorExample> {
        let tops = unique_formulas(
            domain,
            nesting,
            toplevel,
            sizes.listops_args,
            seed,
            stream,
            seen,
            sizes.retry_factor,
        );
        let mut out = Vec::new();
        for top in &tops {
            for f in trace_formulas(top) {
                // Intermediates of different formulas collide; keep the
                // first occurrence only (exact-string uniqueness).
                if f.render() == top.render() || seen.insert(f.render()) {
                    out.push(SelectorExample::from_formula(&f));
                }
            }
        }
        out
    };

    let mut train_records = Vec::new();
    for nesting in 1..=max_train {
        train_records.extend(collect(
            nesting,
            sizes.train_toplevel_per_nesting,
            &mut seen,
            &mut stream,
        ));
    }
    for f in atomic_formulas(domain, seed) {
        if seen.insert(f.render()) {
            train_records.push(SelectorExample::from_formula(&f));
        }
    }
    let mut train_groups: Vec<Vec<SelectorExample>> = vec![Vec::new(); max_train + 1];
    for r in train_records {
        train_groups[r.nesting.min(max_train)].push(r);
    }

    let mut id_val = Vec::new();
    for nesting in 1..=max_train {
        id_val.extend(collect(
            nesting,
            sizes.id_val_toplevel_per_nesting,
            &mut seen,
            &mut stream,
        ));
    }

    // OOD validation: nesting 4-6 formulas plus their intermediate steps,
    // balanced across the nesting level of each record.
    let max_ood = *domain.ood_val_nesting().end();
    let mut by_level: Vec<Vec<SelectorExample>> = vec![Vec::new(); max_ood + 1];
    let per_level = sizes.ood_val_total / max_ood;
    let toplevel_per_ood = per_level.max(1) * 2;
    for nesting in domain.ood_val_nesting() {
        for r in collect(nesting, toplevel_per_ood, &mut seen, &mut stream) {
            by_level[r.nesting].push(r);
        }
    }
    let mut shuffle_rng = rng_for(seed, 0x00d);
    let mut ood_val = Vec::new();
    for level in by_level.iter_mut().skip(1) {
        level.shuffle(&mut shuffle_rng);
        ood_val.extend(level.drain(..level.len().min(per_level)));
    }

    SelectorDataset { domain, train_groups, id_val, ood_val }
}

/// The full logic rule space is small and closed; enumerate it exactly.
fn logic_leaf_pairs() -> Vec<SolverExample> {
    let mut atoms: Vec<String> = ('a'..='z').map(|c| c.to_string()).collect();
    atoms.push("True".into());
    atoms.push("False".into());
    let mut out = Vec::new();
    for op in ["AND", "OR"] {
        for x in &atoms {
            for y in &atoms {
                let text = format!("({x} {op} {y})");
                let leaf = crate::term::parse(&text, Domain::Logic).unwrap();
                if let Ok(v) = crate::term::apply_rule(&leaf) {
                    out.push(SolverExample {
                        input: text,
                        target: v.render(),
                        is_atomic: false,
                    });
                }
            }
        }
    }
    for g in ["True", "False"] {
        let text = format!("(NOT {g})");
        let leaf = crate::term::parse(&text, Domain::Logic).unwrap();
        let v = crate::term::apply_rule(&leaf).unwrap();
        out.push(SolverExample { input: text, target: v.render(), is_atomic: false });
    }
    out
}

pub fn build_solver_dataset(domain: Domain, sizes: &DatasetSizes, seed: u64) -> SolverDataset {
    let mut leaves: Vec<SolverExample> = match domain {
        Domain::Logic => logic_leaf_pairs(),
        _ => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            let target = sizes.solver_train + sizes.solver_val;
            let budget = target * sizes.retry_factor;
            let mut stream = 0x50_000u64;
            let mut tries = 0;
            while out.len() < target && tries < budget {
                let mut rng = rng_for(seed, stream);
                stream += 1;
                tries += 1;
                let f = generate_with_rng(domain, 1, sizes.listops_args, &mut rng);
                if seen.insert(f.render()) {
                    let v = crate::term::apply_rule(&f).expect("generated leaves reduce");
                    out.push(SolverExample {
                        input: f.render(),
                        target: v.render(),
                        is_atomic: false,
                    });
                }
            }
            out
        }
    };
    let mut atomics: Vec<SolverExample> = atomic_formulas(domain, seed)
        .into_iter()
        .map(|f| SolverExample {
            input: f.render(),
            target: OMEGA.to_string(),
            is_atomic: true,
        })
        .collect();

    // Hold out a validation slice from both kinds.
    let mut rng = rng_for(seed, 0x501);
    leaves.shuffle(&mut rng);
    atomics.shuffle(&mut rng);
    let leaf_val = (leaves.len() * 225 / 1000).max(1);
    let atom_val = (atomics.len() * 225 / 1000).max(1);
    let id_val: Vec<SolverExample> = leaves
        .drain(..leaf_val)
        .chain(atomics.drain(..atom_val))
        .collect();
    SolverDataset { domain, train_leaf: leaves, train_atomic: atomics, id_val }
}

/// Test sets: `test_per_nesting` unique formulas per nesting level up to
/// the domain ceiling. Development inputs are avoided where the formula
/// space allows it; at shallow nesting the space can be smaller than the
/// development draw, in which case uniqueness within the test set is the
/// only guarantee (mirroring the shipped test-set contract).
pub fn build_test_set(
    domain: Domain,
    sizes: &DatasetSizes,
    seed: u64,
    dev_inputs: &HashSet<String>,
) -> Vec<TestRecord> {
    let mut out = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut stream = 0x7e57_0000u64;
    for nesting in 1..=domain.test_nesting_ceiling() {
        let mut found = 0;
        let budget = sizes.test_per_nesting * sizes.retry_factor * 10;
        for allow_dev_overlap in [false, true] {
            let mut tries = 0;
            while found < sizes.test_per_nesting && tries < budget {
                let mut rng = rng_for(seed, stream);
                stream += 1;
                tries += 1;
                let f = generate_with_rng(domain, nesting, sizes.listops_args, &mut rng);
                let rendered = f.render();
                if !allow_dev_overlap && dev_inputs.contains(&rendered) {
                    continue;
                }
                if !seen.insert(rendered) {
                    continue;
                }
                let (value, _) = reduce_fully(&f).expect("generated formulas reduce");
                out.push(TestRecord { input: f, target: value.render(), nesting });
                found += 1;
            }
        }
        assert_eq!(
            found, sizes.test_per_nesting,
            "unable to draw {} unique {domain} test formulas at nesting {nesting}",
            sizes.test_per_nesting
        );
    }
    out
}

/// Every rendered input string of the selector development splits.
pub fn selector_inputs(ds: &SelectorDataset) -> HashSet<String> {
    let mut set = HashSet::new();
    let all = ds
        .train_groups
        .iter()
        .flatten()
        .chain(ds.id_val.iter())
        .chain(ds.ood_val.iter());
    for r in all {
        set.insert(Formula { domain: ds.domain, tokens: r.tokens.clone() }.render());
    }
    set
}

fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Flatten a selector dataset into JSONL records for one mode.
pub fn selector_records(ds: &SelectorDataset, mode: Mode) -> Vec<DatasetRecord> {
    let mut out = Vec::new();
    let push = |r: &SelectorExample, split: Split, out: &mut Vec<DatasetRecord>| {
        let input = Formula { domain: ds.domain, tokens: r.tokens.clone() }.render();
        let target = match mode {
            Mode::Seq2Seq => {
                Formula { domain: ds.domain, tokens: r.target_leaf.clone() }.render()
            }
            Mode::Segmentation => mask_string(&r.mask),
            _ => unreachable!("selector modes only"),
        };
        out.push(DatasetRecord {
            input,
            target,
            nesting: r.nesting,
            split,
            domain: ds.domain,
            mode,
        });
    };
    for r in ds.train_groups.iter().flatten() {
        push(r, Split::Train, &mut out);
    }
    for r in &ds.id_val {
        push(r, Split::IdVal, &mut out);
    }
    for r in &ds.ood_val {
        push(r, Split::OodVal, &mut out);
    }
    out
}

pub fn solver_records(ds: &SolverDataset) -> Vec<DatasetRecord> {
    let rec = |r: &SolverExample, split: Split| DatasetRecord {
        input: r.input.clone(),
        target: r.target.clone(),
        nesting: if r.is_atomic { 0 } else { 1 },
        split,
        domain: ds.domain,
        mode: Mode::Solver,
    };
    ds.train_leaf
        .iter()
        .chain(ds.train_atomic.iter())
        .map(|r| rec(r, Split::Train))
        .chain(ds.id_val.iter().map(|r| rec(r, Split::IdVal)))
        .collect()
}

pub fn test_records(domain: Domain, records: &[TestRecord]) -> Vec<DatasetRecord> {
    records
        .iter()
        .map(|r| DatasetRecord {
            input: r.input.render(),
            target: r.target.clone(),
            nesting: r.nesting,
            split: Split::Test,
            domain,
            mode: Mode::EndToEnd,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse;

    #[test]
    fn selector_targets_are_the_rightmost_leaf_and_occur_in_the_input() {
        let sizes = DatasetSizes {
            train_toplevel_per_nesting: 40,
            id_val_toplevel_per_nesting: 10,
            ood_val_total: 60,
            ..DatasetSizes::default()
        };
        let ds = build_selector_dataset(Domain::Arithmetic, &sizes, 11);
        for r in ds.train_groups.iter().flatten().chain(ds.ood_val.iter()) {
            let f = Formula { domain: Domain::Arithmetic, tokens: r.tokens.clone() };
            let spans = f.find_leaf_spans();
            assert_eq!(spans.last().unwrap().tokens, r.target_leaf);
            // Mask positives re-parse as leaf formulas.
            for s in &spans {
                assert!(r.mask[s.start..s.end].iter().all(|&b| b));
            }
            let expected: usize = spans.iter().map(|s| s.end - s.start).sum();
            assert_eq!(r.mask.iter().filter(|&&b| b).count(), expected);
        }
    }

    #[test]
    fn nested_sum_mask_shape() {
        let f = parse("(12+(3-(4+5)))", Domain::Arithmetic).unwrap();
        let r = SelectorExample::from_formula(&f);
        assert_eq!(mask_string(&r.mask), "0000001111100");
        assert_eq!(r.target_leaf.concat(), "(4+5)");
    }

    #[test]
    fn splits_are_string_disjoint() {
        let sizes = DatasetSizes {
            train_toplevel_per_nesting: 30,
            id_val_toplevel_per_nesting: 8,
            ood_val_total: 30,
            test_per_nesting: 5,
            ..DatasetSizes::default()
        };
        let ds = build_selector_dataset(Domain::ListOps, &sizes, 3);
        let train: HashSet<String> = ds
            .train_groups
            .iter()
            .flatten()
            .map(|r| r.tokens.concat())
            .collect();
        for r in ds.id_val.iter().chain(ds.ood_val.iter()) {
            assert!(!train.contains(&r.tokens.concat()));
        }
        let dev = selector_inputs(&ds);
        let test = build_test_set(Domain::ListOps, &sizes, 3, &dev);
        for t in &test {
            assert!(!dev.contains(&t.input.render()));
        }
    }

    #[test]
    fn test_sets_have_exact_per_nesting_counts_and_oracle_targets() {
        let sizes = DatasetSizes { test_per_nesting: 5, ..DatasetSizes::default() };
        let test = build_test_set(Domain::Arithmetic, &sizes, 9, &HashSet::new());
        assert_eq!(test.len(), 5 * 6);
        for nesting in 1..=6 {
            assert_eq!(test.iter().filter(|r| r.nesting == nesting).count(), 5);
        }
        for r in &test {
            let (v, _) = reduce_fully(&r.input).unwrap();
            assert_eq!(v.render(), r.target);
        }
    }

    #[test]
    fn logic_solver_space_is_enumerated_exhaustively() {
        let ds = build_solver_dataset(Domain::Logic, &DatasetSizes::default(), 1);
        let total = ds.train_leaf.len() + ds.train_atomic.len() + ds.id_val.len();
        // 2 ops * (28*28 - 26*25 stuck literal pairs) + 2 NOT rules
        // + 28 atomic-to-ω pairs.
        assert_eq!(total, 2 * (28 * 28 - 26 * 25) + 2 + 28);
        for r in ds.train_leaf.iter().chain(ds.id_val.iter()) {
            assert!(!r.input.is_empty());
        }
    }

    #[test]
    fn solver_records_round_trip_through_the_oracle() {
        let sizes =
            DatasetSizes { solver_train: 200, solver_val: 50, ..DatasetSizes::default() };
        let ds = build_solver_dataset(Domain::Arithmetic, &sizes, 5);
        for r in ds.train_leaf.iter().take(50) {
            let f = parse(&r.input, Domain::Arithmetic).unwrap();
            assert_eq!(crate::term::apply_rule(&f).unwrap().render(), r.target);
        }
        for r in &ds.train_atomic {
            assert_eq!(r.target, OMEGA);
        }
    }

    #[test]
    fn atomic_selector_records_select_the_whole_input() {
        let ds = build_selector_dataset(
            Domain::Logic,
            &DatasetSizes {
                train_toplevel_per_nesting: 10,
                id_val_toplevel_per_nesting: 2,
                ood_val_total: 12,
                ..DatasetSizes::default()
            },
            2,
        );
        let atomics = &ds.train_groups[0];
        assert!(!atomics.is_empty());
        for r in atomics {
            assert_eq!(r.target_leaf, r.tokens);
            assert!(r.mask.iter().all(|&b| b));
        }
    }
}
