//! Problem domains and their vocabularies.

use serde::{Deserialize, Serialize};
use std::fmt;

/// End-of-computation symbol emitted by the Solver for atomic inputs.
pub const OMEGA: &str = "ω";

/// The four formula-simplification domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Logic,
    ListOps,
    Arithmetic,
    Algebra,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Logic,
        Domain::ListOps,
        Domain::Arithmetic,
        Domain::Algebra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Logic => "logic",
            Domain::ListOps => "listops",
            Domain::Arithmetic => "arithmetic",
            Domain::Algebra => "algebra",
        }
    }

    pub fn from_name(s: &str) -> Option<Domain> {
        match s {
            "logic" => Some(Domain::Logic),
            "listops" => Some(Domain::ListOps),
            "arithmetic" => Some(Domain::Arithmetic),
            "algebra" => Some(Domain::Algebra),
            _ => None,
        }
    }

    /// Maximum nesting level used for training formulas.
    pub fn max_train_nesting(self) -> usize {
        3
    }

    /// Nesting levels covered by the out-of-distribution validation set.
    pub fn ood_val_nesting(self) -> std::ops::RangeInclusive<usize> {
        4..=6
    }

    /// Highest nesting level present in the test set.
    pub fn test_nesting_ceiling(self) -> usize {
        match self {
            Domain::Logic => 12,
            _ => 6,
        }
    }

    /// Logic formulas are rendered with single spaces around infix
    /// operators; all other domains render without whitespace.
    pub fn spaced_rendering(self) -> bool {
        matches!(self, Domain::Logic)
    }

    /// Atomic value surfaces of the domain, in a stable order.
    pub fn atomic_values(self) -> Vec<String> {
        match self {
            Domain::Logic => {
                let mut v: Vec<String> = ('a'..='z').map(|c| c.to_string()).collect();
                v.push("True".into());
                v.push("False".into());
                v
            }
            Domain::ListOps => (0..=9).map(|d| d.to_string()).collect(),
            // Algebra atomic values are monomials built from these
            // coefficient tokens plus variable tokens.
            Domain::Arithmetic | Domain::Algebra => (-99..=99).map(|n| n.to_string()).collect(),
        }
    }

    /// Operator token surfaces of the domain.
    pub fn operators(self) -> &'static [&'static str] {
        match self {
            Domain::Logic => &["AND", "OR", "NOT"],
            Domain::ListOps => &["MIN", "MAX", "SM"],
            Domain::Arithmetic => &["+", "-", "*"],
            Domain::Algebra => &["+", "-"],
        }
    }

    /// Bracket token surfaces (open, close).
    pub fn brackets(self) -> (&'static str, &'static str) {
        match self {
            Domain::ListOps => ("[", "]"),
            _ => ("(", ")"),
        }
    }

    /// Algebra variable tokens.
    pub fn variables(self) -> &'static [&'static str] {
        match self {
            Domain::Algebra => &["a", "b", "x", "y"],
            _ => &[],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether a vocabulary tokenizes whole atomic values or single characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabKind {
    /// One token per atomic value, operator and bracket (Selector side).
    Formula,
    /// One token per character plus ω (Solver side).
    Character,
}

/// An ordered token alphabet with stable ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    pub kind: VocabKind,
    tokens: Vec<String>,
    #[serde(skip)]
    index: std::collections::HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(kind: VocabKind, tokens: Vec<String>) -> Self {
        let mut index = std::collections::HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            assert!(!t.is_empty(), "empty token surface");
            let prev = index.insert(t.clone(), i);
            assert!(prev.is_none(), "duplicate token surface {t:?}");
        }
        Vocabulary { kind, tokens, index }
    }

    /// Formula-level vocabulary for one domain.
    pub fn formula_level(domain: Domain) -> Self {
        let mut tokens = Vec::new();
        let (open, close) = domain.brackets();
        tokens.push(open.to_string());
        tokens.push(close.to_string());
        for op in domain.operators() {
            tokens.push(op.to_string());
        }
        for v in domain.variables() {
            tokens.push(v.to_string());
        }
        for a in domain.atomic_values() {
            if !tokens.contains(&a) {
                tokens.push(a);
            }
        }
        Vocabulary::new(VocabKind::Formula, tokens)
    }

    /// Character-level vocabulary for one domain, including ω.
    pub fn character_level(domain: Domain) -> Self {
        let mut chars: Vec<char> = Vec::new();
        let push_str = |s: &str, chars: &mut Vec<char>| {
            for c in s.chars() {
                if !chars.contains(&c) {
                    chars.push(c);
                }
            }
        };
        let (open, close) = domain.brackets();
        push_str(open, &mut chars);
        push_str(close, &mut chars);
        for op in domain.operators() {
            push_str(op, &mut chars);
        }
        for v in domain.variables() {
            push_str(v, &mut chars);
        }
        for a in domain.atomic_values() {
            push_str(&a, &mut chars);
        }
        if domain.spaced_rendering() {
            push_str(" ", &mut chars);
        }
        if domain == Domain::Algebra {
            push_str("*", &mut chars);
        }
        let mut tokens: Vec<String> = chars.into_iter().map(|c| c.to_string()).collect();
        tokens.push(OMEGA.to_string());
        Vocabulary::new(VocabKind::Character, tokens)
    }

    /// Union of the four single-domain vocabularies, with ids assigned by
    /// concatenating the domain alphabets in `Domain::ALL` order and
    /// dropping duplicates. Ids are stable across runs.
    pub fn multi_domain(kind: VocabKind) -> Self {
        let mut tokens: Vec<String> = Vec::new();
        for d in Domain::ALL {
            let v = match kind {
                VocabKind::Formula => Vocabulary::formula_level(d),
                VocabKind::Character => Vocabulary::character_level(d),
            };
            for t in v.tokens {
                if !tokens.contains(&t) {
                    tokens.push(t);
                }
            }
        }
        Vocabulary::new(kind, tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn surfaces(&self) -> &[String] {
        &self.tokens
    }

    /// Encode a sequence of token surfaces.
    pub fn encode(&self, tokens: &[String]) -> Option<Vec<usize>> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Encode a rendered string character by character.
    pub fn encode_chars(&self, text: &str) -> Option<Vec<usize>> {
        debug_assert_eq!(self.kind, VocabKind::Character);
        text.chars().map(|c| self.id(&c.to_string())).collect()
    }

    /// A short stable hash of the token list, used to pair checkpoints
    /// with compatible datasets.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in &self.tokens {
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_vocab_contains_signed_integers_and_operators() {
        let v = Vocabulary::formula_level(Domain::Arithmetic);
        for t in ["(", ")", "+", "-", "*", "-99", "0", "99", "-1"] {
            assert!(v.id(t).is_some(), "missing {t}");
        }
        assert_eq!(v.len(), 2 + 3 + 199);
    }

    #[test]
    fn ids_are_unique_and_stable() {
        let a = Vocabulary::formula_level(Domain::Logic);
        let b = Vocabulary::formula_level(Domain::Logic);
        assert_eq!(a.surfaces(), b.surfaces());
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn multi_domain_is_union_with_stable_ids() {
        let multi = Vocabulary::multi_domain(VocabKind::Formula);
        for d in Domain::ALL {
            let v = Vocabulary::formula_level(d);
            for t in v.surfaces() {
                assert!(multi.id(t).is_some(), "missing {t} from {d}");
            }
        }
        let again = Vocabulary::multi_domain(VocabKind::Formula);
        assert_eq!(multi.surfaces(), again.surfaces());
    }

    #[test]
    fn character_vocab_has_omega_but_formula_vocab_does_not() {
        for d in Domain::ALL {
            assert!(Vocabulary::character_level(d).id(OMEGA).is_some());
            assert!(Vocabulary::formula_level(d).id(OMEGA).is_none());
        }
    }
}
