//! Symbolic formulas and the ground-truth convergent rewriting system.

pub mod domain;
pub mod formula;
pub mod rules;

pub use domain::{Domain, VocabKind, Vocabulary, OMEGA};
pub use formula::{
    lex, nesting_depth, parse, parse_ast, parse_tokens, Ast, Formula, LeafSpan, TermError,
};
pub use rules::{apply_rule, mod100, reduce_fully, ReduceStep};
