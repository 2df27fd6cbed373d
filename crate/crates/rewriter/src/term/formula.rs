//! Token-level formulas: lexing, parsing, rendering and leaf-span search.

use super::domain::Domain;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TermError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("malformed leaf: {0}")]
    MalformedLeaf(String),
    #[error("no applicable rule for leaf: {0}")]
    NoApplicableRule(String),
    #[error("step limit exceeded after {0} rewrites")]
    StepLimit(usize),
}

/// A (possibly nested) expression as a flat token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    pub domain: Domain,
    pub tokens: Vec<String>,
}

/// A contiguous sub-sequence `[start, end)` that forms a leaf formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafSpan {
    pub start: usize,
    pub end: usize,
    pub tokens: Vec<String>,
}

/// Parse tree used for validation, depth computation and generation.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Atom(Vec<String>),
    Node { op: String, args: Vec<Ast> },
}

impl Ast {
    /// Nesting depth: 0 for atoms, 1 + max over arguments otherwise.
    pub fn depth(&self) -> usize {
        match self {
            Ast::Atom(_) => 0,
            Ast::Node { args, .. } => 1 + args.iter().map(Ast::depth).max().unwrap_or(0),
        }
    }

    /// Flatten back to the token sequence.
    pub fn tokens(&self, domain: Domain) -> Vec<String> {
        let mut out = Vec::new();
        self.push_tokens(domain, &mut out);
        out
    }

    fn push_tokens(&self, domain: Domain, out: &mut Vec<String>) {
        match self {
            Ast::Atom(toks) => out.extend(toks.iter().cloned()),
            Ast::Node { op, args } => {
                let (open, close) = domain.brackets();
                out.push(open.to_string());
                match domain {
                    Domain::ListOps => {
                        out.push(op.clone());
                        for a in args {
                            a.push_tokens(domain, out);
                        }
                    }
                    _ if op == "NOT" => {
                        out.push(op.clone());
                        args[0].push_tokens(domain, out);
                    }
                    _ => {
                        args[0].push_tokens(domain, out);
                        out.push(op.clone());
                        args[1].push_tokens(domain, out);
                    }
                }
                out.push(close.to_string());
            }
        }
    }
}

impl Formula {
    pub fn from_ast(ast: &Ast, domain: Domain) -> Formula {
        Formula { domain, tokens: ast.tokens(domain) }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// An atomic formula contains no brackets: a single value token, or a
    /// bare monomial in the algebra domain.
    pub fn is_atomic(&self) -> bool {
        let (open, _) = self.domain.brackets();
        !self.is_empty() && self.tokens.iter().all(|t| t != open)
    }

    /// Number of operator tokens, used by the rewrite step-limit guard.
    pub fn operator_count(&self) -> usize {
        let ops = self.domain.operators();
        match self.domain {
            // `*` inside monomials is not an operator application.
            Domain::Algebra => self
                .tokens
                .iter()
                .filter(|t| ops.contains(&t.as_str()) && t.as_str() != "*")
                .count(),
            _ => self.tokens.iter().filter(|t| ops.contains(&t.as_str())).count(),
        }
    }

    /// Canonical text rendering. Logic uses single spaces between tokens
    /// except after an opening and before a closing parenthesis; the other
    /// domains concatenate without whitespace.
    pub fn render(&self) -> String {
        if !self.domain.spaced_rendering() {
            return self.tokens.concat();
        }
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                let prev = &self.tokens[i - 1];
                let no_space = prev == "(" || t == ")";
                if !no_space {
                    out.push(' ');
                }
            }
            out.push_str(t);
        }
        out
    }

    /// Every maximal leaf-formula span, left to right. A leaf span is an
    /// innermost bracket group; for an atomic formula the single span
    /// covers the whole token sequence.
    pub fn find_leaf_spans(&self) -> Vec<LeafSpan> {
        if self.is_atomic() {
            return vec![LeafSpan { start: 0, end: self.len(), tokens: self.tokens.clone() }];
        }
        let (open, close) = self.domain.brackets();
        let mut spans = Vec::new();
        let mut last_open: Option<usize> = None;
        for (i, t) in self.tokens.iter().enumerate() {
            if t == open {
                last_open = Some(i);
            } else if t == close {
                if let Some(s) = last_open.take() {
                    spans.push(LeafSpan {
                        start: s,
                        end: i + 1,
                        tokens: self.tokens[s..=i].to_vec(),
                    });
                }
            }
        }
        spans
    }

    /// Replace `[start, end)` with `replacement`, keeping the domain.
    pub fn splice(&self, start: usize, end: usize, replacement: &[String]) -> Formula {
        let mut tokens = Vec::with_capacity(self.len() - (end - start) + replacement.len());
        tokens.extend(self.tokens[..start].iter().cloned());
        tokens.extend(replacement.iter().cloned());
        tokens.extend(self.tokens[end..].iter().cloned());
        Formula { domain: self.domain, tokens }
    }
}

fn is_int_token(t: &str) -> bool {
    let t = t.strip_prefix('-').unwrap_or(t);
    !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
}

/// Lex a rendered string into domain tokens.
pub fn lex(text: &str, domain: Domain) -> Result<Vec<String>, TermError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let err = |pos: usize, msg: &str| TermError::Syntax { pos, msg: msg.to_string() };
    while i < chars.len() {
        let c = chars[i];
        match domain {
            Domain::Logic => {
                if c == ' ' {
                    i += 1;
                } else if c == '(' || c == ')' {
                    tokens.push(c.to_string());
                    i += 1;
                } else if c.is_ascii_alphabetic() {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_alphabetic() {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    match word.as_str() {
                        "AND" | "OR" | "NOT" | "True" | "False" => tokens.push(word),
                        w if w.len() == 1 && w.chars().all(|c| c.is_ascii_lowercase()) => {
                            tokens.push(word)
                        }
                        _ => return Err(err(start, &format!("unknown word {word:?}"))),
                    }
                } else {
                    return Err(err(i, "illegal character"));
                }
            }
            Domain::ListOps => {
                if c == '[' || c == ']' {
                    tokens.push(c.to_string());
                    i += 1;
                } else if c.is_ascii_digit() {
                    tokens.push(c.to_string());
                    i += 1;
                } else if c.is_ascii_uppercase() {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_uppercase() {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    match word.as_str() {
                        "MIN" | "MAX" | "SM" => tokens.push(word),
                        _ => return Err(err(start, &format!("unknown operator {word:?}"))),
                    }
                } else {
                    return Err(err(i, "illegal character"));
                }
            }
            Domain::Arithmetic | Domain::Algebra => {
                if c == '(' || c == ')' || c == '+' || c == '*' {
                    tokens.push(c.to_string());
                    i += 1;
                } else if c == '-' {
                    // A minus is a sign when it starts a literal: at the
                    // beginning, after an opening paren, or after an
                    // operator token.
                    let signed = match tokens.last().map(String::as_str) {
                        None | Some("(") | Some("+") | Some("-") | Some("*") => true,
                        _ => false,
                    };
                    if signed {
                        let start = i;
                        i += 1;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                        if i == start + 1 {
                            return Err(err(start, "dangling sign"));
                        }
                        tokens.push(chars[start..i].iter().collect());
                    } else {
                        tokens.push("-".to_string());
                        i += 1;
                    }
                } else if c.is_ascii_digit() {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    tokens.push(chars[start..i].iter().collect());
                } else if domain == Domain::Algebra && "abxy".contains(c) {
                    tokens.push(c.to_string());
                    i += 1;
                } else {
                    return Err(err(i, "illegal character"));
                }
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [String],
    pos: usize,
    domain: Domain,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn bump(&mut self) -> Option<&'a str> {
        let t = self.tokens.get(self.pos).map(String::as_str);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: &str) -> TermError {
        TermError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn expect(&mut self, t: &str) -> Result<(), TermError> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            Some(got) => Err(TermError::Syntax {
                pos: self.pos - 1,
                msg: format!("expected {t:?}, found {got:?}"),
            }),
            None => Err(self.error(&format!("expected {t:?}, found end of input"))),
        }
    }

    fn atom(&mut self) -> Result<Ast, TermError> {
        match self.domain {
            Domain::Logic => match self.bump() {
                Some(t @ ("True" | "False")) => Ok(Ast::Atom(vec![t.to_string()])),
                Some(t) if t.len() == 1 && t.chars().all(|c| c.is_ascii_lowercase()) => {
                    Ok(Ast::Atom(vec![t.to_string()]))
                }
                _ => Err(self.error("expected atomic value")),
            },
            Domain::ListOps => match self.bump() {
                Some(t) if t.len() == 1 && t.chars().all(|c| c.is_ascii_digit()) => {
                    Ok(Ast::Atom(vec![t.to_string()]))
                }
                _ => Err(self.error("expected digit")),
            },
            Domain::Arithmetic => match self.bump() {
                Some(t) if is_int_token(t) => {
                    let v: i64 = t.parse().unwrap();
                    if (-99..=99).contains(&v) {
                        Ok(Ast::Atom(vec![t.to_string()]))
                    } else {
                        Err(self.error("integer out of range"))
                    }
                }
                _ => Err(self.error("expected integer")),
            },
            Domain::Algebra => {
                let mut toks = Vec::new();
                match self.bump() {
                    Some(t) if is_int_token(t) => toks.push(t.to_string()),
                    _ => return Err(self.error("expected coefficient")),
                }
                while self.peek() == Some("*") {
                    // Lookahead: `*` binds a variable inside a monomial.
                    match self.tokens.get(self.pos + 1).map(String::as_str) {
                        Some(v) if self.domain.variables().contains(&v) => {
                            self.bump();
                            toks.push("*".to_string());
                            toks.push(self.bump().unwrap().to_string());
                        }
                        _ => break,
                    }
                }
                Ok(Ast::Atom(toks))
            }
        }
    }

    fn expr(&mut self) -> Result<Ast, TermError> {
        let (open, close) = self.domain.brackets();
        if self.peek() != Some(open) {
            return self.atom();
        }
        self.expect(open)?;
        let ast = match self.domain {
            Domain::ListOps => {
                let op = match self.bump() {
                    Some(op @ ("MIN" | "MAX" | "SM")) => op.to_string(),
                    _ => return Err(self.error("expected list operator")),
                };
                let mut args = Vec::new();
                while self.peek() != Some(close) {
                    if self.peek().is_none() {
                        return Err(self.error("unbalanced brackets"));
                    }
                    args.push(self.expr()?);
                }
                if args.is_empty() {
                    return Err(self.error("operator without arguments"));
                }
                Ast::Node { op, args }
            }
            Domain::Logic if self.peek() == Some("NOT") => {
                self.bump();
                let arg = self.expr()?;
                Ast::Node { op: "NOT".to_string(), args: vec![arg] }
            }
            _ => {
                let lhs = self.expr()?;
                let op = match self.bump() {
                    Some(op) if self.domain.operators().contains(&op) && op != "NOT" => {
                        op.to_string()
                    }
                    _ => return Err(self.error("expected infix operator")),
                };
                let rhs = self.expr()?;
                Ast::Node { op, args: vec![lhs, rhs] }
            }
        };
        self.expect(close)?;
        Ok(ast)
    }
}

/// Parse a token sequence into a validated tree.
pub fn parse_tokens(tokens: &[String], domain: Domain) -> Result<Ast, TermError> {
    let mut p = Parser { tokens, pos: 0, domain };
    let ast = p.expr()?;
    if p.pos != tokens.len() {
        return Err(p.error("trailing tokens"));
    }
    Ok(ast)
}

/// Parse a rendered string into a token-level `Formula`.
pub fn parse(text: &str, domain: Domain) -> Result<Formula, TermError> {
    let tokens = lex(text, domain)?;
    parse_tokens(&tokens, domain)?;
    Ok(Formula { domain, tokens })
}

/// Parse straight to the tree form.
pub fn parse_ast(text: &str, domain: Domain) -> Result<Ast, TermError> {
    let tokens = lex(text, domain)?;
    parse_tokens(&tokens, domain)
}

/// Nesting depth of a formula.
pub fn nesting_depth(f: &Formula) -> Result<usize, TermError> {
    Ok(parse_tokens(&f.tokens, f.domain)?.depth())
}
