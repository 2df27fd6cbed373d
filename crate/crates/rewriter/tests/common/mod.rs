//! Independent oracles for the acceptance suite.
//!
//! `recursive_eval` computes a formula's value bottom-up over the parse
//! tree without touching `apply_rule` or `reduce_fully`; `naive_match`
//! re-derives the sliding agreement score without the one-hot matmul.
//! Keeping these routes separate is the whole point: the library is
//! checked against code that shares none of its mechanics.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rewriter::term::{apply_rule, Ast, Domain, Formula};

fn grounded(t: &str) -> bool {
    t == "True" || t == "False"
}

fn logic_value(op: &str, vals: &[Vec<String>]) -> Option<Vec<String>> {
    let one = |v: &str| Some(vec![v.to_string()]);
    if op == "NOT" {
        let [x] = vals else { return None };
        return match x.as_slice() {
            [t] if t == "True" => one("False"),
            [t] if t == "False" => one("True"),
            _ => None,
        };
    }
    let [x, y] = vals else { return None };
    let ([x], [y]) = (x.as_slice(), y.as_slice()) else { return None };
    let and = match op {
        "AND" => true,
        "OR" => false,
        _ => return None,
    };
    match (grounded(x), grounded(y)) {
        (true, true) => {
            let (a, b) = (x == "True", y == "True");
            one(if if and { a && b } else { a || b } { "True" } else { "False" })
        }
        (true, false) | (false, true) => {
            let (g, l) = if grounded(x) { (x, y) } else { (y, x) };
            if (and && g == "False") || (!and && g == "True") {
                one(g)
            } else {
                one(l)
            }
        }
        (false, false) if x == y => one(x),
        (false, false) => None,
    }
}

fn listops_value(op: &str, vals: &[Vec<String>]) -> Option<Vec<String>> {
    let mut digits = Vec::new();
    for v in vals {
        let [t] = v.as_slice() else { return None };
        let d: i64 = t.parse().ok()?;
        if !(0..=9).contains(&d) {
            return None;
        }
        digits.push(d);
    }
    let r = match op {
        "MIN" => *digits.iter().min()?,
        "MAX" => *digits.iter().max()?,
        "SM" => digits.iter().sum::<i64>() % 10,
        _ => return None,
    };
    Some(vec![r.to_string()])
}

fn arithmetic_value(op: &str, vals: &[Vec<String>]) -> Option<Vec<String>> {
    let [x, y] = vals else { return None };
    let ([x], [y]) = (x.as_slice(), y.as_slice()) else { return None };
    let a: i64 = x.parse().ok()?;
    let b: i64 = y.parse().ok()?;
    let v = match op {
        "+" => a + b,
        "-" => a - b,
        "*" => a * b,
        _ => return None,
    };
    Some(vec![(v % 100).to_string()])
}

fn monomial(tokens: &[String]) -> Option<(i64, Vec<String>)> {
    let coeff: i64 = tokens.first()?.parse().ok()?;
    let mut vars = Vec::new();
    let mut rest = tokens[1..].chunks(2);
    for pair in &mut rest {
        let [star, v] = pair else { return None };
        if star != "*" {
            return None;
        }
        vars.push(v.clone());
    }
    Some((coeff, vars))
}

fn algebra_value(op: &str, vals: &[Vec<String>]) -> Option<Vec<String>> {
    let [x, y] = vals else { return None };
    let (c1, v1) = monomial(x)?;
    let (c2, v2) = monomial(y)?;
    if v1 != v2 {
        return None;
    }
    let c = match op {
        "+" => c1 + c2,
        "-" => c1 - c2,
        _ => return None,
    };
    let mut out = vec![(c % 100).to_string()];
    for v in v1 {
        out.push("*".to_string());
        out.push(v);
    }
    Some(out)
}

/// Bottom-up evaluation over the parse tree; `None` means a stuck
/// sub-expression with no applicable rule.
pub fn recursive_eval(ast: &Ast, domain: Domain) -> Option<Vec<String>> {
    match ast {
        Ast::Atom(tokens) => Some(tokens.clone()),
        Ast::Node { op, args } => {
            let vals: Option<Vec<Vec<String>>> =
                args.iter().map(|a| recursive_eval(a, domain)).collect();
            let vals = vals?;
            match domain {
                Domain::Logic => logic_value(op, &vals),
                Domain::ListOps => listops_value(op, &vals),
                Domain::Arithmetic => arithmetic_value(op, &vals),
                Domain::Algebra => algebra_value(op, &vals),
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Order {
    Leftmost,
    Rightmost,
    Middle,
    Shuffled,
}

pub const ORDERS: [Order; 4] =
    [Order::Leftmost, Order::Rightmost, Order::Middle, Order::Shuffled];

/// Rewrite leaves to a normal form, picking the next leaf per `order`
/// instead of the engines' fixed last-leaf policy.
pub fn reduce_in_order(f: &Formula, order: Order, rng: &mut ChaCha8Rng) -> Option<Formula> {
    let limit = 4 * f.operator_count() + 4;
    let mut cur = f.clone();
    for _ in 0..=limit {
        if cur.is_atomic() {
            return Some(cur);
        }
        let spans = cur.find_leaf_spans();
        let span = match order {
            Order::Leftmost => spans.first()?,
            Order::Rightmost => spans.last()?,
            Order::Middle => &spans[spans.len() / 2],
            Order::Shuffled => &spans[rng.gen_range(0..spans.len())],
        };
        let leaf = Formula { domain: cur.domain, tokens: span.tokens.clone() };
        let value = apply_rule(&leaf).ok()?;
        cur = cur.splice(span.start, span.end, &value.tokens);
    }
    None
}

/// Reference sliding matcher: best (rightmost on ties) alignment of
/// `leaf` inside `f`, counting equal tokens.
pub fn naive_match(f: &[String], leaf: &[String]) -> (usize, usize, f64) {
    if leaf.is_empty() || leaf.len() > f.len() {
        return (0, 0, 0.0);
    }
    let mut best = (0usize, 0usize, 0.0f64);
    for o in 0..=f.len() - leaf.len() {
        let score = (0..leaf.len()).filter(|&i| f[o + i] == leaf[i]).count();
        if score >= best.1 {
            best = (o, score, score as f64 / leaf.len() as f64);
        }
    }
    best
}

/// Whether `leaf` occurs contiguously in `f`.
pub fn occurs_contiguously(f: &[String], leaf: &[String]) -> bool {
    !leaf.is_empty() && f.windows(leaf.len()).any(|w| w == leaf)
}
