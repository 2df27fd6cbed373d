//! The ground-truth convergent rewriting rules and the iterative reducer.

use super::domain::{Domain, OMEGA};
use super::formula::{Formula, LeafSpan, TermError};

/// Truncated remainder keeps the dividend's sign, so reduced values stay
/// inside the [-99, 99] token range.
pub fn mod100(v: i64) -> i64 {
    v % 100
}

fn logic_is_grounded(t: &str) -> bool {
    t == "True" || t == "False"
}

fn logic_atom(t: &str) -> bool {
    logic_is_grounded(t) || (t.len() == 1 && t.chars().all(|c| c.is_ascii_lowercase()))
}

fn apply_logic(tokens: &[String], rendered: &str) -> Result<Vec<String>, TermError> {
    let malformed = || TermError::MalformedLeaf(rendered.to_string());
    let stuck = || TermError::NoApplicableRule(rendered.to_string());
    match tokens {
        [o, not, x, c] if o == "(" && not == "NOT" && c == ")" => {
            if !logic_atom(x) {
                return Err(malformed());
            }
            match x.as_str() {
                "True" => Ok(vec!["False".to_string()]),
                "False" => Ok(vec!["True".to_string()]),
                _ => Err(stuck()),
            }
        }
        [o, x, op, y, c] if o == "(" && c == ")" && (op == "AND" || op == "OR") => {
            if !logic_atom(x) || !logic_atom(y) {
                return Err(malformed());
            }
            let and = op == "AND";
            let value = |t: &str| -> Vec<String> { vec![t.to_string()] };
            match (logic_is_grounded(x), logic_is_grounded(y)) {
                (true, true) => {
                    let (a, b) = (x == "True", y == "True");
                    let r = if and { a && b } else { a || b };
                    Ok(value(if r { "True" } else { "False" }))
                }
                // Absorbing and identity laws keep non-grounded literals
                // reducible: (x AND False) -> False, (x AND True) -> x,
                // (x OR True) -> True, (x OR False) -> x.
                (true, false) | (false, true) => {
                    let (g, l) = if logic_is_grounded(x) { (x, y) } else { (y, x) };
                    let absorb = (and && g == "False") || (!and && g == "True");
                    Ok(value(if absorb { g } else { l }))
                }
                // Idempotence: (x AND x) -> x, (x OR x) -> x.
                (false, false) if x == y => Ok(value(x)),
                (false, false) => Err(stuck()),
            }
        }
        _ => Err(malformed()),
    }
}

fn apply_listops(tokens: &[String], rendered: &str) -> Result<Vec<String>, TermError> {
    let malformed = || TermError::MalformedLeaf(rendered.to_string());
    if tokens.len() < 4 || tokens[0] != "[" || tokens[tokens.len() - 1] != "]" {
        return Err(malformed());
    }
    let op = &tokens[1];
    let mut digits = Vec::new();
    for t in &tokens[2..tokens.len() - 1] {
        match t.parse::<i64>() {
            Ok(d) if (0..=9).contains(&d) => digits.push(d),
            _ => return Err(malformed()),
        }
    }
    if digits.is_empty() {
        return Err(malformed());
    }
    let v = match op.as_str() {
        "MIN" => *digits.iter().min().unwrap(),
        "MAX" => *digits.iter().max().unwrap(),
        "SM" => digits.iter().sum::<i64>() % 10,
        _ => return Err(malformed()),
    };
    Ok(vec![v.to_string()])
}

fn apply_arithmetic(tokens: &[String], rendered: &str) -> Result<Vec<String>, TermError> {
    let malformed = || TermError::MalformedLeaf(rendered.to_string());
    match tokens {
        [o, x, op, y, c] if o == "(" && c == ")" => {
            let a: i64 = x.parse().map_err(|_| malformed())?;
            let b: i64 = y.parse().map_err(|_| malformed())?;
            if !(-99..=99).contains(&a) || !(-99..=99).contains(&b) {
                return Err(malformed());
            }
            let v = match op.as_str() {
                "+" => a + b,
                "-" => a - b,
                "*" => a * b,
                _ => return Err(malformed()),
            };
            Ok(vec![mod100(v).to_string()])
        }
        _ => Err(malformed()),
    }
}

/// Split a monomial token run into (coefficient, variables).
fn parse_monomial(tokens: &[String]) -> Option<(i64, Vec<String>)> {
    let coeff: i64 = tokens.first()?.parse().ok()?;
    if !(-99..=99).contains(&coeff) {
        return None;
    }
    let mut vars = Vec::new();
    let mut i = 1;
    while i < tokens.len() {
        if tokens[i] != "*" {
            return None;
        }
        let v = tokens.get(i + 1)?;
        if !["a", "b", "x", "y"].contains(&v.as_str()) {
            return None;
        }
        vars.push(v.clone());
        i += 2;
    }
    Some((coeff, vars))
}

fn apply_algebra(tokens: &[String], rendered: &str) -> Result<Vec<String>, TermError> {
    let malformed = || TermError::MalformedLeaf(rendered.to_string());
    if tokens.len() < 5 || tokens[0] != "(" || tokens[tokens.len() - 1] != ")" {
        return Err(malformed());
    }
    let inner = &tokens[1..tokens.len() - 1];
    // The infix operator is the `+` or `-` token that is not part of a
    // monomial: it follows a coefficient or a variable.
    let mut split = None;
    for (i, t) in inner.iter().enumerate() {
        if i == 0 {
            continue;
        }
        if (t == "+" || t == "-") && inner[i - 1] != "*" {
            split = Some(i);
            break;
        }
    }
    let split = split.ok_or_else(malformed)?;
    let (c1, v1) = parse_monomial(&inner[..split]).ok_or_else(malformed)?;
    let (c2, v2) = parse_monomial(&inner[split + 1..]).ok_or_else(malformed)?;
    if v1 != v2 {
        return Err(TermError::NoApplicableRule(rendered.to_string()));
    }
    let c = match inner[split].as_str() {
        "+" => c1 + c2,
        "-" => c1 - c2,
        _ => return Err(malformed()),
    };
    let mut out = vec![mod100(c).to_string()];
    for v in v1 {
        out.push("*".to_string());
        out.push(v);
    }
    Ok(out)
}

/// Map a leaf formula to its atomic value, or an atomic element to ω.
pub fn apply_rule(leaf: &Formula) -> Result<Formula, TermError> {
    if leaf.is_atomic() {
        // Values are fixed points; the Solver signals them with ω.
        return Ok(Formula { domain: leaf.domain, tokens: vec![OMEGA.to_string()] });
    }
    let rendered = leaf.render();
    let tokens = match leaf.domain {
        Domain::Logic => apply_logic(&leaf.tokens, &rendered)?,
        Domain::ListOps => apply_listops(&leaf.tokens, &rendered)?,
        Domain::Arithmetic => apply_arithmetic(&leaf.tokens, &rendered)?,
        Domain::Algebra => apply_algebra(&leaf.tokens, &rendered)?,
    };
    Ok(Formula { domain: leaf.domain, tokens })
}

/// One oracle rewrite step.
#[derive(Debug, Clone)]
pub struct ReduceStep {
    pub span: LeafSpan,
    pub value: Vec<String>,
    pub after: Formula,
}

/// Iteratively rewrite the last leaf span until the formula is atomic.
pub fn reduce_fully(f: &Formula) -> Result<(Formula, Vec<ReduceStep>), TermError> {
    let limit = 4 * f.operator_count() + 4;
    let mut current = f.clone();
    let mut steps = Vec::new();
    while !current.is_atomic() {
        if steps.len() >= limit {
            return Err(TermError::StepLimit(steps.len()));
        }
        let span = current
            .find_leaf_spans()
            .pop()
            .expect("non-atomic formula has at least one leaf span");
        let leaf = Formula { domain: current.domain, tokens: span.tokens.clone() };
        let value = apply_rule(&leaf)?;
        current = current.splice(span.start, span.end, &value.tokens);
        steps.push(ReduceStep { span, value: value.tokens, after: current.clone() });
    }
    Ok((current, steps))
}
