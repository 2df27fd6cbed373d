//! Random formula generation.
//!
//! Every generated formula is nested at each level in exactly two points:
//! among all formulas on one nesting level, exactly two argument slots
//! hold formulas of the next level. Logic formulas are built so that the
//! rewriting rules always apply (non-grounded literals only meet grounded
//! values, equal literals, or absorbing constants), so generation never
//! needs rejection sampling.

use crate::term::{Ast, Domain, Formula};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Parameters for one formula draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    pub domain: Domain,
    pub nesting: usize,
    pub seed: u64,
    /// Number of arguments per ListOps operator.
    pub listops_args: usize,
}

impl GenSpec {
    pub fn new(domain: Domain, nesting: usize, seed: u64) -> Self {
        GenSpec { domain, nesting, seed, listops_args: 2 }
    }
}

/// Mix a seed with a stream index so each record draws from its own
/// deterministic substream.
pub fn substream(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic formula for the spec: same spec, same output.
pub fn generate_formula(spec: &GenSpec) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(
        spec.seed,
        (spec.nesting as u64) << 8 | spec.domain as u64,
    ));
    generate_with_rng(spec.domain, spec.nesting, spec.listops_args, &mut rng)
}

pub fn generate_with_rng(
    domain: Domain,
    nesting: usize,
    listops_args: usize,
    rng: &mut impl Rng,
) -> Formula {
    let gen = Generator { domain, listops_args };
    let ast = gen.ast(nesting, rng);
    Formula::from_ast(&ast, domain)
}

/// Plan node: operator class and which argument slots nest deeper.
struct PlanNode {
    unary: bool,
    arity: usize,
    nested: Vec<usize>,
}

struct Generator {
    domain: Domain,
    listops_args: usize,
}

/// Value tracking for the logic domain; other domains need none.
#[derive(Clone, PartialEq)]
enum LogicVal {
    Grounded(bool),
    Literal(String),
    NotLogic,
}

impl Generator {
    fn arity(&self) -> usize {
        match self.domain {
            Domain::ListOps => self.listops_args.max(2),
            _ => 2,
        }
    }

    fn ast(&self, nesting: usize, rng: &mut impl Rng) -> Ast {
        if nesting == 0 {
            return Ast::Atom(self.atom(rng, false));
        }
        let plan = self.plan(nesting, rng);
        let vars = self.algebra_vars(rng);
        let (ast, _) = self.materialize(&plan, 0, 0, false, &vars, rng);
        ast
    }

    /// Lay out internal nodes level by level: level 1 holds the root, and
    /// every level above the deepest receives exactly two nesting points.
    fn plan(&self, depth: usize, rng: &mut impl Rng) -> Vec<Vec<PlanNode>> {
        let mut levels: Vec<Vec<PlanNode>> = Vec::with_capacity(depth);
        // Root level.
        let root = if depth == 1 {
            self.plan_node(0, rng)
        } else {
            // Both nesting points sit in the root.
            self.plan_node(2, rng)
        };
        levels.push(vec![root]);
        for level in 2..=depth {
            let points = if level == depth {
                (0, 0)
            } else {
                match rng.gen_range(0..4u8) {
                    0 => (2, 0),
                    1 => (0, 2),
                    _ => (1, 1),
                }
            };
            levels.push(vec![self.plan_node(points.0, rng), self.plan_node(points.1, rng)]);
        }
        levels
    }

    fn plan_node(&self, points: usize, rng: &mut impl Rng) -> PlanNode {
        let unary =
            self.domain == Domain::Logic && points <= 1 && rng.gen_bool(0.25);
        let arity = if unary { 1 } else { self.arity() };
        let nested = rand::seq::index::sample(rng, arity, points).into_iter().collect::<Vec<_>>();
        let mut nested = nested;
        nested.sort_unstable();
        PlanNode { unary, arity, nested }
    }

    /// Offset of `node_idx`'s first child within the next level, given by
    /// the number of nesting points in earlier nodes of this level.
    fn child_base(level: &[PlanNode], node_idx: usize) -> usize {
        level[..node_idx].iter().map(|n| n.nested.len()).sum()
    }

    fn materialize(
        &self,
        plan: &[Vec<PlanNode>],
        level: usize,
        node_idx: usize,
        force_grounded: bool,
        vars: &[String],
        rng: &mut impl Rng,
    ) -> (Ast, LogicVal) {
        let node = &plan[level][node_idx];
        let child_base = Self::child_base(&plan[level], node_idx);

        if node.unary {
            // Logic NOT: argument must end up grounded.
            let (arg, val) = if node.nested.is_empty() {
                let g = rng.gen_bool(0.5);
                (Ast::Atom(vec![bool_token(g)]), LogicVal::Grounded(g))
            } else {
                self.materialize(plan, level + 1, child_base, true, vars, rng)
            };
            let out = match val {
                LogicVal::Grounded(b) => LogicVal::Grounded(!b),
                _ => unreachable!("NOT argument forced grounded"),
            };
            return (Ast::Node { op: "NOT".to_string(), args: vec![arg] }, out);
        }

        let op = self.pick_op(rng);
        let mut args: Vec<Option<(Ast, LogicVal)>> = vec![None; node.arity];
        // Build nested arguments first; when both nesting points share this
        // node, the later child is forced grounded so the eventual leaf
        // stays reducible whatever the first one evaluates to.
        for (i, &slot) in node.nested.iter().enumerate() {
            let force = self.domain == Domain::Logic
                && node.nested.len() == 2
                && (i == 1 || force_grounded);
            let child =
                self.materialize(plan, level + 1, child_base + i, force, vars, rng);
            args[slot] = Some(child);
        }
        // Fill the remaining slots with atoms under the domain constraints.
        if self.domain == Domain::Logic {
            let mut known: Vec<LogicVal> =
                args.iter().flatten().map(|(_, v)| v.clone()).collect();
            for a in args.iter_mut() {
                if a.is_none() {
                    let v = self.logic_atom_for(&op, &known, force_grounded, rng);
                    known.push(token_val(&v));
                    *a = Some((Ast::Atom(vec![v.clone()]), token_val(&v)));
                }
            }
        } else {
            for a in args.iter_mut() {
                if a.is_none() {
                    let toks = self.atom_with_vars(rng, vars);
                    *a = Some((Ast::Atom(toks), LogicVal::NotLogic));
                }
            }
        }
        let (asts, vals): (Vec<Ast>, Vec<LogicVal>) = args.into_iter().flatten().unzip();
        let value = if self.domain == Domain::Logic {
            logic_combine(&op, &vals[0], &vals[1])
        } else {
            LogicVal::NotLogic
        };
        (Ast::Node { op, args: asts }, value)
    }

    fn pick_op(&self, rng: &mut impl Rng) -> String {
        let ops: &[&str] = match self.domain {
            Domain::Logic => &["AND", "OR"],
            Domain::ListOps => &["MIN", "MAX", "SM"],
            Domain::Arithmetic => &["+", "-", "*"],
            Domain::Algebra => &["+", "-"],
        };
        ops[rng.gen_range(0..ops.len())].to_string()
    }

    /// Pick a logic atom compatible with the values already present in
    /// this node, and with the grounding requirement of the final result.
    fn logic_atom_for(
        &self,
        op: &str,
        known: &[LogicVal],
        force_grounded: bool,
        rng: &mut impl Rng,
    ) -> String {
        let absorbing = if op == "AND" { "False" } else { "True" };
        if force_grounded {
            // An absorbing constant grounds the leaf regardless of the
            // other argument.
            if known.iter().any(|v| matches!(v, LogicVal::Literal(_))) || rng.gen_bool(0.5) {
                return absorbing.to_string();
            }
            return bool_token(rng.gen_bool(0.5));
        }
        if let Some(LogicVal::Literal(l)) =
            known.iter().find(|v| matches!(v, LogicVal::Literal(_)))
        {
            // Grounded partner or the same literal keeps the rule set
            // applicable.
            return match rng.gen_range(0..3u8) {
                0 => l.clone(),
                1 => "True".to_string(),
                _ => "False".to_string(),
            };
        }
        self.random_logic_atom(rng)
    }

    fn random_logic_atom(&self, rng: &mut impl Rng) -> String {
        if rng.gen_bool(0.5) {
            bool_token(rng.gen_bool(0.5))
        } else {
            char::from(b'a' + rng.gen_range(0..26u8)).to_string()
        }
    }

    fn algebra_vars(&self, rng: &mut impl Rng) -> Vec<String> {
        if self.domain != Domain::Algebra {
            return Vec::new();
        }
        let all = ["a", "b", "x", "y"];
        let count = rng.gen_range(1..=4usize);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(rng, 4, count).into_iter().collect();
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].to_string()).collect()
    }

    fn atom(&self, rng: &mut impl Rng, _grounded: bool) -> Vec<String> {
        match self.domain {
            Domain::Logic => vec![self.random_logic_atom(rng)],
            Domain::ListOps => vec![rng.gen_range(0..=9i64).to_string()],
            Domain::Arithmetic => vec![rng.gen_range(-99..=99i64).to_string()],
            Domain::Algebra => {
                let vars = self.algebra_vars(rng);
                self.atom_with_vars(rng, &vars)
            }
        }
    }

    fn atom_with_vars(&self, rng: &mut impl Rng, vars: &[String]) -> Vec<String> {
        match self.domain {
            Domain::Algebra => {
                let mut toks = vec![rng.gen_range(-99..=99i64).to_string()];
                for v in vars {
                    toks.push("*".to_string());
                    toks.push(v.clone());
                }
                toks
            }
            _ => self.atom(rng, false),
        }
    }
}

fn bool_token(b: bool) -> String {
    if b { "True" } else { "False" }.to_string()
}

fn token_val(t: &str) -> LogicVal {
    match t {
        "True" => LogicVal::Grounded(true),
        "False" => LogicVal::Grounded(false),
        _ => LogicVal::Literal(t.to_string()),
    }
}

fn logic_combine(op: &str, a: &LogicVal, b: &LogicVal) -> LogicVal {
    use LogicVal::*;
    let and = op == "AND";
    match (a, b) {
        (Grounded(x), Grounded(y)) => Grounded(if and { *x && *y } else { *x || *y }),
        (Grounded(g), Literal(l)) | (Literal(l), Grounded(g)) => {
            let absorb = if and { !*g } else { *g };
            if absorb {
                Grounded(*g)
            } else {
                Literal(l.clone())
            }
        }
        (Literal(x), Literal(y)) if x == y => Literal(x.clone()),
        _ => unreachable!("generator never pairs distinct literals"),
    }
}
