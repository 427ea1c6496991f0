//! Expression trees: the formulas every other module scores, fits and mutates.
//!
//! An [`Expression`] is an immutable tree of variables, constants and unary or
//! binary operators. Nodes are addressed either by preorder index (used by the
//! search operators) or by [`NodePath`] (child indices from the root, used by
//! per-node reporting and noise streams).

pub(crate) mod eval;
mod parse;
mod print;

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use eval::{evaluate, EvalResult};
pub use parse::{parse, parse_with_names, ParseError};

/// Single-argument operators.
///
/// `neg` and `inv` exist so that sign and reciprocal structure can be
/// expressed without introducing constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Neg,
    Inv,
}

/// Two-argument operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 9] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Abs,
        UnaryOp::Neg,
        UnaryOp::Inv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Neg => "neg",
            UnaryOp::Inv => "inv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        UnaryOp::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Real-valued application. Domain faults yield NaN or ±Inf rather than
    /// a guarded value.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => x.tan(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Abs => x.abs(),
            UnaryOp::Neg => -x,
            UnaryOp::Inv => 1.0 / x,
        }
    }
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Pow => "pow",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BinaryOp::ALL.into_iter().find(|op| op.name() == name)
    }

    /// `pow` of a negative base with a non-integer exponent is NaN.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }
}

/// A formula as an immutable tree.
///
/// Equality and hashing are structural, with constants compared by bit
/// pattern so that `Eq` is lawful.
#[derive(Debug, Clone)]
pub enum Expression {
    /// Zero-based input column.
    Variable(usize),
    Constant(f64),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        use Expression::*;
        match (self, other) {
            (Variable(a), Variable(b)) => a == b,
            (Constant(a), Constant(b)) => a.to_bits() == b.to_bits(),
            (Unary(oa, a), Unary(ob, b)) => oa == ob && a == b,
            (Binary(oa, la, ra), Binary(ob, lb, rb)) => oa == ob && la == lb && ra == rb,
            _ => false,
        }
    }
}

impl Eq for Expression {}

impl Hash for Expression {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Expression::Variable(i) => {
                state.write_u8(0);
                i.hash(state);
            }
            Expression::Constant(c) => {
                state.write_u8(1);
                c.to_bits().hash(state);
            }
            Expression::Unary(op, child) => {
                state.write_u8(2);
                op.hash(state);
                child.hash(state);
            }
            Expression::Binary(op, l, r) => {
                state.write_u8(3);
                op.hash(state);
                l.hash(state);
                r.hash(state);
            }
        }
    }
}

/// Serialised as its infix text.
impl Serialize for Expression {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Child indices from the root; the root is the empty path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(Vec<u8>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, index: u8) -> Self {
        let mut steps = self.0.clone();
        steps.push(index);
        NodePath(steps)
    }

    pub fn from_steps(steps: &[u8]) -> Self {
        NodePath(steps.to_vec())
    }

    pub fn steps(&self) -> &[u8] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for step in &self.0 {
            write!(f, "/{step}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for NodePath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "/" {
            return Ok(NodePath::root());
        }
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| format!("node path must start with '/': {s:?}"))?;
        rest.split('/')
            .map(|part| part.parse::<u8>().map_err(|e| format!("bad path step {part:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(NodePath)
    }
}

impl Serialize for NodePath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodePath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Expression {
    pub fn var(index: usize) -> Self {
        Expression::Variable(index)
    }

    pub fn constant(value: f64) -> Self {
        Expression::Constant(value)
    }

    pub fn unary(op: UnaryOp, child: Expression) -> Self {
        Expression::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expression, right: Expression) -> Self {
        Expression::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expression::Variable(_) | Expression::Constant(_))
    }

    pub fn children(&self) -> Vec<&Expression> {
        match self {
            Expression::Variable(_) | Expression::Constant(_) => Vec::new(),
            Expression::Unary(_, c) => vec![c],
            Expression::Binary(_, l, r) => vec![l, r],
        }
    }

    /// Number of symbols: operators, variables and constants.
    pub fn complexity(&self) -> usize {
        match self {
            Expression::Variable(_) | Expression::Constant(_) => 1,
            Expression::Unary(_, c) => 1 + c.complexity(),
            Expression::Binary(_, l, r) => 1 + l.complexity() + r.complexity(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expression::Variable(_) | Expression::Constant(_) => 1,
            Expression::Unary(_, c) => 1 + c.depth(),
            Expression::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Largest variable index plus one, or 0 for variable-free trees.
    pub fn arity(&self) -> usize {
        match self {
            Expression::Variable(i) => i + 1,
            Expression::Constant(_) => 0,
            Expression::Unary(_, c) => c.arity(),
            Expression::Binary(_, l, r) => l.arity().max(r.arity()),
        }
    }

    pub fn count_constants(&self) -> usize {
        self.preorder()
            .filter(|n| matches!(n, Expression::Constant(_)))
            .count()
    }

    pub fn count_operators(&self) -> usize {
        self.preorder().filter(|n| !n.is_leaf()).count()
    }

    /// Sorted distinct variable indices.
    pub fn distinct_variables(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .preorder()
            .filter_map(|n| match n {
                Expression::Variable(i) => Some(*i),
                _ => None,
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Iterates nodes in preorder (node, then children left to right).
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    /// Preorder nodes paired with their paths.
    pub fn nodes_with_paths(&self) -> Vec<(NodePath, &Expression)> {
        let mut out = Vec::with_capacity(self.complexity());
        fn walk<'a>(e: &'a Expression, path: NodePath, out: &mut Vec<(NodePath, &'a Expression)>) {
            let children = e.children();
            out.push((path.clone(), e));
            for (i, c) in children.into_iter().enumerate() {
                walk(c, path.child(i as u8), out);
            }
        }
        walk(self, NodePath::root(), &mut out);
        out
    }

    /// Subtree at the given preorder index.
    pub fn subtree(&self, index: usize) -> Option<&Expression> {
        self.preorder().nth(index)
    }

    pub fn subtree_at_path(&self, path: &NodePath) -> Option<&Expression> {
        let mut node = self;
        for &step in path.steps() {
            node = *node.children().get(step as usize)?;
        }
        Some(node)
    }

    /// Returns a copy with the subtree at preorder `index` replaced.
    /// Out-of-range indices return an unchanged copy.
    pub fn replace_subtree(&self, index: usize, replacement: &Expression) -> Expression {
        fn go(e: &Expression, target: usize, counter: &mut usize, rep: &Expression) -> Expression {
            if *counter == target {
                *counter += e.complexity();
                return rep.clone();
            }
            *counter += 1;
            match e {
                Expression::Variable(_) | Expression::Constant(_) => e.clone(),
                Expression::Unary(op, c) => Expression::unary(*op, go(c, target, counter, rep)),
                Expression::Binary(op, l, r) => {
                    let l = go(l, target, counter, rep);
                    let r = go(r, target, counter, rep);
                    Expression::binary(*op, l, r)
                }
            }
        }
        go(self, index, &mut 0, replacement)
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a Expression>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a Expression;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        match node {
            Expression::Unary(_, c) => self.stack.push(c),
            Expression::Binary(_, l, r) => {
                self.stack.push(r);
                self.stack.push(l);
            }
            _ => {}
        }
        Some(node)
    }
}

/// Flattens root-level `add`/`sub` chains into signed terms.
///
/// Subtracted terms are wrapped in `neg`; products are never distributed.
/// Summing the returned terms reproduces the input's value.
pub fn additive_terms(e: &Expression) -> Vec<Expression> {
    fn collect(e: &Expression, negate: bool, out: &mut Vec<Expression>) {
        match e {
            Expression::Binary(BinaryOp::Add, l, r) => {
                collect(l, negate, out);
                collect(r, negate, out);
            }
            Expression::Binary(BinaryOp::Sub, l, r) => {
                collect(l, negate, out);
                collect(r, !negate, out);
            }
            Expression::Unary(UnaryOp::Neg, inner)
                if matches!(**inner, Expression::Binary(BinaryOp::Add | BinaryOp::Sub, _, _)) =>
            {
                collect(inner, !negate, out);
            }
            other if negate => out.push(negate_term(other)),
            other => out.push(other.clone()),
        }
    }
    let mut out = Vec::new();
    collect(e, false, &mut out);
    out
}

fn negate_term(e: &Expression) -> Expression {
    match e {
        Expression::Unary(UnaryOp::Neg, inner) => (**inner).clone(),
        other => Expression::unary(UnaryOp::Neg, other.clone()),
    }
}
