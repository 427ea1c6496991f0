//! Random trees, mutation and subtree crossover.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::OperatorSet;
use crate::expr::{BinaryOp, Expression};

/// Everything the variation operators need to know about the search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub operators: OperatorSet,
    /// Number of input variables.
    pub arity: usize,
    pub max_nodes: usize,
}

const RETRIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationKind {
    /// Replace a random subtree with a fresh tree of depth at most 2.
    ReplaceSubtree,
    /// Swap one operator for another of the same arity.
    ChangeOperator,
    /// Perturb an existing constant or wrap a node with a new one.
    Constant,
    /// Remove an operator node, keeping one of its children.
    DeleteNode,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::ReplaceSubtree,
        MutationKind::ChangeOperator,
        MutationKind::Constant,
        MutationKind::DeleteNode,
    ];
}

fn random_constant<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        let k: i32 = rng.random_range(1..=3);
        if rng.random_bool(0.5) {
            f64::from(k)
        } else {
            -f64::from(k)
        }
    } else {
        // two decimals keep printed formulas readable
        (rng.random_range(-5.0f64..5.0) * 100.0).round() / 100.0
    }
}

fn random_leaf<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Expression {
    if space.arity == 0 || rng.random_bool(space.operators.const_prob.clamp(0.0, 1.0)) {
        Expression::constant(random_constant(rng))
    } else {
        Expression::var(rng.random_range(0..space.arity))
    }
}

/// A random tree of depth at most `depth`.
///
/// `full` trees place operators on every level above the last; otherwise
/// leaves may appear early ("grow").
pub fn random_tree<R: Rng + ?Sized>(space: &SearchSpace, depth: usize, full: bool, rng: &mut R) -> Expression {
    let ops = &space.operators;
    let n_ops = ops.unary.len() + ops.binary.len();
    if depth <= 1 || n_ops == 0 {
        return random_leaf(space, rng);
    }
    if !full && rng.random_bool(0.3) {
        return random_leaf(space, rng);
    }
    let pick = rng.random_range(0..n_ops);
    if pick < ops.unary.len() {
        let child = random_tree(space, depth - 1, full, rng);
        Expression::unary(ops.unary[pick], child)
    } else {
        let op = ops.binary[pick - ops.unary.len()];
        let l = random_tree(space, depth - 1, full, rng);
        let r = random_tree(space, depth - 1, full, rng);
        Expression::binary(op, l, r)
    }
}

fn preorder_indices(e: &Expression, pred: impl Fn(&Expression) -> bool) -> Vec<usize> {
    e.preorder()
        .enumerate()
        .filter(|(_, n)| pred(n))
        .map(|(i, _)| i)
        .collect()
}

fn apply_kind<R: Rng + ?Sized>(
    kind: MutationKind,
    e: &Expression,
    space: &SearchSpace,
    rng: &mut R,
) -> Option<Expression> {
    let size = e.complexity();
    match kind {
        MutationKind::ReplaceSubtree => {
            let at = rng.random_range(0..size);
            let fresh = random_tree(space, 2, false, rng);
            Some(e.replace_subtree(at, &fresh))
        }
        MutationKind::ChangeOperator => {
            let ops = &space.operators;
            let internal = preorder_indices(e, |n| !n.is_leaf());
            let &at = internal.choose(rng)?;
            let replacement = match e.subtree(at)? {
                Expression::Unary(op, child) => {
                    let alternatives: Vec<_> = ops.unary.iter().filter(|o| *o != op).collect();
                    Expression::unary(**alternatives.choose(rng)?, (**child).clone())
                }
                Expression::Binary(op, l, r) => {
                    let alternatives: Vec<_> = ops.binary.iter().filter(|o| *o != op).collect();
                    Expression::binary(**alternatives.choose(rng)?, (**l).clone(), (**r).clone())
                }
                _ => return None,
            };
            Some(e.replace_subtree(at, &replacement))
        }
        MutationKind::Constant => {
            let constants = preorder_indices(e, |n| matches!(n, Expression::Constant(_)));
            if !constants.is_empty() && rng.random_bool(0.5) {
                let &at = constants.choose(rng)?;
                let Expression::Constant(v) = *e.subtree(at)? else {
                    return None;
                };
                let z: f64 = rng.sample(StandardNormal);
                let nudged = if v == 0.0 { 0.1 * z } else { v * (1.0 + 0.2 * z) };
                Some(e.replace_subtree(at, &Expression::constant(nudged)))
            } else {
                let at = rng.random_range(0..size);
                let target = e.subtree(at)?.clone();
                let c = Expression::constant(random_constant(rng));
                let wrapped = if rng.random_bool(0.5) {
                    Expression::binary(BinaryOp::Mul, c, target)
                } else {
                    Expression::binary(BinaryOp::Add, target, c)
                };
                Some(e.replace_subtree(at, &wrapped))
            }
        }
        MutationKind::DeleteNode => {
            let internal = preorder_indices(e, |n| !n.is_leaf());
            let &at = internal.choose(rng)?;
            let node = e.subtree(at)?;
            let &child = node.children().choose(rng)?;
            Some(e.replace_subtree(at, child))
        }
    }
}

/// One mutation, reporting which kind produced the result.
///
/// A kind that does not apply to `e` falls through to the next kind. Results
/// larger than `max_nodes` are retried; after the retries the input comes
/// back unchanged with kind `None`.
pub fn mutate_traced<R: Rng + ?Sized>(
    e: &Expression,
    space: &SearchSpace,
    rng: &mut R,
) -> (Expression, Option<MutationKind>) {
    for _ in 0..RETRIES {
        let start = rng.random_range(0..MutationKind::ALL.len());
        for offset in 0..MutationKind::ALL.len() {
            let kind = MutationKind::ALL[(start + offset) % MutationKind::ALL.len()];
            if let Some(out) = apply_kind(kind, e, space, rng) {
                if out.complexity() <= space.max_nodes {
                    return (out, Some(kind));
                }
                break;
            }
        }
    }
    (e.clone(), None)
}

pub fn mutate<R: Rng + ?Sized>(e: &Expression, space: &SearchSpace, rng: &mut R) -> Expression {
    mutate_traced(e, space, rng).0
}

/// Swaps uniformly chosen subtrees between `a` and `b`.
///
/// Falls back to copies of the parents when no size-respecting swap is
/// found within the retry limit.
pub fn crossover<R: Rng + ?Sized>(
    a: &Expression,
    b: &Expression,
    space: &SearchSpace,
    rng: &mut R,
) -> (Expression, Expression) {
    let (size_a, size_b) = (a.complexity(), b.complexity());
    for _ in 0..RETRIES {
        let i = rng.random_range(0..size_a);
        let j = rng.random_range(0..size_b);
        let (Some(sa), Some(sb)) = (a.subtree(i), b.subtree(j)) else {
            continue;
        };
        let new_a = size_a - sa.complexity() + sb.complexity();
        let new_b = size_b - sb.complexity() + sa.complexity();
        if new_a <= space.max_nodes && new_b <= space.max_nodes {
            return (a.replace_subtree(i, sb), b.replace_subtree(j, sa));
        }
    }
    (a.clone(), b.clone())
}
