//! Heuristic formula search: shared candidate evaluation, the Pareto
//! archive, variation operators, and the two search drivers.

pub mod gp;
pub mod mcts;
pub mod ops;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::eic::{calculate_eic, EicConfig};
use crate::expr::{BinaryOp, Expression, UnaryOp};
use crate::fitting::{fit_or_sentinel, fitness_alpha, FitnessConfig, FittedModel};

pub use gp::{gp_search, GpConfig};
pub use mcts::{mcts_run, mcts_search, MctsConfig, MctsNode, MctsTree};
pub use ops::{crossover, mutate, mutate_traced, random_tree, MutationKind, SearchSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("search budget is empty")]
    BudgetZero,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset has no input columns")]
    NoInputs,
}

/// How long a search runs: a step count (generations for GP, iterations
/// for MCTS) or wall-clock seconds. Only step budgets are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Steps(usize),
    Seconds(f64),
}

impl Budget {
    pub fn check(&self) -> Result<(), SearchError> {
        match *self {
            Budget::Steps(0) => Err(SearchError::BudgetZero),
            Budget::Seconds(s) if !(s > 0.0) => Err(SearchError::BudgetZero),
            _ => Ok(()),
        }
    }

    fn exhausted(&self, steps_done: usize, started: Instant) -> bool {
        match *self {
            Budget::Steps(n) => steps_done >= n,
            Budget::Seconds(s) => started.elapsed().as_secs_f64() >= s,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Steps(n) => write!(f, "{n}"),
            Budget::Seconds(s) => write!(f, "{s}s"),
        }
    }
}

/// Accepts `60s`, `200gen`, `5000it` or a bare step count.
impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(secs) = s.strip_suffix('s').filter(|r| !r.ends_with('t')) {
            return secs
                .parse::<f64>()
                .map(Budget::Seconds)
                .map_err(|e| format!("bad seconds budget {s:?}: {e}"));
        }
        let digits = s
            .strip_suffix("gen")
            .or_else(|| s.strip_suffix("it"))
            .unwrap_or(s);
        digits
            .parse::<usize>()
            .map(Budget::Steps)
            .map_err(|e| format!("bad step budget {s:?}: {e}"))
    }
}

/// Operators and leaf law available to the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorSet {
    pub unary: Vec<UnaryOp>,
    pub binary: Vec<BinaryOp>,
    /// Probability that a fresh leaf is a constant rather than a variable.
    pub const_prob: f64,
}

impl Default for OperatorSet {
    fn default() -> Self {
        OperatorSet {
            unary: vec![UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Log, UnaryOp::Sqrt],
            binary: vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div],
            const_prob: 0.2,
        }
    }
}

/// An evaluated formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Structure manipulated by the search, before coefficient fitting.
    pub expr: Expression,
    /// The fitted formula the metrics describe.
    pub formula: Expression,
    pub model: FittedModel,
    pub eic: f64,
    pub fitness: f64,
    /// Node count of `formula`.
    pub complexity: usize,
}

impl Candidate {
    pub fn nmse(&self) -> f64 {
        self.model.nmse
    }

    pub fn r2(&self) -> f64 {
        self.model.r2
    }

    /// Recomputes fitness from the stored parts.
    pub fn recomputed_fitness(&self, cfg: &FitnessConfig) -> f64 {
        fitness_alpha(self.complexity, self.model.nmse, self.eic, cfg)
    }

    /// `true` if `self` is no worse on complexity and NMSE and strictly
    /// better on one. NMSE is compared at [`NMSE_RESOLUTION`].
    pub fn dominates(&self, other: &Candidate) -> bool {
        dominates((self.complexity, self.nmse()), (other.complexity, other.nmse()))
    }
}

/// NMSE values below this are round-off and compare equal in dominance.
pub const NMSE_RESOLUTION: f64 = 1e-14;

pub(crate) fn dominates(a: (usize, f64), b: (usize, f64)) -> bool {
    let (x, y) = (a.1.max(NMSE_RESOLUTION), b.1.max(NMSE_RESOLUTION));
    a.0 <= b.0 && x <= y && (a.0 < b.0 || x < y)
}

fn weakly_dominates(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 <= b.0 && a.1.max(NMSE_RESOLUTION) <= b.1.max(NMSE_RESOLUTION)
}

/// Fits, scores and caches candidates on one training set.
///
/// Metrics are keyed by the searched structure, so recurring structures are
/// fitted and EIC-scored once.
pub struct Evaluator<'a> {
    data: &'a Dataset,
    fitness: FitnessConfig,
    eic: EicConfig,
    cache: HashMap<Expression, Candidate>,
    evaluations: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a Dataset, fitness: FitnessConfig, eic: EicConfig) -> Self {
        Evaluator {
            data,
            fitness,
            eic,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    /// Number of distinct structures scored so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn score(data: &Dataset, fitness: &FitnessConfig, eic: &EicConfig, expr: &Expression) -> Candidate {
        let model = fit_or_sentinel(expr, data, fitness);
        let formula = model.to_expression();
        let complexity = formula.complexity();
        let eic_value = if model.is_sentinel() {
            eic.eic_cap
        } else {
            calculate_eic(&formula, data, eic).map_or(eic.eic_cap, |r| r.overall)
        };
        Candidate {
            expr: expr.clone(),
            fitness: fitness_alpha(complexity, model.nmse, eic_value, fitness),
            formula,
            model,
            eic: eic_value,
            complexity,
        }
    }

    pub fn evaluate(&mut self, expr: &Expression) -> Candidate {
        if let Some(c) = self.cache.get(expr) {
            return c.clone();
        }
        let c = Self::score(self.data, &self.fitness, &self.eic, expr);
        self.evaluations += 1;
        self.cache.insert(expr.clone(), c.clone());
        c
    }

    /// Scores a batch, computing uncached structures in parallel. Output
    /// order follows input order, so results do not depend on scheduling.
    pub fn evaluate_batch(&mut self, exprs: &[Expression]) -> Vec<Candidate> {
        let mut pending: Vec<&Expression> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for e in exprs {
            if !self.cache.contains_key(e) && seen.insert(e) {
                pending.push(e);
            }
        }
        let (data, fitness, eic) = (self.data, &self.fitness, &self.eic);
        let scored: Vec<Candidate> = pending
            .par_iter()
            .map(|e| Self::score(data, fitness, eic, e))
            .collect();
        self.evaluations += scored.len();
        for c in scored {
            self.cache.insert(c.expr.clone(), c);
        }
        exprs.iter().map(|e| self.cache[e].clone()).collect()
    }
}

/// Non-dominated set over (complexity, NMSE) of everything inserted.
///
/// Among candidates with identical keys only the first is kept. Sentinel
/// fits never enter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<Candidate>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the candidate was added.
    pub fn insert(&mut self, c: &Candidate) -> bool {
        if !c.nmse().is_finite() {
            return false;
        }
        let key = (c.complexity, c.nmse());
        if self
            .members
            .iter()
            .any(|m| weakly_dominates((m.complexity, m.nmse()), key))
        {
            return false;
        }
        self.members.retain(|m| !dominates(key, (m.complexity, m.nmse())));
        self.members.push(c.clone());
        true
    }

    pub fn members(&self) -> &[Candidate] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members ordered by complexity, then NMSE.
    pub fn into_sorted(mut self) -> Vec<Candidate> {
        self.members
            .sort_by(|a, b| a.complexity.cmp(&b.complexity).then(a.nmse().total_cmp(&b.nmse())));
        self.members
    }
}

/// Outcome of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Final Pareto archive, by complexity.
    pub archive: Vec<Candidate>,
    /// Highest-fitness candidate seen.
    pub best: Candidate,
    /// Best fitness after each generation (GP) or iteration (MCTS).
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub steps: usize,
}

impl SearchResult {
    pub fn mean_archive_eic(&self) -> f64 {
        if self.archive.is_empty() {
            return f64::NAN;
        }
        self.archive.iter().map(|c| c.eic).sum::<f64>() / self.archive.len() as f64
    }
}

/// Ordering used for selection: higher fitness, then lower complexity,
/// then lower EIC.
pub(crate) fn better(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then(a.complexity.cmp(&b.complexity))
        .then(a.eic.total_cmp(&b.eic))
}
