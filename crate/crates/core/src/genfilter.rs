//! Random formula corpora, EIC rejection filtering and feature divergences.
//!
//! Trees are sampled with a uniformly chosen number of binary and unary
//! operators. The binary skeleton is drawn uniformly among all shapes with
//! that many internal nodes, then unary operators wrap random nodes.
//! Filtering regenerates until the EIC on a fixed probe dataset is at most
//! the threshold.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::eic::{calculate_eic, EicConfig, EicError};
use crate::expr::{parse, BinaryOp, Expression, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("no formula with EIC <= {theta} within {attempts} attempts")]
    FilterExhausted { theta: f64, attempts: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("histogram bin layouts differ")]
    BinMismatch,
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eic(#[from] EicError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub max_binary_ops: usize,
    pub max_unary_ops: usize,
    /// Number of input variables.
    pub arity: usize,
    pub unary_weights: Vec<(UnaryOp, f64)>,
    pub binary_weights: Vec<(BinaryOp, f64)>,
    /// Probability that a leaf is a constant.
    pub const_prob: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        use BinaryOp::*;
        use UnaryOp::*;
        GeneratorConfig {
            max_binary_ops: 8,
            max_unary_ops: 4,
            arity: 3,
            unary_weights: vec![
                (Sin, 1.0),
                (Cos, 1.0),
                (Tan, 0.5),
                (Exp, 1.0),
                (Log, 1.0),
                (Sqrt, 1.0),
                (Inv, 1.0),
            ],
            binary_weights: vec![(Add, 3.0), (Sub, 2.0), (Mul, 3.0), (Div, 2.0)],
            const_prob: 0.3,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.arity == 0 {
            return bad("arity must be at least 1");
        }
        let weights = self.unary_weights.iter().map(|w| w.1).chain(self.binary_weights.iter().map(|w| w.1));
        if weights.clone().any(|w| !(w > 0.0 && w.is_finite())) {
            return bad("operator weights must be positive");
        }
        if self.binary_weights.is_empty() && self.max_binary_ops > 0 {
            return bad("binary operators requested but none configured");
        }
        if self.unary_weights.is_empty() && self.max_unary_ops > 0 {
            return bad("unary operators requested but none configured");
        }
        if !(0.0..=1.0).contains(&self.const_prob) {
            return bad("const_prob must lie in [0, 1]");
        }
        Ok(())
    }

    /// Largest node count a generated tree can have.
    pub fn max_nodes(&self) -> usize {
        2 * self.max_binary_ops + self.max_unary_ops + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub theta: f64,
    pub max_retries: usize,
    pub probe_rows: usize,
    /// Each probe variable is uniform on `[probe_low, probe_high)`.
    pub probe_low: f64,
    pub probe_high: f64,
    pub probe_seed: u64,
    pub eic_cfg: EicConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            theta: 2.0,
            max_retries: 1000,
            probe_rows: 256,
            probe_low: 1.0,
            probe_high: 5.0,
            probe_seed: 0x5eed,
            eic_cfg: EicConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.theta > 0.0) {
            return Err(GenError::InvalidConfig("theta must be positive".into()));
        }
        if self.max_retries == 0 {
            return Err(GenError::InvalidConfig("max_retries must be at least 1".into()));
        }
        if !(self.probe_low < self.probe_high) {
            return Err(GenError::InvalidConfig("probe range is empty".into()));
        }
        self.eic_cfg.validate()?;
        Ok(())
    }

    /// The probe inputs for `arity` variables. The target column is unused
    /// and set to zero.
    pub fn probe_data(&self, arity: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(self.probe_seed);
        let columns: Vec<Vec<f64>> = (0..arity)
            .map(|_| {
                (0..self.probe_rows)
                    .map(|_| rng.random_range(self.probe_low..self.probe_high))
                    .collect()
            })
            .collect();
        Dataset::from_columns(columns, vec![0.0; self.probe_rows]).expect("probe data is well formed")
    }
}

fn catalan(n: usize) -> f64 {
    (0..n).fold(1.0, |c, k| c * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64)
}

enum Shape {
    Leaf,
    Node(Box<Shape>, Box<Shape>),
}

/// A binary tree shape with `b` internal nodes, uniform over all shapes.
fn random_shape<R: Rng + ?Sized>(b: usize, rng: &mut R) -> Shape {
    if b == 0 {
        return Shape::Leaf;
    }
    let weights: Vec<f64> = (0..b).map(|l| catalan(l) * catalan(b - 1 - l)).collect();
    let left = WeightedIndex::new(&weights).expect("catalan weights are positive").sample(rng);
    let l = random_shape(left, rng);
    let r = random_shape(b - 1 - left, rng);
    Shape::Node(Box::new(l), Box::new(r))
}

fn random_constant<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        f64::from(rng.random_range(-5i32..=5))
    } else {
        rng.random_range(-10.0..10.0)
    }
}

struct Filler<'a, R: Rng + ?Sized> {
    cfg: &'a GeneratorConfig,
    binary: Option<WeightedIndex<f64>>,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Filler<'_, R> {
    fn fill(&mut self, shape: &Shape) -> Expression {
        match shape {
            Shape::Leaf => {
                if self.rng.random_bool(self.cfg.const_prob) {
                    Expression::constant(random_constant(self.rng))
                } else {
                    Expression::var(self.rng.random_range(0..self.cfg.arity))
                }
            }
            Shape::Node(l, r) => {
                let dist = self.binary.as_ref().expect("binary operators configured");
                let op = self.cfg.binary_weights[dist.sample(self.rng)].0;
                let left = self.fill(l);
                let right = self.fill(r);
                Expression::binary(op, left, right)
            }
        }
    }
}

/// Samples one formula.
///
/// # Panics
///
/// If `cfg` fails [`GeneratorConfig::validate`].
pub fn generate<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Expression {
    let b = if cfg.max_binary_ops == 0 {
        0
    } else {
        rng.random_range(1..=cfg.max_binary_ops)
    };
    let u = rng.random_range(0..=cfg.max_unary_ops);
    let shape = random_shape(b, rng);
    let binary = (!cfg.binary_weights.is_empty())
        .then(|| WeightedIndex::new(cfg.binary_weights.iter().map(|w| w.1)).expect("validated weights"));
    let mut expr = Filler { cfg, binary, rng: &mut *rng }.fill(&shape);
    if u > 0 {
        let unary = WeightedIndex::new(cfg.unary_weights.iter().map(|w| w.1)).expect("validated weights");
        for _ in 0..u {
            let at = rng.random_range(0..expr.complexity());
            let op = cfg.unary_weights[unary.sample(rng)].0;
            let wrapped = Expression::unary(op, expr.subtree(at).expect("index in range").clone());
            expr = expr.replace_subtree(at, &wrapped);
        }
    }
    expr
}

/// An accepted formula with its filter score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub formula: Expression,
    pub eic: f64,
    pub attempts: usize,
    pub complexity: usize,
}

/// Generates until a formula scores EIC at most `theta` on `probe`.
///
/// Only [`generate`] draws from `rng`, so the result is the first
/// acceptable formula of the plain generator's stream.
pub fn generate_filtered<R: Rng + ?Sized>(
    gcfg: &GeneratorConfig,
    fcfg: &FilterConfig,
    probe: &Dataset,
    rng: &mut R,
) -> Result<CorpusEntry, GenError> {
    for attempt in 1..=fcfg.max_retries {
        let formula = generate(gcfg, rng);
        let eic = calculate_eic(&formula, probe, &fcfg.eic_cfg)?.overall;
        if eic <= fcfg.theta {
            return Ok(CorpusEntry {
                complexity: formula.complexity(),
                formula,
                eic,
                attempts: attempt,
            });
        }
    }
    Err(GenError::FilterExhausted {
        theta: fcfg.theta,
        attempts: fcfg.max_retries,
    })
}

/// The generator stream for corpus item `index`.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `count` formulas, item `i` drawn from [`item_rng`]`(gcfg.seed, i)`.
///
/// Every entry is scored on the probe data. With `filter` set, entries are
/// filtered at its threshold and exhausted items come back as errors in
/// their slot; without it the threshold is ignored and `attempts` is 1.
pub fn generate_corpus(
    gcfg: &GeneratorConfig,
    fcfg: &FilterConfig,
    filter: bool,
    count: usize,
) -> Result<Vec<Result<CorpusEntry, GenError>>, GenError> {
    gcfg.validate()?;
    fcfg.validate()?;
    let probe = fcfg.probe_data(gcfg.arity);
    let unfiltered = FilterConfig {
        theta: f64::INFINITY,
        max_retries: 1,
        ..fcfg.clone()
    };
    let active = if filter { fcfg } else { &unfiltered };
    Ok((0..count)
        .into_par_iter()
        .map(|i| generate_filtered(gcfg, active, &probe, &mut item_rng(gcfg.seed, i)))
        .collect())
}

/// The four formula features compared between corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Variables,
    Constants,
    Operators,
    Length,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::Variables, Feature::Constants, Feature::Operators, Feature::Length];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Variables => "variables",
            Feature::Constants => "constants",
            Feature::Operators => "operators",
            Feature::Length => "length",
        }
    }
}

/// Counts use bins `0..=20`, length uses `1..=60`; each has a final
/// overflow bin.
pub const COUNT_BINS: usize = 22;
pub const LENGTH_BINS: usize = 61;

/// Smoothed feature distributions of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub variables: Vec<f64>,
    pub constants: Vec<f64>,
    pub operators: Vec<f64>,
    pub length: Vec<f64>,
    pub epsilon: f64,
}

impl FeatureHistogram {
    pub fn feature(&self, f: Feature) -> &[f64] {
        match f {
            Feature::Variables => &self.variables,
            Feature::Constants => &self.constants,
            Feature::Operators => &self.operators,
            Feature::Length => &self.length,
        }
    }
}

fn count_bin(v: usize) -> usize {
    v.min(COUNT_BINS - 1)
}

fn length_bin(len: usize) -> usize {
    len.saturating_sub(1).min(LENGTH_BINS - 1)
}

fn normalise(counts: Vec<f64>, total: f64, epsilon: f64) -> Vec<f64> {
    let z = 1.0 + epsilon * counts.len() as f64;
    counts.into_iter().map(|c| (c / total + epsilon) / z).collect()
}

pub fn featurize(corpus: &[Expression]) -> Result<FeatureHistogram, GenError> {
    featurize_with(corpus, 1e-10)
}

pub fn featurize_with(corpus: &[Expression], epsilon: f64) -> Result<FeatureHistogram, GenError> {
    if corpus.is_empty() {
        return Err(GenError::EmptyCorpus);
    }
    let mut vars = vec![0.0; COUNT_BINS];
    let mut consts = vec![0.0; COUNT_BINS];
    let mut ops = vec![0.0; COUNT_BINS];
    let mut len = vec![0.0; LENGTH_BINS];
    for e in corpus {
        vars[count_bin(e.distinct_variables().len())] += 1.0;
        consts[count_bin(e.count_constants())] += 1.0;
        ops[count_bin(e.count_operators())] += 1.0;
        len[length_bin(e.complexity())] += 1.0;
    }
    let total = corpus.len() as f64;
    Ok(FeatureHistogram {
        variables: normalise(vars, total, epsilon),
        constants: normalise(consts, total, epsilon),
        operators: normalise(ops, total, epsilon),
        length: normalise(len, total, epsilon),
        epsilon,
    })
}

/// Per-feature divergence values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub variables: f64,
    pub constants: f64,
    pub operators: f64,
    pub length: f64,
}

impl Divergence {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Variables => self.variables,
            Feature::Constants => self.constants,
            Feature::Operators => self.operators,
            Feature::Length => self.length,
        }
    }

    fn from_fn(mut f: impl FnMut(Feature) -> f64) -> Self {
        Divergence {
            variables: f(Feature::Variables),
            constants: f(Feature::Constants),
            operators: f(Feature::Operators),
            length: f(Feature::Length),
        }
    }
}

fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).log2())
        .sum::<f64>()
        .max(0.0)
}

fn js_bits(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m)).clamp(0.0, 1.0)
}

fn check_layout(p: &FeatureHistogram, q: &FeatureHistogram) -> Result<(), GenError> {
    if Feature::ALL.iter().all(|&f| p.feature(f).len() == q.feature(f).len()) {
        Ok(())
    } else {
        Err(GenError::BinMismatch)
    }
}

/// Jensen-Shannon divergence in bits.
pub fn js_divergence(p: &FeatureHistogram, q: &FeatureHistogram) -> Result<Divergence, GenError> {
    check_layout(p, q)?;
    Ok(Divergence::from_fn(|f| js_bits(p.feature(f), q.feature(f))))
}

/// `KL(p || q)` in bits.
pub fn kl_divergence(p: &FeatureHistogram, q: &FeatureHistogram) -> Result<Divergence, GenError> {
    check_layout(p, q)?;
    Ok(Divergence::from_fn(|f| kl_bits(p.feature(f), q.feature(f))))
}

const REFERENCE: &[&str] = &[
    "x1 * x2",
    "x1 * x2 * x3",
    "x1 / x2",
    "x1 * x2 / x3",
    "x1 * x2 / (x3 * x3)",
    "0.5 * x1 * x2 * x2",
    "x1 * x2 * x2",
    "x1 * x2 + x3",
    "x1 + x2",
    "x1 - x2",
    "(x1 - x2) / x3",
    "x1 * x2 * cos(x3)",
    "x1 * sin(x2)",
    "x1 * x2 * sin(x3)",
    "sqrt(x1 / x2)",
    "sqrt(x1 * x1 + x2 * x2)",
    "sqrt(x1 * x2 / x3)",
    "2 * 3.14159 * sqrt(x1 / x2)",
    "exp(-x1 / x2)",
    "x1 * exp(-x2 / x3)",
    "x1 * exp(-(x2 * x2) / 2)",
    "1 / (x1 * x2)",
    "1 / x1 + 1 / x2",
    "x1 * x2 / (x1 + x2)",
    "x1 / (1 + x2)",
    "x1 * (1 + x2)",
    "x1 * (x2 - x3)",
    "x1 * x2 * (x3 - x4)",
    "x1 * x1 * x2 / 2",
    "x1 * x2 * x3 / (4 * 3.14159 * x4 * x4)",
    "x1 / (4 * 3.14159 * x2 * x3)",
    "x1 * log(x2 / x3)",
    "x1 * x2 * log(x3)",
    "log(x1 / x2)",
    "x1 * cos(x2 * x3)",
    "x1 * sin(x2 * x3 + x4)",
    "x1 * x2 / sqrt(1 - x2 * x2 / (x3 * x3))",
    "x1 / sqrt(1 - x2 * x2 / (x3 * x3))",
    "x1 * x2 * x2 / x3",
    "x1 * x1 / (2 * x2)",
    "x1 + x2 * x3",
    "x1 * x2 + x3 * x4",
    "(x1 + x2) / 2",
    "x1 * (cos(x2) + x3 * sin(x2))",
    "x1 / (x2 * x2)",
    "x1 * x2 * x3 * x3",
    "x1 * tan(x2)",
    "x1 * x2 * exp(x3 / x4)",
    "x1 * x1 * x1 / x2",
    "sqrt(2 * x1 * x2)",
];

/// About fifty textbook physics formulas used as the comparison target.
pub fn reference_corpus() -> Vec<Expression> {
    REFERENCE.iter().map(|s| parse(s).expect("reference formulas parse")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::collections::HashSet;

    #[test]
    fn catalan_numbers() {
        let got: Vec<f64> = (0..7).map(catalan).collect();
        assert_eq!(got, vec![1.0, 1.0, 2.0, 5.0, 14.0, 42.0, 132.0]);
    }

    #[test]
    fn shapes_are_uniform() {
        // five shapes with three internal nodes
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = std::collections::HashMap::new();
        fn code(s: &Shape) -> String {
            match s {
                Shape::Leaf => ".".into(),
                Shape::Node(l, r) => format!("({}{})", code(l), code(r)),
            }
        }
        for _ in 0..50_000 {
            *counts.entry(code(&random_shape(3, &mut rng))).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 5);
        for c in counts.values() {
            assert!((*c as f64 / 10_000.0 - 1.0).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let cfg = GeneratorConfig { arity: 2, ..GeneratorConfig::default() };
        let a = generate(&cfg, &mut item_rng(1, 0));
        let b = generate(&cfg, &mut item_rng(1, 0));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen_unary = HashSet::new();
        let mut seen_binary = HashSet::new();
        for _ in 0..10_000 {
            let e = generate(&cfg, &mut rng);
            assert!(e.complexity() <= cfg.max_nodes());
            assert!(e.arity() <= 2);
            assert_eq!(parse(&e.to_string()).unwrap(), e);
            for n in e.preorder() {
                match n {
                    Expression::Unary(op, _) => {
                        seen_unary.insert(*op);
                    }
                    Expression::Binary(op, _, _) => {
                        seen_binary.insert(*op);
                    }
                    _ => {}
                }
            }
        }
        assert_eq!(seen_unary.len(), cfg.unary_weights.len());
        assert_eq!(seen_binary.len(), cfg.binary_weights.len());
    }

    #[test]
    fn vacuous_filter_matches_generator() {
        let gcfg = GeneratorConfig::default();
        let fcfg = FilterConfig { theta: 16.0, ..FilterConfig::default() };
        let probe = fcfg.probe_data(gcfg.arity);
        for i in 0..50 {
            let raw = generate(&gcfg, &mut item_rng(4, i));
            let got = generate_filtered(&gcfg, &fcfg, &probe, &mut item_rng(4, i)).unwrap();
            assert_eq!(got.formula, raw);
            assert_eq!(got.attempts, 1);
        }
    }

    #[test]
    fn filtered_equals_rejection_of_raw_stream() {
        let gcfg = GeneratorConfig::default();
        let fcfg = FilterConfig::default();
        let probe = fcfg.probe_data(gcfg.arity);
        for i in 0..30 {
            let got = generate_filtered(&gcfg, &fcfg, &probe, &mut item_rng(5, i)).unwrap();
            let mut rng = item_rng(5, i);
            let mut attempts = 0;
            let first = loop {
                attempts += 1;
                let e = generate(&gcfg, &mut rng);
                if calculate_eic(&e, &probe, &fcfg.eic_cfg).unwrap().overall <= fcfg.theta {
                    break e;
                }
            };
            assert_eq!(got.formula, first);
            assert_eq!(got.attempts, attempts);
            assert!(got.eic <= 2.0);
        }
    }

    #[test]
    fn strict_threshold_exhausts() {
        let gcfg = GeneratorConfig::default();
        let fcfg = FilterConfig {
            theta: 0.01,
            max_retries: 20,
            ..FilterConfig::default()
        };
        let results = generate_corpus(&gcfg, &fcfg, true, 40).unwrap();
        assert!(results.iter().any(|r| matches!(r, Err(GenError::FilterExhausted { .. }))));
    }

    #[test]
    fn histogram_counts() {
        let h = featurize(&[parse("x1").unwrap()]).unwrap();
        assert!(h.variables[1] > 1.0 - 1e-8);
        assert!(h.operators[0] > 1.0 - 1e-8);
        let h = featurize(&[parse("x1+x1").unwrap()]).unwrap();
        assert!(h.variables[1] > 1.0 - 1e-8);
        assert!(h.operators[1] > 1.0 - 1e-8);
        assert!(h.length[length_bin(3)] > 1.0 - 1e-8);
        for f in Feature::ALL {
            assert!((h.feature(f).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(featurize(&[]), Err(GenError::EmptyCorpus));
    }

    #[test]
    fn divergence_extremes() {
        let a = featurize(&[parse("x1").unwrap()]).unwrap();
        let b = featurize(&[parse("x1 * x2 + sin(x3) * 2").unwrap()]).unwrap();
        let same = js_divergence(&a, &a).unwrap();
        let kl = kl_divergence(&a, &a).unwrap();
        let apart = js_divergence(&a, &b).unwrap();
        for f in Feature::ALL {
            assert_eq!(same.get(f), 0.0);
            assert_eq!(kl.get(f), 0.0);
            assert!((apart.get(f) - 1.0).abs() < 1e-6, "{f:?} {}", apart.get(f));
        }
        let mut odd = a.clone();
        odd.length.push(0.0);
        assert_eq!(js_divergence(&a, &odd), Err(GenError::BinMismatch));
    }

    #[test]
    fn reference_corpus_parses() {
        let r = reference_corpus();
        assert!(r.len() >= 45);
        assert!(r.iter().all(|e| e.arity() <= 4));
    }
}
