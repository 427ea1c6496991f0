//! Seeded experiments: noise, splits, Pareto tiers, pair selection and the
//! built-in problem suite.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::eic::{calculate_eic, EicConfig};
use crate::expr::{evaluate, parse, Expression};
use crate::fitting::r2_score;
use crate::search::{dominates, gp_search, mcts_search, Budget, Candidate, GpConfig, MctsConfig, SearchResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("split needs 0 < frac < 1 and at least 2 rows")]
    InvalidSplit,
    #[error("invalid bench configuration: {0}")]
    InvalidConfig(String),
    #[error("no problems to run")]
    NoProblems,
}

/// Copy of `data` with Gaussian noise of standard deviation
/// `eta * Std[y]` added to the target.
pub fn add_noise(data: &Dataset, eta: f64, seed: u64) -> Dataset {
    let y = data.target();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = eta * sd;
    if !(scale > 0.0) {
        return data.clone();
    }
    let normal = Normal::new(0.0, scale).expect("positive finite scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = y.iter().map(|v| v + normal.sample(&mut rng)).collect();
    data.with_target(noisy).expect("same length target")
}

/// Seeded row partition with `round(frac * n)` training rows, clamped so
/// both parts are non-empty. Rows keep their original order.
pub fn split(data: &Dataset, frac: f64, seed: u64) -> Result<(Dataset, Dataset), BenchError> {
    let n = data.len();
    if !(frac > 0.0 && frac < 1.0) || n < 2 {
        return Err(BenchError::InvalidSplit);
    }
    let m = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at_mut(m);
    train.sort_unstable();
    test.sort_unstable();
    let pick = |rows: &[usize]| data.select_rows(rows).expect("indices in range");
    Ok((pick(train), pick(test)))
}

/// Candidates grouped into successive non-dominated layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub tiers: Vec<Vec<Candidate>>,
}

/// Non-dominated sorting on (complexity, NMSE), both minimised. Within a
/// tier candidates are ordered by complexity, then NMSE.
pub fn pareto_tiers(cands: &[Candidate]) -> ParetoFront {
    let key = |c: &Candidate| (c.complexity, c.nmse());
    let mut remaining: Vec<&Candidate> = cands.iter().collect();
    let mut tiers = Vec::new();
    while !remaining.is_empty() {
        let (mut tier, rest): (Vec<&Candidate>, Vec<&Candidate>) = remaining
            .iter()
            .partition(|c| !remaining.iter().any(|o| dominates(key(o), key(c))));
        tier.sort_by(|a, b| a.complexity.cmp(&b.complexity).then(a.nmse().total_cmp(&b.nmse())));
        tiers.push(tier.into_iter().cloned().collect());
        remaining = rest;
    }
    ParetoFront { tiers }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPair {
    pub a: Candidate,
    pub b: Candidate,
    /// `dC^2 + dR2^2 - dEIC^2`.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSelection {
    pub pairs: Vec<SelectedPair>,
}

/// Limits a pair must satisfy to be selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConstraints {
    pub max_complexity_gap: usize,
    pub max_r2_gap: f64,
    pub min_eic_gap: f64,
    pub min_best_r2: f64,
}

impl Default for PairConstraints {
    fn default() -> Self {
        PairConstraints {
            max_complexity_gap: 2,
            max_r2_gap: 0.02,
            min_eic_gap: 3.0,
            min_best_r2: 0.85,
        }
    }
}

impl PairConstraints {
    pub fn admits(&self, a: &Candidate, b: &Candidate) -> bool {
        a.complexity.abs_diff(b.complexity) <= self.max_complexity_gap
            && (a.r2() - b.r2()).abs() <= self.max_r2_gap
            && (a.eic - b.eic).abs() >= self.min_eic_gap
            && a.r2().max(b.r2()) > self.min_best_r2
    }
}

pub fn pair_loss(a: &Candidate, b: &Candidate) -> f64 {
    let dc = a.complexity as f64 - b.complexity as f64;
    let dr = a.r2() - b.r2();
    let de = a.eic - b.eic;
    dc * dc + dr * dr - de * de
}

/// Pairs from `front_a x front_b` with similar complexity and accuracy but
/// very different EIC, by ascending loss.
pub fn select_pairs(front_a: &[Candidate], front_b: &[Candidate]) -> PairSelection {
    select_pairs_with(front_a, front_b, &PairConstraints::default())
}

pub fn select_pairs_with(front_a: &[Candidate], front_b: &[Candidate], limits: &PairConstraints) -> PairSelection {
    let mut pairs: Vec<SelectedPair> = front_a
        .iter()
        .flat_map(|a| front_b.iter().map(move |b| (a, b)))
        .filter(|(a, b)| limits.admits(a, b))
        .map(|(a, b)| SelectedPair {
            loss: pair_loss(a, b),
            a: a.clone(),
            b: b.clone(),
        })
        .collect();
    pairs.sort_by(|x, y| x.loss.total_cmp(&y.loss));
    PairSelection { pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Physics,
    Pathological,
}

/// A ground-truth formula with the input box it is sampled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchProblem {
    pub name: String,
    pub category: Category,
    pub truth: Expression,
    /// One half-open range per variable.
    pub ranges: Vec<(f64, f64)>,
}

impl BenchProblem {
    pub fn new(name: &str, category: Category, formula: &str, ranges: &[(f64, f64)]) -> Self {
        BenchProblem {
            name: name.to_string(),
            category,
            truth: parse(formula).expect("suite formulas parse"),
            ranges: ranges.to_vec(),
        }
    }

    /// `rows` samples of the inputs with the exact target. Rows where the
    /// target is not finite are dropped.
    pub fn dataset(&self, rows: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = self
            .ranges
            .iter()
            .map(|&(lo, hi)| (0..rows).map(|_| rng.random_range(lo..hi)).collect())
            .collect();
        let probe = Dataset::from_columns(columns, vec![0.0; rows]).expect("well-formed inputs");
        let y = evaluate(&self.truth, &probe).expect("truth uses declared variables").values;
        let keep: Vec<usize> = (0..rows).filter(|&i| y[i].is_finite()).collect();
        let data = probe.with_target(y).expect("same length");
        if keep.len() == rows {
            data
        } else {
            data.select_rows(&keep).expect("indices in range")
        }
    }

    /// EIC of the ground truth on `rows` samples.
    pub fn truth_eic(&self, rows: usize, seed: u64, cfg: &EicConfig) -> f64 {
        calculate_eic(&self.truth, &self.dataset(rows, seed), cfg).map_or(cfg.eic_cap, |r| r.overall)
    }
}

/// Ten physics-style and ten numerically pathological problems.
pub fn builtin_suite() -> Vec<BenchProblem> {
    use Category::*;
    let p = BenchProblem::new;
    let box3 = [(1.0, 5.0); 3];
    vec![
        p("product", Physics, "x1 * x2", &box3[..2]),
        p("inverse_square", Physics, "x1 * x2 / (x3 * x3)", &box3),
        p("kinetic_energy", Physics, "0.5 * x1 * x2 * x2", &box3[..2]),
        p("torque", Physics, "x1 * sin(x2)", &[(1.0, 5.0), (0.5, 2.5)]),
        p("decay", Physics, "x1 * exp(-x2 / x3)", &box3),
        p("pendulum", Physics, "sqrt(x1 / x2)", &box3[..2]),
        p("ratio", Physics, "x1 / (1 + x2)", &box3[..2]),
        p("projection", Physics, "x1 * x3 * cos(x2)", &[(1.0, 5.0), (0.0, 1.2), (1.0, 5.0)]),
        p("reduced_mass", Physics, "x1 * x2 / (x1 + x2)", &box3[..2]),
        p("entropy", Physics, "x1 * log(x2 / x3)", &[(1.0, 5.0), (3.0, 5.0), (1.0, 2.0)]),
        p("offset_1e3", Pathological, "(x1 + 1000) - 1000", &[(1.0, 2.0)]),
        p("offset_1e10", Pathological, "(x1 + 1e10) - 1e10", &[(1.0, 2.0)]),
        p("shifted_product", Pathological, "(x1 * x2 + 1e6) - 1e6", &box3[..2]),
        p("near_difference", Pathological, "exp(x1) - exp(x1 - 1e-6)", &[(1.0, 2.0)]),
        p("hypot_offset", Pathological, "sqrt(x1 * x1 + 1e8) - 1e4", &[(1.0, 5.0)]),
        p("log_one_plus", Pathological, "log(1 + x1 * 1e-10)", &[(1.0, 5.0)]),
        p("cos_minus_one", Pathological, "cos(x1 * 1e-4) - 1", &[(1.0, 5.0)]),
        p("scaled_cancel", Pathological, "x1 * (x2 + 1e8) - x1 * 1e8", &box3[..2]),
        p("triple_exp", Pathological, "exp(exp(exp(x1)))", &[(1.0, 1.5)]),
        p("sin_double_exp", Pathological, "sin(exp(exp(x1)))", &[(1.5, 2.0)]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gp,
    Mcts,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gp => "gp",
            Method::Mcts => "mcts",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gp" => Ok(Method::Gp),
            "mcts" => Ok(Method::Mcts),
            other => Err(format!("unknown method {other:?}, expected gp or mcts")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Target noise as a fraction of the target's standard deviation.
    pub noise_eta: f64,
    /// Training fraction.
    pub split: f64,
    pub trials: usize,
    pub rows: usize,
    pub method: Method,
    /// Overrides the EIC weight of the chosen method when set.
    pub alpha: Option<f64>,
    pub gp: GpConfig,
    pub mcts: MctsConfig,
    pub seed: u64,
    /// Test R2 above which a run counts as retained.
    pub r2_threshold: f64,
    /// Record wall-clock runtimes; off gives byte-reproducible reports.
    pub timing: bool,
    /// Worker cap; `None` uses the default pool.
    pub threads: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            noise_eta: 0.0,
            split: 0.75,
            trials: 10,
            rows: 256,
            method: Method::Mcts,
            alpha: None,
            gp: GpConfig {
                population_size: 128,
                budget: Budget::Steps(20),
                ..GpConfig::default()
            },
            mcts: MctsConfig {
                budget: Budget::Steps(2000),
                ..MctsConfig::default()
            },
            seed: 0,
            r2_threshold: 0.8,
            timing: true,
            threads: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must lie in (0, 1)");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.noise_eta >= 0.0) {
            return bad("noise_eta must be non-negative");
        }
        if self.rows < 4 {
            return bad("rows must be at least 4");
        }
        if self.alpha.is_some_and(|a| !(a >= 0.0)) {
            return bad("alpha must be non-negative");
        }
        Ok(())
    }

    /// The EIC weight the configured method runs with.
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.method {
            Method::Gp => self.gp.fitness_cfg.alpha,
            Method::Mcts => self.mcts.fitness_cfg.alpha,
        })
    }
}

/// One search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub problem: String,
    pub category: Category,
    pub trial: usize,
    pub method: Method,
    pub alpha: f64,
    pub noise_eta: f64,
    /// Clean-test R2 of the highest-fitness candidate; `None` when its
    /// predictions are not finite.
    pub r2: Option<f64>,
    /// Training NMSE of that candidate.
    pub nmse: Option<f64>,
    pub complexity: Option<usize>,
    /// Mean EIC over the final archive.
    pub eic: Option<f64>,
    pub best_formula: Option<String>,
    pub best_eic: Option<f64>,
    pub archive_size: usize,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Means over a set of runs; R2 means skip runs without a finite R2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub mean_r2: Option<f64>,
    /// Mean over runs whose R2 exceeds the threshold.
    pub mean_r2_retained: Option<f64>,
    pub retained: usize,
    pub r2_sentinels: usize,
    pub mean_complexity: Option<f64>,
    pub mean_eic: Option<f64>,
    pub mean_runtime_s: f64,
    pub failures: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Summary {
    fn of<'r>(runs: impl IntoIterator<Item = &'r TrialRecord> + Clone, threshold: f64) -> Self {
        let ok = || runs.clone().into_iter().filter(|r| r.error.is_none());
        let r2s = || ok().filter_map(|r| r.r2);
        Summary {
            runs: runs.clone().into_iter().count(),
            mean_r2: mean(r2s()),
            mean_r2_retained: mean(r2s().filter(|&v| v > threshold)),
            retained: r2s().filter(|&v| v > threshold).count(),
            r2_sentinels: ok().filter(|r| r.r2.is_none()).count(),
            mean_complexity: mean(ok().filter_map(|r| r.complexity.map(|c| c as f64))),
            mean_eic: mean(ok().filter_map(|r| r.eic)),
            mean_runtime_s: mean(runs.clone().into_iter().map(|r| r.runtime_s)).unwrap_or(0.0),
            failures: runs.into_iter().filter(|r| r.error.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem: String,
    pub category: Category,
    pub truth: Expression,
    /// EIC of the ground truth on the problem's full dataset.
    pub truth_eic: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: Method,
    pub alpha: f64,
    pub noise_eta: f64,
    pub trials: usize,
    pub seed: u64,
    pub runs: Vec<TrialRecord>,
    pub problems: Vec<ProblemSummary>,
    pub aggregate: Summary,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per run with the columns problem, trial, method, alpha,
    /// noise_eta, r2, nmse, complexity, eic, runtime_s. Missing values are
    /// empty fields.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "problem",
            "trial",
            "method",
            "alpha",
            "noise_eta",
            "r2",
            "nmse",
            "complexity",
            "eic",
            "runtime_s",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.problem.clone(),
                r.trial.to_string(),
                r.method.to_string(),
                r.alpha.to_string(),
                r.noise_eta.to_string(),
                opt(r.r2),
                opt(r.nmse),
                opt(r.complexity),
                opt(r.eic),
                r.runtime_s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed for stream `stream` of a run seeded with `seed`.
fn derived_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}

fn run_trial(problem: &BenchProblem, data: &Dataset, trial: usize, pidx: usize, cfg: &BenchConfig) -> TrialRecord {
    let started = Instant::now();
    let alpha = cfg.effective_alpha();
    let base = derived_seed(cfg.seed, ((pidx as u64) << 32) | trial as u64);
    let mut record = TrialRecord {
        problem: problem.name.clone(),
        category: problem.category,
        trial,
        method: cfg.method,
        alpha,
        noise_eta: cfg.noise_eta,
        r2: None,
        nmse: None,
        complexity: None,
        eic: None,
        best_formula: None,
        best_eic: None,
        archive_size: 0,
        runtime_s: 0.0,
        error: None,
    };
    let outcome = split(data, cfg.split, derived_seed(base, 0)).map_err(|e| e.to_string()).and_then(|(train, test)| {
        let train = add_noise(&train, cfg.noise_eta, derived_seed(base, 1));
        let search_seed = derived_seed(base, 2);
        let result: Result<SearchResult, _> = match cfg.method {
            Method::Gp => {
                let mut gp = cfg.gp.clone();
                gp.seed = search_seed;
                gp.fitness_cfg.alpha = alpha;
                gp_search(&train, &gp)
            }
            Method::Mcts => {
                let mut mcts = cfg.mcts.clone();
                mcts.seed = search_seed;
                mcts.fitness_cfg.alpha = alpha;
                mcts_search(&train, &mcts)
            }
        };
        result.map(|r| (r, test)).map_err(|e| e.to_string())
    });
    match outcome {
        Err(e) => record.error = Some(e),
        Ok((res, test)) => {
            let best = &res.best;
            if !best.model.is_sentinel() {
                record.r2 = best
                    .model
                    .predict(&test)
                    .ok()
                    .map(|p| r2_score(&p, test.target()))
                    .filter(|v| v.is_finite());
                record.nmse = Some(best.nmse());
                record.complexity = Some(best.complexity);
                record.best_formula = Some(best.formula.to_string());
                record.best_eic = Some(best.eic);
            }
            record.eic = Some(res.mean_archive_eic()).filter(|v| v.is_finite());
            record.archive_size = res.archive.len();
        }
    }
    if cfg.timing {
        record.runtime_s = started.elapsed().as_secs_f64();
    }
    record
}

fn run_all(problems: &[BenchProblem], cfg: &BenchConfig) -> BenchReport {
    let datasets: Vec<Dataset> = problems
        .iter()
        .enumerate()
        .map(|(i, p)| p.dataset(cfg.rows, derived_seed(cfg.seed, u64::MAX - i as u64)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let runs: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(&problems[p], &datasets[p], t, p, cfg))
        .collect();
    let eic_cfg = match cfg.method {
        Method::Gp => &cfg.gp.eic_cfg,
        Method::Mcts => &cfg.mcts.eic_cfg,
    };
    let summaries = problems
        .iter()
        .zip(&datasets)
        .map(|(p, d)| ProblemSummary {
            problem: p.name.clone(),
            category: p.category,
            truth: p.truth.clone(),
            truth_eic: calculate_eic(&p.truth, d, eic_cfg).map_or(eic_cfg.eic_cap, |r| r.overall),
            summary: Summary::of(runs.iter().filter(|r| r.problem == p.name), cfg.r2_threshold),
        })
        .collect();
    BenchReport {
        method: cfg.method,
        alpha: cfg.effective_alpha(),
        noise_eta: cfg.noise_eta,
        trials: cfg.trials,
        seed: cfg.seed,
        aggregate: Summary::of(runs.iter(), cfg.r2_threshold),
        problems: summaries,
        runs,
    }
}

/// Runs every problem `cfg.trials` times. Failures are recorded in the
/// affected rows; the batch always completes.
pub fn run_bench(problems: &[BenchProblem], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    if problems.is_empty() {
        return Err(BenchError::NoProblems);
    }
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
            Ok(pool.install(|| run_all(problems, cfg)))
        }
        None => Ok(run_all(problems, cfg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::FittedModel;
    use proptest::prelude::*;

    fn cand(complexity: usize, nmse: f64, eic: f64) -> Candidate {
        Candidate {
            expr: Expression::var(0),
            formula: Expression::var(0),
            model: FittedModel {
                terms: vec![],
                coefficients: vec![0.0],
                nmse,
                r2: 1.0 - nmse,
                rows_used: 1,
            },
            eic,
            fitness: 0.0,
            complexity,
        }
    }

    fn line(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::from_columns(vec![x.clone()], x).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let d = line(10);
        assert_eq!(add_noise(&d, 0.0, 1), d);
        let flat = Dataset::from_columns(vec![vec![1.0, 2.0]], vec![3.0, 3.0]).unwrap();
        assert_eq!(add_noise(&flat, 0.1, 1), flat);
    }

    #[test]
    fn noise_scale_matches_eta() {
        let d = line(10_000);
        let noisy = add_noise(&d, 0.1, 7);
        let diffs: Vec<f64> = noisy.target().iter().zip(d.target()).map(|(a, b)| a - b).collect();
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        let want = 0.1 * (((10_000f64).powi(2) - 1.0) / 12.0).sqrt();
        assert!((sd / want - 1.0).abs() < 0.05, "{sd} vs {want}");
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split(&line(100), 0.75, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
        let (tr2, _) = split(&line(100), 0.75, 3).unwrap();
        assert_eq!(tr, tr2);
        let (a, b) = split(&line(3), 0.5, 0).unwrap();
        assert_eq!((a.len(), b.len()), (2, 1));
        let mut all: Vec<f64> = tr.target().iter().chain(te.target()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, line(100).target());
        assert_eq!(split(&line(1), 0.5, 0), Err(BenchError::InvalidSplit));
        assert_eq!(split(&line(5), 1.0, 0), Err(BenchError::InvalidSplit));
    }

    #[test]
    fn tier_examples() {
        let one = pareto_tiers(&[cand(3, 0.1, 0.0)]);
        assert_eq!(one.tiers.len(), 1);
        let dominated = pareto_tiers(&[cand(3, 0.1, 0.0), cand(5, 0.2, 0.0)]);
        assert_eq!(dominated.tiers.len(), 2);
        assert_eq!(dominated.tiers[1][0].complexity, 5);
        let incomparable = pareto_tiers(&[cand(3, 0.2, 0.0), cand(5, 0.1, 0.0)]);
        assert_eq!(incomparable.tiers.len(), 1);
        let tied = pareto_tiers(&[cand(3, 0.2, 0.0), cand(3, 0.2, 1.0)]);
        assert_eq!(tied.tiers[0].len(), 2);
    }

    #[test]
    fn pair_example() {
        let mut a = cand(10, 0.10, 0.5);
        let mut b = cand(11, 0.09, 5.0);
        a.model.r2 = 0.90;
        b.model.r2 = 0.91;
        let sel = select_pairs(&[a.clone()], &[b.clone()]);
        assert_eq!(sel.pairs.len(), 1);
        assert!((sel.pairs[0].loss - (-19.2499)).abs() < 1e-9);
        b.eic = 2.0;
        assert!(select_pairs(&[a], &[b]).pairs.is_empty());
    }

    #[test]
    fn suite_has_both_categories() {
        let suite = builtin_suite();
        let physics = suite.iter().filter(|p| p.category == Category::Physics).count();
        assert_eq!((physics, suite.len() - physics), (10, 10));
        for p in &suite {
            let d = p.dataset(256, 1);
            assert_eq!(d.len(), 256, "{}", p.name);
            assert_eq!(d.arity(), p.truth.arity().max(p.ranges.len()));
        }
    }

    fn arb_front() -> impl Strategy<Value = Vec<Candidate>> {
        prop::collection::vec((1usize..8, 0u8..6, 0u8..8), 1..40).prop_map(|v| {
            v.into_iter()
                .map(|(c, n, e)| {
                    let mut x = cand(c, f64::from(n) / 10.0, f64::from(e));
                    x.model.r2 = 0.8 + f64::from(n) / 100.0;
                    x
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn tiers_match_brute_force(cands in arb_front()) {
            let front = pareto_tiers(&cands);
            let total: usize = front.tiers.iter().map(Vec::len).sum();
            prop_assert_eq!(total, cands.len());
            let key = |c: &Candidate| (c.complexity, c.nmse());
            for (k, tier) in front.tiers.iter().enumerate() {
                for a in tier {
                    for b in tier {
                        prop_assert!(!dominates(key(a), key(b)));
                    }
                    if k > 0 {
                        prop_assert!(front.tiers[k - 1].iter().any(|p| dominates(key(p), key(a))));
                    }
                }
            }
        }

        #[test]
        fn pairs_mirror_and_satisfy_limits(a in arb_front(), b in arb_front()) {
            let ab = select_pairs(&a, &b);
            let ba = select_pairs(&b, &a);
            let limits = PairConstraints::default();
            for p in &ab.pairs {
                prop_assert!(limits.admits(&p.a, &p.b));
                prop_assert_eq!(p.loss, pair_loss(&p.a, &p.b));
            }
            let mut x: Vec<_> = ab.pairs.iter().map(|p| (p.a.complexity, p.b.complexity, p.loss.to_bits())).collect();
            let mut y: Vec<_> = ba.pairs.iter().map(|p| (p.b.complexity, p.a.complexity, p.loss.to_bits())).collect();
            x.sort_unstable();
            y.sort_unstable();
            prop_assert_eq!(x, y);
        }
    }
}
