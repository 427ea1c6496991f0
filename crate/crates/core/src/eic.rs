//! Effective information criterion (EIC).
//!
//! A formula is evaluated twice per operator node: once on clean values and
//! once on values that carry multiplicative Gaussian noise of relative
//! variance `sigma_r^2`, injected at every operator output. The relative
//! noise variance `delta_r^2` observed at a node converts to surviving
//! significant digits `M` through the same law that maps `sigma_r^2` to the
//! working precision `N` (see [`n_from_sigma`]); the node loses
//! `N - M = log10(delta_r / sigma_r)` digits. A formula's EIC is the largest
//! loss over all its subformulas, floored at zero by the leaves and clamped
//! to a cap.
//!
//! Noise for each node comes from its own stream, seeded from
//! `(seed, repeat, node path)`, so results do not depend on evaluation order
//! and a subtree evaluated in place sees the same noise it would see inside
//! its parent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::error::ArityError;
use crate::expr::{eval::check_arity, Expression, NodePath};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EicError {
    #[error("EIC needs at least 2 rows, dataset has {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Arity(#[from] ArityError),
    #[error("sigma_r^2 must be positive, got {0}")]
    Domain(f64),
    #[error("invalid EIC configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EicConfig {
    /// Relative noise standard deviation injected at operator outputs.
    pub sigma_r: f64,
    pub eic_cap: f64,
    /// Nodes with fewer usable samples than this fraction of rows get the cap.
    pub min_valid_fraction: f64,
    /// Samples with `|y|` at or below this are excluded from `delta_r^2`.
    pub rel_guard: f64,
    /// Independent noise passes; per-node results are medians.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for EicConfig {
    fn default() -> Self {
        EicConfig {
            sigma_r: 1e-6,
            eic_cap: 16.0,
            min_valid_fraction: 0.5,
            rel_guard: 1e-300,
            repeats: 1,
            seed: 0,
        }
    }
}

impl EicConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sigma(mut self, sigma_r: f64) -> Self {
        self.sigma_r = sigma_r;
        self
    }

    pub fn validate(&self) -> Result<(), EicError> {
        let bad = |msg: &str| Err(EicError::InvalidConfig(msg.to_string()));
        if !(self.sigma_r > 0.0 && self.sigma_r < 0.1) {
            return bad("sigma_r must lie in (0, 0.1)");
        }
        if !(self.eic_cap > 0.0) {
            return bad("eic_cap must be positive");
        }
        if !(self.min_valid_fraction > 0.0 && self.min_valid_fraction <= 1.0) {
            return bad("min_valid_fraction must lie in (0, 1]");
        }
        if !(self.rel_guard >= 0.0) {
            return bad("rel_guard must be non-negative");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        Ok(())
    }

    pub fn sigma_r2(&self) -> f64 {
        self.sigma_r * self.sigma_r
    }
}

/// Diagnostics for one operator node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEic {
    pub path: NodePath,
    pub formula: String,
    /// Digits lost, `0.5 * log10(delta_r2 / sigma_r^2)`, or the cap when too
    /// few samples were usable. May be negative.
    pub eic: f64,
    pub delta_r2: f64,
    pub valid: usize,
    pub invalid: usize,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EicReport {
    /// Max of 0 and every node EIC, clamped to `[0, eic_cap]`.
    pub overall: f64,
    /// Operator nodes in preorder. Leaves contribute 0 and are omitted.
    pub per_node: Vec<NodeEic>,
    pub delta_r2_root: f64,
    pub invalid_samples: usize,
    pub clipped: bool,
}

impl EicReport {
    pub fn node(&self, path: &NodePath) -> Option<&NodeEic> {
        self.per_node.iter().find(|n| &n.path == path)
    }

    /// EIC of the root node alone, 0 for a leaf.
    pub fn root_eic(&self) -> f64 {
        self.node(&NodePath::root()).map_or(0.0, |n| n.eic)
    }
}

/// Significant digits `N` carried under relative noise variance `sigma_r2`.
pub fn n_from_sigma(sigma_r2: f64) -> Result<f64, EicError> {
    if !(sigma_r2 > 0.0) {
        return Err(EicError::Domain(sigma_r2));
    }
    Ok(1.0 - 0.5 * (12.0 * sigma_r2).log10())
}

/// Relative noise variance equivalent to keeping `n` significant digits.
pub fn sigma_from_n(n: f64) -> f64 {
    10f64.powf(2.0 * (1.0 - n)) / 12.0
}

struct NodeStat {
    path: NodePath,
    delta_r2: f64,
    valid: usize,
    invalid: usize,
}

struct Pass<'a> {
    columns: &'a [Vec<f64>],
    rows: usize,
    cfg: &'a EicConfig,
    repeat: usize,
    stats: Vec<NodeStat>,
}

fn node_seed(seed: u64, repeat: usize, path: &NodePath) -> u64 {
    // FNV-1a over the path, then a splitmix finaliser.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in (repeat as u64).to_le_bytes().into_iter().chain(path.steps().iter().copied()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // depth separates paths that share a byte prefix, e.g. [] and [0]
    h ^= path.depth() as u64;
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Pass<'_> {
    /// Returns (noisy, clean) outputs of `e` located at `path`.
    fn run(&mut self, e: &Expression, path: NodePath) -> (Vec<f64>, Vec<f64>) {
        let (mut noisy, clean) = match e {
            Expression::Variable(i) => {
                let v = self.columns[*i].clone();
                return (v.clone(), v);
            }
            Expression::Constant(c) => {
                let v = vec![*c; self.rows];
                return (v.clone(), v);
            }
            Expression::Unary(op, child) => {
                let (mut noisy, mut clean) = self.run(child, path.child(0));
                for (n, c) in noisy.iter_mut().zip(clean.iter_mut()) {
                    *n = op.apply(*n);
                    *c = op.apply(*c);
                }
                (noisy, clean)
            }
            Expression::Binary(op, l, r) => {
                let (mut noisy, mut clean) = self.run(l, path.child(0));
                let (noisy_r, clean_r) = self.run(r, path.child(1));
                for i in 0..self.rows {
                    noisy[i] = op.apply(noisy[i], noisy_r[i]);
                    clean[i] = op.apply(clean[i], clean_r[i]);
                }
                (noisy, clean)
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(node_seed(self.cfg.seed, self.repeat, &path));
        for v in noisy.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += self.cfg.sigma_r * z * *v;
        }

        let (delta_r2, valid) = relative_noise_variance(&noisy, &clean, self.cfg.rel_guard);
        self.stats.push(NodeStat {
            path,
            delta_r2,
            valid,
            invalid: self.rows - valid,
        });
        (noisy, clean)
    }
}

/// Population variance of `(noisy - clean) / clean` over usable samples.
fn relative_noise_variance(noisy: &[f64], clean: &[f64], guard: f64) -> (f64, usize) {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (&n, &c) in noisy.iter().zip(clean) {
        if !n.is_finite() || !c.is_finite() || c.abs() <= guard {
            continue;
        }
        let r = (n - c) / c;
        if !r.is_finite() {
            continue;
        }
        count += 1;
        let d = r - mean;
        mean += d / count as f64;
        m2 += d * (r - mean);
    }
    if count == 0 {
        return (f64::NAN, 0);
    }
    (m2 / count as f64, count)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Computes the EIC of `e` on `data`.
pub fn calculate_eic(e: &Expression, data: &Dataset, cfg: &EicConfig) -> Result<EicReport, EicError> {
    calculate_eic_at(e, data, cfg, &NodePath::root())
}

/// Like [`calculate_eic`], but treats `e` as the subtree found at `origin`
/// inside some larger formula: node paths and noise streams are those the
/// subtree would have there.
pub fn calculate_eic_at(
    e: &Expression,
    data: &Dataset,
    cfg: &EicConfig,
    origin: &NodePath,
) -> Result<EicReport, EicError> {
    cfg.validate()?;
    check_arity(e, data.arity())?;
    let rows = data.len();
    if rows < 2 {
        return Err(EicError::InsufficientData(rows));
    }

    let passes: Vec<Vec<NodeStat>> = (0..cfg.repeats)
        .map(|repeat| {
            let mut pass = Pass {
                columns: data.columns(),
                rows,
                cfg,
                repeat,
                stats: Vec::new(),
            };
            pass.run(e, origin.clone());
            pass.stats
        })
        .collect();

    let sigma_r2 = cfg.sigma_r2();
    let needed = ((cfg.min_valid_fraction * rows as f64).ceil() as usize).max(2);
    let mut per_node = Vec::new();
    let mut raw_max = 0.0f64;
    // Stats are pushed in postorder; report in preorder.
    let node_count = passes[0].len();
    for k in 0..node_count {
        let mut deltas: Vec<f64> = passes.iter().map(|p| p[k].delta_r2).collect();
        let mut valids: Vec<f64> = passes.iter().map(|p| p[k].valid as f64).collect();
        let delta_r2 = median(&mut deltas);
        let valid = median(&mut valids).round() as usize;
        let stat = &passes[0][k];
        let capped = valid < needed || !delta_r2.is_finite();
        let eic = if capped {
            cfg.eic_cap
        } else if delta_r2 > 0.0 {
            0.5 * (delta_r2 / sigma_r2).log10()
        } else {
            -cfg.eic_cap
        };
        raw_max = raw_max.max(eic);
        let relative = NodePath::from_steps(&stat.path.steps()[origin.depth()..]);
        let formula = e.subtree_at_path(&relative).map(ToString::to_string).unwrap_or_default();
        per_node.push(NodeEic {
            path: stat.path.clone(),
            formula,
            eic,
            delta_r2,
            valid,
            invalid: stat.invalid,
            capped,
        });
    }
    per_node.sort_by(|a, b| a.path.cmp(&b.path));

    let root = per_node.iter().find(|n| &n.path == origin);
    let delta_r2_root = root.map_or(0.0, |n| n.delta_r2);
    let invalid_samples = passes[0].iter().map(|s| s.invalid).sum();
    let clipped = raw_max >= cfg.eic_cap;
    Ok(EicReport {
        overall: raw_max.clamp(0.0, cfg.eic_cap),
        per_node,
        delta_r2_root,
        invalid_samples,
        clipped,
    })
}

/// Largest pairwise difference of overall EIC across noise levels.
pub fn eic_sigma_invariance(
    e: &Expression,
    data: &Dataset,
    sigmas: &[f64],
    base: &EicConfig,
) -> Result<f64, EicError> {
    let values = sigmas
        .iter()
        .map(|&s| {
            if !(s > 0.0) {
                return Err(EicError::Domain(s));
            }
            calculate_eic(e, data, &base.clone().with_sigma(s)).map(|r| r.overall)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if values.is_empty() { 0.0 } else { max - min })
}
