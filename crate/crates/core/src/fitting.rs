//! Linear coefficient fitting over additive terms, error metrics and the
//! complexity/EIC-penalised fitness functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::error::ArityError;
use crate::expr::{additive_terms, eval::check_arity, eval::eval_columns, BinaryOp, Expression, UnaryOp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    /// Complexity discount base, `0 < eta < 1`.
    pub eta: f64,
    /// EIC penalty weight.
    pub alpha: f64,
    pub ridge_lambda: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            eta: 0.999,
            alpha: 0.0,
            ridge_lambda: 1e-8,
        }
    }
}

impl FitnessConfig {
    /// Penalty weight used with Monte-Carlo tree search.
    pub const MCTS_ALPHA: f64 = 0.01;
    /// Genetic programming reacts more strongly to the penalty.
    pub const GP_ALPHA: f64 = 0.002;

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.alpha >= 0.0) {
            return Err(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(format!("ridge_lambda must be non-negative, got {}", self.ridge_lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Arity(#[from] ArityError),
}

/// Least-squares model `intercept + sum(c_i * term_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub terms: Vec<Expression>,
    /// One coefficient per term, then the intercept.
    pub coefficients: Vec<f64>,
    pub nmse: f64,
    pub r2: f64,
    /// Rows on which every term was finite.
    pub rows_used: usize,
}

impl FittedModel {
    /// Model for candidates that could not be fitted: NMSE is `+inf`.
    pub fn sentinel(terms: Vec<Expression>) -> Self {
        let k = terms.len();
        FittedModel {
            terms,
            coefficients: vec![0.0; k + 1],
            nmse: f64::INFINITY,
            r2: f64::NEG_INFINITY,
            rows_used: 0,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.nmse.is_infinite()
    }

    pub fn intercept(&self) -> f64 {
        *self.coefficients.last().unwrap_or(&0.0)
    }

    /// Predictions on every row of `data`; rows where a term is non-finite
    /// yield non-finite predictions.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, ArityError> {
        let mut out = vec![self.intercept(); data.len()];
        for (term, &c) in self.terms.iter().zip(&self.coefficients) {
            if c == 0.0 {
                continue;
            }
            check_arity(term, data.arity())?;
            let values = eval_columns(term, data.columns(), data.len());
            for (o, v) in out.iter_mut().zip(values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// The fitted formula with coefficients as constant nodes.
    ///
    /// Coefficients within 1e-9 of ±1 are left implicit, zero coefficients
    /// drop their term, negated terms absorb their sign into the
    /// coefficient, and a negligible intercept is omitted.
    pub fn to_expression(&self) -> Expression {
        const SNAP: f64 = 1e-9;
        let mut acc: Option<Expression> = None;
        for (term, &c) in self.terms.iter().zip(&self.coefficients) {
            if c == 0.0 {
                continue;
            }
            // a negated term flips the sign of its coefficient instead
            let (term, c) = match term {
                Expression::Unary(UnaryOp::Neg, inner) => (&**inner, -c),
                t => (t, c),
            };
            let negative = c < 0.0;
            let magnitude = c.abs();
            let scaled = if (magnitude - 1.0).abs() <= SNAP {
                term.clone()
            } else {
                Expression::binary(BinaryOp::Mul, Expression::constant(magnitude), term.clone())
            };
            acc = Some(match (acc, negative) {
                (None, false) => scaled,
                (None, true) => Expression::unary(UnaryOp::Neg, scaled),
                (Some(a), false) => Expression::binary(BinaryOp::Add, a, scaled),
                (Some(a), true) => Expression::binary(BinaryOp::Sub, a, scaled),
            });
        }
        let b = self.intercept();
        match acc {
            None => Expression::constant(b),
            Some(a) if b.abs() <= SNAP => a,
            Some(a) if b < 0.0 => Expression::binary(BinaryOp::Sub, a, Expression::constant(-b)),
            Some(a) => Expression::binary(BinaryOp::Add, a, Expression::constant(b)),
        }
    }
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Fits coefficients for the additive terms of `e` plus an intercept.
///
/// Rows where any term is non-finite are dropped. The solve is a ridge
/// regression (intercept unpenalised) done by SVD of the augmented design.
pub fn fit_linear(e: &Expression, data: &Dataset, cfg: &FitnessConfig) -> Result<FittedModel, FitError> {
    check_arity(e, data.arity())?;
    let terms = additive_terms(e);
    let n = data.len();
    let k = terms.len();
    let columns: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| eval_columns(t, data.columns(), n))
        .collect();
    let rows: Vec<usize> = (0..n)
        .filter(|&i| columns.iter().all(|c| c[i].is_finite()))
        .collect();
    let m = rows.len();
    if m < k + 1 {
        return Err(FitError::DegenerateFit(format!("{m} finite rows for {k} term(s)")));
    }
    if 2 * m < n {
        return Err(FitError::DegenerateFit(format!("terms non-finite on {} of {n} rows", n - m)));
    }
    let y: Vec<f64> = rows.iter().map(|&i| data.target()[i]).collect();
    let var_y = population_variance(&y);
    if !(var_y > 0.0) {
        return Err(FitError::DegenerateFit("target has zero variance".into()));
    }
    let y_mean = y.iter().sum::<f64>() / m as f64;

    // Constant columns cannot be told apart from the intercept.
    let mut active = Vec::new();
    let mut means = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let first = col[rows[0]];
        if rows.iter().all(|&i| col[i] == first) {
            continue;
        }
        active.push(j);
        means.push(rows.iter().map(|&i| col[i]).sum::<f64>() / m as f64);
    }

    let mut coefficients = vec![0.0; k + 1];
    if !active.is_empty() {
        let p = active.len();
        let sqrt_lambda = cfg.ridge_lambda.sqrt();
        let design = DMatrix::from_fn(m + p, p, |r, c| {
            if r < m {
                columns[active[c]][rows[r]] - means[c]
            } else if r - m == c {
                sqrt_lambda
            } else {
                0.0
            }
        });
        let rhs = DVector::from_fn(m + p, |r, _| if r < m { y[r] - y_mean } else { 0.0 });
        let svd = design.svd(true, true);
        let tol = svd.singular_values.max() * f64::EPSILON * (m + p) as f64;
        let solution = svd
            .solve(&rhs, tol)
            .map_err(|msg| FitError::DegenerateFit(msg.to_string()))?;
        for (slot, &j) in active.iter().enumerate() {
            coefficients[j] = solution[slot];
        }
    }
    let intercept = y_mean
        - active
            .iter()
            .zip(&means)
            .map(|(&j, mean)| coefficients[j] * mean)
            .sum::<f64>();
    coefficients[k] = intercept;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(FitError::DegenerateFit("non-finite coefficients".into()));
    }

    let mse = rows
        .iter()
        .zip(&y)
        .map(|(&i, yi)| {
            let pred = intercept + (0..k).map(|j| coefficients[j] * columns[j][i]).sum::<f64>();
            (pred - yi).powi(2)
        })
        .sum::<f64>()
        / m as f64;
    let nmse = mse / var_y;
    if !nmse.is_finite() {
        return Err(FitError::DegenerateFit("non-finite residuals".into()));
    }
    Ok(FittedModel {
        terms,
        coefficients,
        nmse,
        r2: 1.0 - nmse,
        rows_used: m,
    })
}

/// [`fit_linear`], mapping degenerate fits to the `+inf` NMSE sentinel.
pub fn fit_or_sentinel(e: &Expression, data: &Dataset, cfg: &FitnessConfig) -> FittedModel {
    fit_linear(e, data, cfg).unwrap_or_else(|_| FittedModel::sentinel(additive_terms(e)))
}

/// `eta^complexity / (1 + nmse)`; an infinite NMSE gives 0.
pub fn fitness(complexity: usize, nmse: f64, cfg: &FitnessConfig) -> f64 {
    if !nmse.is_finite() {
        return 0.0;
    }
    cfg.eta.powi(complexity as i32) / (1.0 + nmse)
}

/// [`fitness`] minus `alpha * eic`.
pub fn fitness_alpha(complexity: usize, nmse: f64, eic: f64, cfg: &FitnessConfig) -> f64 {
    fitness(complexity, nmse, cfg) - cfg.alpha * eic
}

/// `1 - MSE / Var(y)` of `predictions` against `target`; non-finite
/// predictions give `-inf`.
pub fn r2_score(predictions: &[f64], target: &[f64]) -> f64 {
    if predictions.iter().any(|p| !p.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let var = population_variance(target);
    let mse = predictions
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / target.len() as f64;
    if var > 0.0 {
        1.0 - mse / var
    } else if mse == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        Dataset::from_columns(cols, y).unwrap()
    }

    /// Independent route: normal equations solved by Gaussian elimination.
    fn normal_equations(design: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = design[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &yi) in design.iter().zip(y) {
            for r in 0..p {
                for c in 0..p {
                    a[r][c] += row[r] * row[c];
                }
                a[r][p] += row[r] * yi;
            }
        }
        for col in 0..p {
            let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, pivot);
            for r in 0..p {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    let pivot_row = a[col].clone();
                    for (x, v) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                        *x -= f * v;
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p] / a[r][r]).collect()
    }

    #[test]
    fn exact_linear_recovery() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y = x.iter().map(|v| 3.0 * v + 5.0).collect();
        let m = fit_linear(&parse("x1").unwrap(), &dataset(vec![x], y), &FitnessConfig::default()).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-8);
        assert!((m.coefficients[1] - 5.0).abs() < 1e-7);
        assert!(m.nmse < 1e-12);
        assert!((m.r2 - 1.0).abs() < 1e-12);
        let fitted = m.to_expression();
        assert_eq!(fitted.complexity(), 5);
        assert!(matches!(fitted, Expression::Binary(BinaryOp::Add, _, _)));
    }

    #[test]
    fn orthogonal_target_degenerates_to_mean() {
        let x = vec![1.0, -1.0, 1.0, -1.0];
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let m = fit_linear(&parse("x1").unwrap(), &dataset(vec![x], y), &FitnessConfig::default()).unwrap();
        assert!((m.nmse - 1.0).abs() < 1e-12);
        assert!(m.r2.abs() < 1e-12);
    }

    #[test]
    fn two_term_recovery_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1000;
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - 4.0 * b.sin() + 1.0).collect();
        let design: Vec<Vec<f64>> = x1.iter().zip(&x2).map(|(a, b)| vec![*a, b.sin(), 1.0]).collect();
        let oracle = normal_equations(&design, &y);
        assert!((oracle[0] - 2.0).abs() < 1e-10 && (oracle[1] + 4.0).abs() < 1e-10 && (oracle[2] - 1.0).abs() < 1e-10);

        let d = dataset(vec![x1, x2], y);
        let m = fit_linear(&parse("x1 + sin(x2)").unwrap(), &d, &FitnessConfig::default()).unwrap();
        for (got, want) in m.coefficients.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(m.nmse < 1e-20, "nmse {}", m.nmse);
    }

    #[test]
    fn duplicate_terms_are_tolerated() {
        let x: Vec<f64> = (1..=30).map(|v| f64::from(v) / 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 2.0).collect();
        let d = dataset(vec![x], y);
        let m = fit_linear(&parse("x1 + x1 + 3").unwrap(), &d, &FitnessConfig::default()).unwrap();
        assert!(m.nmse < 1e-12);
        let c = &m.coefficients;
        assert!((c[0] + c[1] - 4.0).abs() < 1e-9, "{c:?}");
        // the ridge term splits the weight evenly, up to conditioning
        assert!((c[0] - c[1]).abs() < 1e-4, "{c:?}");
        assert_eq!(m.coefficients[2], 0.0);
        assert!(!m.to_expression().to_string().contains(" 3"));
    }

    #[test]
    fn degenerate_cases() {
        let cfg = FitnessConfig::default();
        let x = vec![-1.0, -2.0, -3.0, 4.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let d = dataset(vec![x.clone()], y);
        assert!(matches!(fit_linear(&parse("log(x1)").unwrap(), &d, &cfg), Err(FitError::DegenerateFit(_))));
        let flat = dataset(vec![x], vec![2.0; 4]);
        assert!(matches!(fit_linear(&parse("x1").unwrap(), &flat, &cfg), Err(FitError::DegenerateFit(_))));
        let m = fit_or_sentinel(&parse("log(x1)").unwrap(), &d, &cfg);
        assert!(m.is_sentinel());
        assert_eq!(fitness(3, m.nmse, &cfg), 0.0);
        let tiny = dataset(vec![vec![1.0, 2.0]], vec![1.0, 2.0]);
        assert!(matches!(fit_linear(&parse("x1 + x1^2").unwrap(), &tiny, &cfg), Err(FitError::DegenerateFit(_))));
    }

    #[test]
    fn nonfinite_rows_are_dropped() {
        let x = vec![-1.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 2.0 * v.max(1e-9).ln() + 1.0).collect();
        let m = fit_linear(&parse("log(x1)").unwrap(), &dataset(vec![x], y), &FitnessConfig::default()).unwrap();
        assert_eq!(m.rows_used, 4);
        assert!(m.nmse < 1e-12);
    }

    #[test]
    fn fitness_values() {
        let cfg = FitnessConfig::default();
        assert_eq!(fitness(0, 0.0, &cfg), 1.0);
        assert!((fitness(10, 0.0, &cfg) - 0.990045).abs() < 1e-6);
        assert!((fitness(10, 1.0, &cfg) - 0.495022).abs() < 1e-6);
        let cfg = cfg.with_alpha(0.01);
        // fitness part 0.9 at C = 0
        let base = FitnessConfig { eta: 0.5, ..cfg.clone() };
        assert!((fitness_alpha(0, 1.0 / 0.9 - 1.0, 5.0, &base) - 0.85).abs() < 1e-12);
        let f = fitness(10, 0.0, &cfg);
        assert_eq!(fitness_alpha(10, 0.0, 16.0, &cfg), f - 0.16);
        assert_eq!(fitness_alpha(10, 0.3, 7.0, &cfg.clone().with_alpha(0.0)), fitness(10, 0.3, &cfg));
    }

    #[test]
    fn r2_handles_sentinels() {
        assert_eq!(r2_score(&[1.0, f64::NAN], &[1.0, 2.0]), f64::NEG_INFINITY);
        assert_eq!(r2_score(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
    }

    proptest! {
        #[test]
        fn fitness_strictly_decreasing(c in 1usize..200, nmse in 0.0f64..100.0, eic in 0.0f64..15.0) {
            let cfg = FitnessConfig::default().with_alpha(0.01);
            prop_assert!(fitness(c + 1, nmse, &cfg) < fitness(c, nmse, &cfg));
            prop_assert!(fitness(c, nmse + 0.5, &cfg) < fitness(c, nmse, &cfg));
            prop_assert!(fitness_alpha(c, nmse, eic + 0.5, &cfg) < fitness_alpha(c, nmse, eic, &cfg));
            let f = fitness(c, nmse, &cfg);
            prop_assert!(f > 0.0 && f <= 1.0);
        }

        #[test]
        fn reported_nmse_matches_recomputation(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40;
            let x1: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
            let x2: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
            let y: Vec<f64> = (0..n).map(|i| x1[i] * x2[i] + rng.random_range(-1.0..1.0)).collect();
            let d = dataset(vec![x1, x2], y.clone());
            let m = fit_linear(&parse("x1 + exp(x2) - x1/x2").unwrap(), &d, &FitnessConfig::default()).unwrap();
            let pred = m.predict(&d).unwrap();
            let recomputed = 1.0 - r2_score(&pred, &y);
            prop_assert!((recomputed - m.nmse).abs() <= 1e-10 * m.nmse.max(1e-300));
        }
    }
}
