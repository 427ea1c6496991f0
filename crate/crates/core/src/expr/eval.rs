use serde::{Deserialize, Serialize};

use super::Expression;
use crate::dataset::Dataset;
use crate::error::ArityError;

/// Column of outputs plus a count of NaN/±Inf entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub values: Vec<f64>,
    pub nonfinite_count: usize,
}

impl EvalResult {
    fn from_values(values: Vec<f64>) -> Self {
        let nonfinite_count = values.iter().filter(|v| !v.is_finite()).count();
        EvalResult { values, nonfinite_count }
    }
}

/// Evaluates `e` on every row of `data`.
///
/// Domain faults never abort; they surface as NaN/±Inf and are counted.
pub fn evaluate(e: &Expression, data: &Dataset) -> Result<EvalResult, ArityError> {
    check_arity(e, data.arity())?;
    Ok(EvalResult::from_values(eval_columns(e, data.columns(), data.len())))
}

pub(crate) fn check_arity(e: &Expression, arity: usize) -> Result<(), ArityError> {
    let needed = e.arity();
    if needed > arity {
        return Err(ArityError {
            index: needed - 1,
            arity,
        });
    }
    Ok(())
}

/// Vectorised evaluation over raw columns; the caller guarantees arity.
pub(crate) fn eval_columns(e: &Expression, columns: &[Vec<f64>], rows: usize) -> Vec<f64> {
    match e {
        Expression::Variable(i) => columns[*i].clone(),
        Expression::Constant(v) => vec![*v; rows],
        Expression::Unary(op, child) => {
            let mut values = eval_columns(child, columns, rows);
            for v in &mut values {
                *v = op.apply(*v);
            }
            values
        }
        Expression::Binary(op, l, r) => {
            let mut left = eval_columns(l, columns, rows);
            let right = eval_columns(r, columns, rows);
            for (a, b) in left.iter_mut().zip(&right) {
                *a = op.apply(*a, *b);
            }
            left
        }
    }
}
