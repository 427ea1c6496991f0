//! Python bindings: formulas, datasets, EIC scoring, fitting, search and
//! corpus generation.

use eicsr_core::bench::{builtin_suite, run_bench, BenchConfig, Method};
use eicsr_core::eic::{n_from_sigma as core_n_from_sigma, sigma_from_n as core_sigma_from_n, NodeEic};
use eicsr_core::fitting::fit_or_sentinel;
use eicsr_core::genfilter::{self, featurize, js_divergence, kl_divergence, Feature, FilterConfig, GeneratorConfig};
use eicsr_core::{
    calculate_eic as core_calculate_eic, evaluate, fitness as core_fitness, fitness_alpha as core_fitness_alpha,
    gp_search, mcts_search, parse, Budget, Candidate, EicConfig, FitnessConfig, GpConfig, MctsConfig,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, from_py_object, module = "eicsr")]
#[derive(Clone)]
struct Expression {
    inner: eicsr_core::Expression,
}

#[pymethods]
impl Expression {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse(text).map(|inner| Expression { inner }).map_err(value_error)
    }

    #[getter]
    fn complexity(&self) -> usize {
        self.inner.complexity()
    }

    /// Evaluates on one list per variable.
    fn evaluate(&self, columns: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let rows = columns.first().map_or(0, Vec::len);
        let data = eicsr_core::Dataset::from_columns(columns, vec![0.0; rows]).map_err(value_error)?;
        Ok(evaluate(&self.inner, &data).map_err(value_error)?.values)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression('{}')", self.inner)
    }

    fn __eq__(&self, other: &Expression) -> bool {
        self.inner == other.inner
    }
}

#[derive(FromPyObject)]
enum FormulaArg {
    Parsed(Expression),
    Text(String),
}

impl FormulaArg {
    fn resolve(self, data: Option<&eicsr_core::Dataset>) -> PyResult<eicsr_core::Expression> {
        match self {
            FormulaArg::Parsed(e) => Ok(e.inner),
            FormulaArg::Text(t) => match data {
                Some(d) => eicsr_core::expr::parse_with_names(&t, d.names()).map_err(value_error),
                None => parse(&t).map_err(value_error),
            },
        }
    }
}

#[pyclass(frozen, module = "eicsr")]
struct Dataset {
    inner: eicsr_core::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(columns: Vec<Vec<f64>>, target: Vec<f64>) -> PyResult<Self> {
        eicsr_core::Dataset::from_columns(columns, target)
            .map(|inner| Dataset { inner })
            .map_err(value_error)
    }

    /// Loads a CSV file; the target defaults to the last column.
    #[staticmethod]
    #[pyo3(signature = (path, target=None))]
    fn from_csv(path: &str, target: Option<&str>) -> PyResult<Self> {
        eicsr_core::Dataset::from_csv_path(path, target)
            .map(|(inner, _)| Dataset { inner })
            .map_err(value_error)
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn node_dict<'py>(py: Python<'py>, n: &NodeEic) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("path", n.path.to_string())?;
    d.set_item("formula", &n.formula)?;
    d.set_item("eic", n.eic)?;
    d.set_item("delta_r2", n.delta_r2)?;
    d.set_item("capped", n.capped)?;
    Ok(d)
}

fn candidate_dict<'py>(py: Python<'py>, c: &Candidate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("formula", c.formula.to_string())?;
    d.set_item("r2", c.r2())?;
    d.set_item("nmse", c.nmse())?;
    d.set_item("complexity", c.complexity)?;
    d.set_item("eic", c.eic)?;
    d.set_item("fitness", c.fitness)?;
    Ok(d)
}

/// EIC report of a formula as a dict with `overall`, `clipped`,
/// `delta_r2_root` and `per_node`.
#[pyfunction]
#[pyo3(signature = (formula, data, sigma_r=1e-6, repeats=1, seed=0))]
fn calculate_eic<'py>(
    py: Python<'py>,
    formula: FormulaArg,
    data: &Dataset,
    sigma_r: f64,
    repeats: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let e = formula.resolve(Some(&data.inner))?;
    let cfg = EicConfig {
        sigma_r,
        repeats,
        seed,
        ..EicConfig::default()
    };
    let r = py.detach(|| core_calculate_eic(&e, &data.inner, &cfg)).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("overall", r.overall)?;
    d.set_item("clipped", r.clipped)?;
    d.set_item("delta_r2_root", r.delta_r2_root)?;
    d.set_item("invalid_samples", r.invalid_samples)?;
    let nodes = r.per_node.iter().map(|n| node_dict(py, n)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("per_node", nodes)?;
    Ok(d)
}

/// Least-squares fit of the formula's additive terms.
#[pyfunction]
fn fit<'py>(py: Python<'py>, formula: FormulaArg, data: &Dataset) -> PyResult<Bound<'py, PyDict>> {
    let e = formula.resolve(Some(&data.inner))?;
    let m = fit_or_sentinel(&e, &data.inner, &FitnessConfig::default());
    let d = PyDict::new(py);
    d.set_item("formula", m.to_expression().to_string())?;
    d.set_item("terms", m.terms.iter().map(ToString::to_string).collect::<Vec<_>>())?;
    d.set_item("coefficients", m.coefficients.clone())?;
    d.set_item("nmse", m.nmse)?;
    d.set_item("r2", m.r2)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (complexity, nmse, eta=0.999))]
fn fitness(complexity: usize, nmse: f64, eta: f64) -> f64 {
    core_fitness(complexity, nmse, &FitnessConfig { eta, ..FitnessConfig::default() })
}

#[pyfunction]
#[pyo3(signature = (complexity, nmse, eic, alpha, eta=0.999))]
fn fitness_alpha(complexity: usize, nmse: f64, eic: f64, alpha: f64, eta: f64) -> f64 {
    let cfg = FitnessConfig {
        eta,
        alpha,
        ..FitnessConfig::default()
    };
    core_fitness_alpha(complexity, nmse, eic, &cfg)
}

#[pyfunction]
fn n_from_sigma(sigma_r2: f64) -> PyResult<f64> {
    core_n_from_sigma(sigma_r2).map_err(value_error)
}

#[pyfunction]
fn sigma_from_n(n: f64) -> f64 {
    core_sigma_from_n(n)
}

/// Runs GP or MCTS and returns `{"best": ..., "archive": [...]}`.
///
/// `budget` counts generations for GP and iterations for MCTS.
#[pyfunction]
#[pyo3(signature = (data, method="mcts", alpha=None, budget=None, seed=0, max_nodes=50, population=256))]
#[allow(clippy::too_many_arguments)]
fn search<'py>(
    py: Python<'py>,
    data: &Dataset,
    method: &str,
    alpha: Option<f64>,
    budget: Option<usize>,
    seed: u64,
    max_nodes: usize,
    population: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(PyValueError::new_err)?;
    let result = match method {
        Method::Gp => {
            let mut cfg = GpConfig {
                seed,
                max_nodes,
                population_size: population,
                ..GpConfig::default()
            };
            if let Some(a) = alpha {
                cfg.fitness_cfg.alpha = a;
            }
            if let Some(b) = budget {
                cfg.budget = Budget::Steps(b);
            }
            py.detach(|| gp_search(&data.inner, &cfg))
        }
        Method::Mcts => {
            let mut cfg = MctsConfig {
                seed,
                max_nodes,
                ..MctsConfig::default()
            };
            if let Some(a) = alpha {
                cfg.fitness_cfg.alpha = a;
            }
            if let Some(b) = budget {
                cfg.budget = Budget::Steps(b);
            }
            py.detach(|| mcts_search(&data.inner, &cfg))
        }
    }
    .map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("best", candidate_dict(py, &result.best)?)?;
    let archive = result.archive.iter().map(|c| candidate_dict(py, c)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("archive", archive)?;
    d.set_item("evaluations", result.evaluations)?;
    d.set_item("steps", result.steps)?;
    Ok(d)
}

/// Random formulas, optionally rejection-filtered at EIC `filter_eic`.
/// Items whose filter gave up are `None`.
#[pyfunction]
#[pyo3(signature = (count, vars=3, filter_eic=None, seed=0))]
fn generate<'py>(
    py: Python<'py>,
    count: usize,
    vars: usize,
    filter_eic: Option<f64>,
    seed: u64,
) -> PyResult<Vec<Option<Bound<'py, PyDict>>>> {
    let gcfg = GeneratorConfig {
        arity: vars,
        seed,
        ..GeneratorConfig::default()
    };
    let fcfg = FilterConfig {
        theta: filter_eic.unwrap_or(FilterConfig::default().theta),
        ..FilterConfig::default()
    };
    let items = py
        .detach(|| genfilter::generate_corpus(&gcfg, &fcfg, filter_eic.is_some(), count))
        .map_err(value_error)?;
    items
        .into_iter()
        .map(|item| {
            item.ok()
                .map(|e| {
                    let d = PyDict::new(py);
                    d.set_item("formula", e.formula.to_string())?;
                    d.set_item("eic", e.eic)?;
                    d.set_item("attempts", e.attempts)?;
                    d.set_item("complexity", e.complexity)?;
                    Ok(d)
                })
                .transpose()
        })
        .collect()
}

/// Per-feature JS and KL divergences (bits) of a corpus against a
/// reference, by default the built-in physics corpus.
#[pyfunction]
#[pyo3(signature = (corpus, reference=None))]
fn compare<'py>(py: Python<'py>, corpus: Vec<String>, reference: Option<Vec<String>>) -> PyResult<Bound<'py, PyDict>> {
    let parse_all = |texts: &[String]| texts.iter().map(|t| parse(t).map_err(value_error)).collect::<PyResult<Vec<_>>>();
    let p = featurize(&parse_all(&corpus)?).map_err(value_error)?;
    let q = match reference {
        Some(r) => featurize(&parse_all(&r)?),
        None => featurize(&genfilter::reference_corpus()),
    }
    .map_err(value_error)?;
    let js = js_divergence(&p, &q).map_err(value_error)?;
    let kl = kl_divergence(&p, &q).map_err(value_error)?;
    let out = PyDict::new(py);
    for (name, div) in [("js", js), ("kl", kl)] {
        let d = PyDict::new(py);
        for f in Feature::ALL {
            d.set_item(f.name(), div.get(f))?;
        }
        out.set_item(name, d)?;
    }
    Ok(out)
}

/// Runs the built-in benchmark suite and returns the report as JSON text.
#[pyfunction(name = "bench")]
#[pyo3(signature = (method="mcts", alpha=None, noise=0.0, trials=10, seed=0, budget=None))]
fn run_benchmark(
    py: Python<'_>,
    method: &str,
    alpha: Option<f64>,
    noise: f64,
    trials: usize,
    seed: u64,
    budget: Option<usize>,
) -> PyResult<String> {
    let mut cfg = BenchConfig {
        method: method.parse().map_err(PyValueError::new_err)?,
        alpha,
        noise_eta: noise,
        trials,
        seed,
        timing: false,
        ..BenchConfig::default()
    };
    if let Some(b) = budget {
        cfg.gp.budget = Budget::Steps(b);
        cfg.mcts.budget = Budget::Steps(b);
    }
    let report = py.detach(|| run_bench(&builtin_suite(), &cfg)).map_err(value_error)?;
    Ok(report.to_json())
}

#[pymodule]
fn eicsr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expression>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(calculate_eic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fitness, m)?)?;
    m.add_function(wrap_pyfunction!(fitness_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(n_from_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_from_n, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
