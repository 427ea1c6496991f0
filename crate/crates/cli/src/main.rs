use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use eicsr_core::bench::{builtin_suite, run_bench, BenchConfig, Method};
use eicsr_core::eic::{calculate_eic, EicConfig, NodeEic};
use eicsr_core::expr::parse_with_names;
use eicsr_core::genfilter::{
    featurize, generate_corpus, js_divergence, kl_divergence, reference_corpus, Divergence, Feature, FilterConfig,
    GeneratorConfig,
};
use eicsr_core::search::{gp_search, mcts_search, Budget, Candidate, GpConfig, MctsConfig, SearchResult};
use eicsr_core::{parse, Dataset, Expression, FitnessConfig};

#[derive(Parser)]
#[command(name = "eicsr", version, about = "Symbolic regression with the effective information criterion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a formula's EIC on a dataset.
    Eval(EvalArgs),
    /// Search for formulas fitting a dataset.
    Search(SearchArgs),
    /// Generate a random formula corpus, optionally EIC-filtered.
    Gen(GenArgs),
    /// Compare corpus feature distributions against a reference.
    Compare(CompareArgs),
    /// Run the benchmark suite.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    formula: String,
    /// CSV with a header row; the last column is the target unless --target is given.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report every operator node.
    #[arg(long)]
    per_node: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gp,
    Mcts,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gp => Method::Gp,
            MethodArg::Mcts => Method::Mcts,
        }
    }
}

#[derive(clap::Args)]
struct SearchArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: Option<String>,
    /// EIC penalty weight; defaults to 0.002 for gp and 0.01 for mcts.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.999)]
    eta: f64,
    /// `60s`, `200gen`, `5000it` or a bare step count.
    #[arg(long)]
    budget: Option<Budget>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    max_nodes: usize,
    #[arg(long, default_value_t = 256)]
    population: usize,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    ucb_c: f64,
    #[arg(long, default_value_t = 16)]
    max_children: usize,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 3)]
    vars: usize,
    /// Keep only formulas with EIC at or below this threshold.
    #[arg(long)]
    filter_eic: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_retries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON lines output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// JSON lines corpus with a `formula` field; repeatable.
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    /// Reference corpus; the built-in physics formulas when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long, default_value = "builtin")]
    suite: String,
    #[arg(long, value_enum, default_value = "mcts")]
    method: MethodArg,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-run search budget.
    #[arg(long)]
    budget: Option<Budget>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write zero runtimes so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_data(path: &Path, target: Option<&str>) -> Result<Dataset> {
    let (data, rejected) =
        Dataset::from_csv_path(path, target).with_context(|| format!("cannot load {}", path.display()))?;
    if rejected > 0 {
        eprintln!("dropped {rejected} row(s) with non-finite values");
    }
    Ok(data)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    formula: String,
    sigma_r: f64,
    seed: u64,
    eic: f64,
    clipped: bool,
    invalid_samples: usize,
    delta_r2_root: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_node: Option<&'a [NodeEic]>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let data = load_data(&args.data, args.target.as_deref())?;
    let expr = parse_with_names(&args.formula, data.names()).context("cannot parse formula")?;
    let cfg = EicConfig {
        sigma_r: args.sigma,
        repeats: args.repeats,
        seed: args.seed,
        ..EicConfig::default()
    };
    let report = calculate_eic(&expr, &data, &cfg)?;
    let mut out = io::stdout().lock();
    if args.json {
        let view = EvalOutput {
            formula: expr.to_string(),
            sigma_r: cfg.sigma_r,
            seed: cfg.seed,
            eic: report.overall,
            clipped: report.clipped,
            invalid_samples: report.invalid_samples,
            delta_r2_root: finite(report.delta_r2_root),
            per_node: args.per_node.then_some(report.per_node.as_slice()),
        };
        serde_json::to_writer_pretty(&mut out, &view)?;
        writeln!(out)?;
    } else {
        writeln!(out, "eic {:.6}{}", report.overall, if report.clipped { " (capped)" } else { "" })?;
        if args.per_node {
            writeln!(out, "{:<12} {:>10}  formula", "path", "eic")?;
            for n in &report.per_node {
                let mark = if n.capped { " (capped)" } else { "" };
                writeln!(out, "{:<12} {:>10.4}  {}{mark}", n.path.to_string(), n.eic, n.formula)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CandidateRecord {
    formula: String,
    r2: Option<f64>,
    nmse: Option<f64>,
    complexity: usize,
    eic: f64,
    fitness: f64,
}

impl From<&Candidate> for CandidateRecord {
    fn from(c: &Candidate) -> Self {
        CandidateRecord {
            formula: c.formula.to_string(),
            r2: finite(c.r2()),
            nmse: finite(c.nmse()),
            complexity: c.complexity,
            eic: c.eic,
            fitness: c.fitness,
        }
    }
}

#[derive(Serialize)]
struct SearchOutput {
    method: Method,
    alpha: f64,
    eta: f64,
    seed: u64,
    budget: String,
    evaluations: usize,
    steps: usize,
    best: CandidateRecord,
    archive: Vec<CandidateRecord>,
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let data = load_data(&args.data, args.target.as_deref())?;
    let method = Method::from(args.method);
    let alpha = args.alpha.unwrap_or(match method {
        Method::Gp => FitnessConfig::GP_ALPHA,
        Method::Mcts => FitnessConfig::MCTS_ALPHA,
    });
    let fitness_cfg = FitnessConfig {
        eta: args.eta,
        alpha,
        ..FitnessConfig::default()
    };
    let (result, budget): (SearchResult, Budget) = match method {
        Method::Gp => {
            let cfg = GpConfig {
                population_size: args.population,
                max_nodes: args.max_nodes,
                budget: args.budget.unwrap_or(GpConfig::default().budget),
                seed: args.seed,
                fitness_cfg,
                ..GpConfig::default()
            };
            (gp_search(&data, &cfg)?, cfg.budget)
        }
        Method::Mcts => {
            let cfg = MctsConfig {
                ucb_c: args.ucb_c,
                max_children: args.max_children,
                max_nodes: args.max_nodes,
                budget: args.budget.unwrap_or(MctsConfig::default().budget),
                seed: args.seed,
                fitness_cfg,
                ..MctsConfig::default()
            };
            (mcts_search(&data, &cfg)?, cfg.budget)
        }
    };
    let view = SearchOutput {
        method,
        alpha,
        eta: args.eta,
        seed: args.seed,
        budget: budget.to_string(),
        evaluations: result.evaluations,
        steps: result.steps,
        best: (&result.best).into(),
        archive: result.archive.iter().map(CandidateRecord::from).collect(),
    };
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &view)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let gcfg = GeneratorConfig {
        arity: args.vars,
        seed: args.seed,
        ..GeneratorConfig::default()
    };
    let fcfg = FilterConfig {
        theta: args.filter_eic.unwrap_or(f64::INFINITY),
        max_retries: args.max_retries,
        ..FilterConfig::default()
    };
    let results = generate_corpus(&gcfg, &fcfg, args.filter_eic.is_some(), args.count)?;
    let mut out = output(args.out.as_deref())?;
    let mut exhausted = 0;
    for r in results {
        match r {
            Ok(entry) => {
                serde_json::to_writer(&mut out, &entry)?;
                writeln!(out)?;
            }
            Err(_) => exhausted += 1,
        }
    }
    out.flush()?;
    if exhausted > 0 {
        eprintln!("{exhausted} item(s) found no formula under the threshold");
    }
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<Expression>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut corpus = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        let Some(text) = value.get("formula").and_then(|f| f.as_str()) else {
            bail!("{}:{}: missing string field `formula`", path.display(), i + 1);
        };
        corpus.push(parse(text).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(corpus)
}

#[derive(Serialize)]
struct CompareRow {
    corpus: String,
    formulas: usize,
    js: Divergence,
    kl: Divergence,
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let (reference_name, reference) = match &args.reference {
        Some(p) => (p.display().to_string(), read_corpus(p)?),
        None => ("builtin".to_string(), reference_corpus()),
    };
    let reference_hist = featurize(&reference)?;
    let mut rows = Vec::new();
    for path in &args.corpus {
        let corpus = read_corpus(path)?;
        let hist = featurize(&corpus).with_context(|| path.display().to_string())?;
        rows.push(CompareRow {
            corpus: path.display().to_string(),
            formulas: corpus.len(),
            js: js_divergence(&hist, &reference_hist)?,
            kl: kl_divergence(&hist, &reference_hist)?,
        });
    }
    let mut out = io::stdout().lock();
    match args.format {
        Format::Json => {
            let view = serde_json::json!({ "reference": reference_name, "corpora": rows });
            serde_json::to_writer_pretty(&mut out, &view)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let names: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
            writeln!(out, "corpus,metric,{}", names.join(","))?;
            for row in &rows {
                for (metric, d) in [("js", &row.js), ("kl", &row.kl)] {
                    let values: Vec<String> = Feature::ALL.iter().map(|&f| d.get(f).to_string()).collect();
                    writeln!(out, "{},{metric},{}", row.corpus, values.join(","))?;
                }
            }
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if args.suite != "builtin" {
        bail!("unknown suite {:?}; only `builtin` is available", args.suite);
    }
    let threads = match std::env::var("EICSR_THREADS") {
        Ok(v) => Some(v.parse::<usize>().context("EICSR_THREADS must be a positive integer")?),
        Err(_) => None,
    };
    let mut cfg = BenchConfig {
        noise_eta: args.noise,
        trials: args.trials,
        method: args.method.into(),
        alpha: args.alpha,
        seed: args.seed,
        timing: !args.no_timing,
        threads,
        ..BenchConfig::default()
    };
    if let Some(b) = args.budget {
        cfg.gp.budget = b;
        cfg.mcts.budget = b;
    }
    let report = run_bench(&builtin_suite(), &cfg)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    if let Some(p) = &args.csv {
        let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
        report.write_csv(BufWriter::new(file))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let result = match Cli::parse().command {
        Command::Eval(a) => cmd_eval(a),
        Command::Search(a) => cmd_search(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
    };
    // a closed stdout (e.g. piping into `head`) is not an error
    match result {
        Err(e) if e.chain().any(is_broken_pipe) => Ok(()),
        other => other,
    }
}

fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    if let Some(io) = e.downcast_ref::<io::Error>() {
        return io.kind() == io::ErrorKind::BrokenPipe;
    }
    e.downcast_ref::<serde_json::Error>()
        .and_then(|j| j.io_error_kind())
        .is_some_and(|k| k == io::ErrorKind::BrokenPipe)
}
