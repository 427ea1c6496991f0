use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{crossover, mutate, random_tree, SearchSpace};
use super::{better, Budget, Candidate, Evaluator, OperatorSet, ParetoArchive, SearchError, SearchResult};
use crate::dataset::Dataset;
use crate::eic::EicConfig;
use crate::expr::Expression;
use crate::fitting::FitnessConfig;

/// Genetic-programming settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_nodes: usize,
    pub elitism: usize,
    /// Generations or seconds.
    pub budget: Budget,
    pub seed: u64,
    pub operators: OperatorSet,
    pub fitness_cfg: FitnessConfig,
    pub eic_cfg: EicConfig,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 256,
            tournament_size: 4,
            crossover_prob: 0.7,
            mutation_prob: 0.3,
            max_nodes: 50,
            elitism: 1,
            budget: Budget::Steps(50),
            seed: 0,
            operators: OperatorSet::default(),
            fitness_cfg: FitnessConfig::default().with_alpha(FitnessConfig::GP_ALPHA),
            eic_cfg: EicConfig::default(),
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1");
        }
        let probs = [self.crossover_prob, self.mutation_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.max_nodes < 3 {
            return bad("max_nodes must be at least 3");
        }
        if self.elitism >= self.population_size {
            return bad("elitism must be smaller than the population");
        }
        self.fitness_cfg
            .validate()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        self.eic_cfg
            .validate()
            .map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        self.budget.check()
    }
}

fn initial_population(space: &SearchSpace, size: usize, rng: &mut ChaCha8Rng) -> Vec<Expression> {
    (0..size)
        .map(|i| {
            let depth = 2 + i % 4;
            let full = (i / 4) % 2 == 0;
            let mut tree = random_tree(space, depth, full, rng);
            let mut d = depth;
            while tree.complexity() > space.max_nodes && d > 1 {
                d -= 1;
                tree = random_tree(space, d, false, rng);
            }
            tree
        })
        .collect()
}

fn tournament<'p>(pop: &'p [Candidate], k: usize, rng: &mut ChaCha8Rng) -> &'p Candidate {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.random_range(0..pop.len())];
        if better(c, best).is_lt() {
            best = c;
        }
    }
    best
}

/// Runs GP on `data` and returns the Pareto archive of everything evaluated.
///
/// `history` holds the best fitness of the population after initialization
/// and after every generation.
pub fn gp_search(data: &Dataset, cfg: &GpConfig) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    if data.arity() == 0 {
        return Err(SearchError::NoInputs);
    }
    let started = Instant::now();
    let space = SearchSpace {
        operators: cfg.operators.clone(),
        arity: data.arity(),
        max_nodes: cfg.max_nodes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluator = Evaluator::new(data, cfg.fitness_cfg.clone(), cfg.eic_cfg.clone());
    let mut archive = ParetoArchive::new();

    let exprs = initial_population(&space, cfg.population_size, &mut rng);
    let mut population = evaluator.evaluate_batch(&exprs);
    for c in &population {
        archive.insert(c);
    }
    population.sort_by(better);
    let mut best = population[0].clone();
    let mut history = vec![best.fitness];

    let mut generations = 0;
    while !cfg.budget.exhausted(generations, started) {
        let mut offspring: Vec<Expression> = population[..cfg.elitism].iter().map(|c| c.expr.clone()).collect();
        while offspring.len() < cfg.population_size {
            let r: f64 = rng.random();
            let a = tournament(&population, cfg.tournament_size, &mut rng);
            if r < cfg.crossover_prob {
                let b = tournament(&population, cfg.tournament_size, &mut rng);
                let (x, y) = crossover(&a.expr, &b.expr, &space, &mut rng);
                offspring.push(x);
                if offspring.len() < cfg.population_size {
                    offspring.push(y);
                }
            } else if r < cfg.crossover_prob + cfg.mutation_prob {
                offspring.push(mutate(&a.expr, &space, &mut rng));
            } else {
                offspring.push(a.expr.clone());
            }
        }
        population = evaluator.evaluate_batch(&offspring);
        for c in &population {
            archive.insert(c);
        }
        population.sort_by(better);
        if better(&population[0], &best).is_lt() {
            best = population[0].clone();
        }
        history.push(population[0].fitness);
        generations += 1;
    }

    Ok(SearchResult {
        archive: archive.into_sorted(),
        best,
        history,
        evaluations: evaluator.evaluations(),
        steps: generations,
    })
}
