use eicsr_core::search::Evaluator;
use eicsr_core::{gp_search, mcts_search, Budget, Dataset, EicConfig, FitnessConfig, GpConfig, MctsConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rows: usize, arity: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<f64>> = (0..arity)
        .map(|_| (0..rows).map(|_| rng.random_range(1.0..5.0)).collect())
        .collect();
    let y = (0..rows)
        .map(|i| f(&columns.iter().map(|c| c[i]).collect::<Vec<_>>()))
        .collect();
    Dataset::from_columns(columns, y).unwrap()
}

#[test]
fn gp_recovers_linear_target() {
    let data = sample(200, 2, 1, |x| 2.0 * x[0] + x[1]);
    let cfg = GpConfig {
        budget: Budget::Steps(50),
        seed: 7,
        ..GpConfig::default()
    };
    let res = gp_search(&data, &cfg).unwrap();
    assert!(
        res.archive.iter().any(|c| c.r2() > 0.999 && c.complexity <= 5),
        "{:?}",
        res.archive.iter().map(|c| (c.formula.to_string(), c.r2())).collect::<Vec<_>>()
    );
    assert_eq!(res, gp_search(&data, &cfg).unwrap());
}

#[test]
fn mcts_recovers_square() {
    let data = sample(200, 1, 2, |x| x[0] * x[0]);
    let cfg = MctsConfig {
        budget: Budget::Steps(5000),
        seed: 3,
        ..MctsConfig::default()
    };
    let res = mcts_search(&data, &cfg).unwrap();
    assert!(res.archive.iter().any(|c| c.r2() > 0.999));
    assert_eq!(res.steps, 5000);
}

#[test]
fn candidate_fitness_is_recomputable() {
    let data = sample(64, 2, 3, |x| x[0] * x[1].sin());
    let cfg = GpConfig {
        budget: Budget::Steps(3),
        population_size: 32,
        fitness_cfg: FitnessConfig::default().with_alpha(0.01),
        ..GpConfig::default()
    };
    let res = gp_search(&data, &cfg).unwrap();
    for c in res.archive.iter().chain([&res.best]) {
        assert_eq!(c.fitness, c.recomputed_fitness(&cfg.fitness_cfg));
        assert_eq!(c.complexity, c.formula.complexity());
    }
    let mut ev = Evaluator::new(&data, cfg.fitness_cfg.clone(), EicConfig::default());
    let again = ev.evaluate(&res.best.expr);
    assert_eq!(again, res.best);
}

fn paired_archive_eic(alpha: f64, gp: bool) -> f64 {
    let data = sample(150, 2, 4, |x| x[0] * x[1] + x[0]);
    let runs: Vec<f64> = (0..10)
        .map(|seed| {
            let fitness_cfg = FitnessConfig::default().with_alpha(alpha);
            let res = if gp {
                let cfg = GpConfig {
                    population_size: 64,
                    budget: Budget::Steps(10),
                    seed,
                    fitness_cfg,
                    ..GpConfig::default()
                };
                gp_search(&data, &cfg).unwrap()
            } else {
                let cfg = MctsConfig {
                    budget: Budget::Steps(3000),
                    seed,
                    fitness_cfg,
                    ..MctsConfig::default()
                };
                mcts_search(&data, &cfg).unwrap()
            };
            assert!(res.best.r2() > 0.99, "seed {seed} alpha {alpha}: {}", res.best.formula);
            res.mean_archive_eic()
        })
        .collect();
    runs.iter().sum::<f64>() / runs.len() as f64
}

#[test]
fn eic_penalty_does_not_raise_archive_eic_gp() {
    let vanilla = paired_archive_eic(0.0, true);
    let guided = paired_archive_eic(FitnessConfig::GP_ALPHA, true);
    // equal archives may be summed in a different order
    assert!(guided <= vanilla + 1e-12, "{guided} > {vanilla}");
}

#[test]
fn eic_penalty_does_not_raise_archive_eic_mcts() {
    let vanilla = paired_archive_eic(0.0, false);
    let guided = paired_archive_eic(FitnessConfig::MCTS_ALPHA, false);
    assert!(guided <= vanilla, "{guided} > {vanilla}");
}
