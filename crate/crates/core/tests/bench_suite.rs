use eicsr_core::bench::{builtin_suite, run_bench, BenchConfig, Category, Method};

#[test]
fn builtin_suite_report() {
    let cfg = BenchConfig {
        method: Method::Mcts,
        alpha: Some(0.01),
        trials: 3,
        timing: false,
        ..BenchConfig::default()
    };
    let suite = builtin_suite();
    let report = run_bench(&suite, &cfg).unwrap();
    assert_eq!(report.runs.len(), 60);
    assert_eq!(report.alpha, 0.01);
    for p in &report.problems {
        assert_eq!(p.summary.runs, 3);
        assert_eq!(p.summary.failures, 0);
        assert!(p.summary.mean_eic.is_some_and(f64::is_finite), "{}", p.problem);
    }
    let mean = |cat: Category| {
        let v: Vec<f64> = report.problems.iter().filter(|p| p.category == cat).map(|p| p.truth_eic).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(Category::Physics) < 1.0);
    assert!(mean(Category::Pathological) > 3.0);

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for key in ["method", "alpha", "noise_eta", "trials", "seed", "runs", "problems", "aggregate"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report.to_json(), run_bench(&suite, &cfg).unwrap().to_json());
}
