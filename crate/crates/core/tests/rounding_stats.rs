use rtv_core::generators::gen_tightness_family;
use rtv_core::rounding::{round_deterministic, run_trials, run_trials_with, Method};
use rtv_core::Execution;

#[test]
fn tightness_unassigned_probability() {
    for k in 2..=4 {
        let fam = gen_tightness_family(k).unwrap();
        let stats = run_trials(&fam.x, &fam.family.catalog, Method::Dependent, 40_000, 77).unwrap();
        // A request is missed exactly when every one of its k vehicles idles.
        let exact = ((k as f64 - 1.0) / k as f64).powi(k as i32);
        for &f in &stats.per_request_unassigned_frequency {
            assert!((f - exact).abs() <= 4.0 * stats.binomial_se(exact), "k {k}: {f} vs {exact}");
        }
        assert_eq!(stats.vehicle_violation_frequency, 0.0);
        for ind in &stats.indicator_frequency {
            assert!((ind.frequency - ind.x).abs() <= 4.0 * ind.std_error.max(1e-12));
        }
        for row in &stats.coverage_histogram {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn independent_rounding_breaks_vehicle_constraints() {
    let fam = gen_tightness_family(3).unwrap();
    let stats = run_trials(&fam.x, &fam.family.catalog, Method::Independent, 5_000, 1).unwrap();
    assert!(stats.vehicle_violation_frequency > 0.0);
}

#[test]
fn trials_are_reproducible_across_execution_modes() {
    let fam = gen_tightness_family(3).unwrap();
    let cat = &fam.family.catalog;
    let a = run_trials_with(&fam.x, cat, Method::Dependent, 9_000, 5, None, Execution::Sequential).unwrap();
    let b = run_trials_with(&fam.x, cat, Method::Dependent, 9_000, 5, None, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn deterministic_rounding_has_no_spread() {
    let fam = gen_tightness_family(3).unwrap();
    let cat = &fam.family.catalog;
    let stats = run_trials(&fam.x, cat, Method::Deterministic, 50, 0).unwrap();
    let once = round_deterministic(&fam.x, cat).unwrap();
    assert_eq!(stats.cost_std_error, 0.0);
    assert!((stats.mean_cost - once.cost).abs() < 1e-12);
}
