mod common;

use rtv_core::generators::{gen_gap_family, gen_tightness_family};
use rtv_core::lp::{build_lp, solve_lp, solve_lp_with, DualForm};

use common::penalty_instance;

#[test]
fn optimality_conditions_hold_on_random_instances() {
    for seed in 0..40 {
        let (_, cat) = penalty_instance(seed, 6, 3, 3);
        let lp = build_lp(&cat);
        let sol = solve_lp(&lp).unwrap();
        sol.primal.check(&cat).unwrap();
        let d = &sol.dual;
        assert!(d.max_violation(&cat) <= 1e-7, "seed {seed}");
        let dual_obj: f64 = d.y.iter().sum::<f64>() - d.z.iter().sum::<f64>();
        assert!((dual_obj - d.objective).abs() < 1e-7);
        assert!((sol.primal.objective - dual_obj).abs() < 1e-7, "seed {seed}");
        for (j, col) in lp.columns.iter().enumerate() {
            if sol.column_values[j] > 1e-7 {
                let slack = d.reduced_cost(cat.trip(col.trip), col.vehicle, col.cost);
                assert!(slack.abs() < 1e-7, "seed {seed}: slack {slack}");
            }
        }
    }
}

#[test]
fn covering_form_gives_nonnegative_request_duals() {
    for seed in 0..40 {
        let (_, cat) = penalty_instance(seed, 6, 3, 3);
        let lp = build_lp(&cat);
        let eq = solve_lp(&lp).unwrap();
        let cov = solve_lp_with(&lp, DualForm::Covering).unwrap();
        assert!((eq.primal.objective - cov.primal.objective).abs() < 1e-7);
        assert!(cov.dual.y.iter().all(|&y| y >= -1e-9));
        assert!(cov.dual.max_violation(&cat) <= 1e-7);
    }
}

#[test]
fn analytic_families() {
    for k in 2..=6 {
        let kf = k as f64;
        let gap = solve_lp(&build_lp(&gen_gap_family(k).unwrap().catalog)).unwrap();
        assert!((gap.primal.objective - (kf + 1.0) / kf).abs() < 1e-9);
        let t = gen_tightness_family(k).unwrap();
        let opt = solve_lp(&build_lp(&t.family.catalog)).unwrap();
        assert!((opt.primal.objective - t.x.objective).abs() < 1e-6);
    }
}
