use rtv_core::batchsim::{
    freeze_instance, penalty_bound_check, rows_to_csv, run_simulation, solve_frozen, solve_round_lp, SimConfig,
    SimMethod,
};
use rtv_core::generators::{gen_random, RandomParams};
use rtv_core::mip::solve_ilp;
use rtv_core::lp::build_lp;
use rtv_core::{Execution, Qos};

fn small_config() -> SimConfig {
    SimConfig {
        arrival_rate: 0.15,
        horizon_rounds: 12,
        fleet_size: 5,
        region_size_km: 3.0,
        seeds: vec![4],
        save_instances: true,
        ..Default::default()
    }
}

#[test]
fn penalized_rounding_cost_bound() {
    for seed in 0..8 {
        let inst = gen_random(&RandomParams {
            n_requests: 6,
            n_vehicles: 2,
            capacity: 2,
            region_km: 3.0,
            seed,
            ..Default::default()
        });
        let frozen = freeze_instance(&inst, 2).unwrap();
        let check = penalty_bound_check(&frozen, 10_000, seed, Execution::Parallel).unwrap();
        assert!(check.lp_optimum <= check.ilp_optimum + 1e-9);
        assert!(
            check.mean_cost <= check.bound + 3.0 * check.std_error,
            "seed {seed}: {check:?}"
        );
    }
}

fn roomy(multiplier: f64, seed: u64) -> rtv_core::Instance {
    gen_random(&RandomParams {
        n_requests: 3,
        n_vehicles: 3,
        capacity: 2,
        region_km: 1.0,
        qos: Qos {
            max_wait: 1e5,
            max_delay: 1e5,
        },
        penalty_multiplier: multiplier,
        seed,
        ..Default::default()
    })
}

#[test]
fn penalty_scale_decides_service() {
    for seed in 0..10 {
        let serve_all = freeze_instance(&roomy(1e6, seed), 2).unwrap();
        let ilp = solve_ilp(&build_lp(&serve_all.catalog), None).unwrap();
        assert!(ilp.assignment.by_vehicle[serve_all.n_real..]
            .iter()
            .all(|&t| t == rtv_core::EMPTY_TRIP));
        let serve_none = freeze_instance(&roomy(1e-9, seed), 2).unwrap();
        let ilp = solve_ilp(&build_lp(&serve_none.catalog), None).unwrap();
        assert!(ilp.assignment.by_vehicle[..serve_none.n_real]
            .iter()
            .all(|&t| t == rtv_core::EMPTY_TRIP));
    }
}

#[test]
fn simulation_is_reproducible_and_conserving() {
    let cfg = small_config();
    let a = run_simulation(&cfg, 4).unwrap();
    let b = run_simulation(&cfg, 4).unwrap();
    assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
    assert!(a.driver.conservation_ok);
    let d = &a.driver;
    assert_eq!(d.served + d.reneged + d.rejected_terminal + d.waiting + d.onboard, d.arrivals);
    assert!(d.arrivals > 0);
}

#[test]
fn frozen_instances_reproduce_every_row() {
    let cfg = small_config();
    let report = run_simulation(&cfg, 4).unwrap();
    assert_eq!(report.frozen.len(), cfg.horizon_rounds);
    for frozen in &report.frozen {
        let lp = (frozen.instance.n_requests() > 0).then(|| solve_round_lp(frozen, cfg.support_bins).unwrap());
        for &m in &cfg.methods {
            let out = solve_frozen(frozen, m, lp.as_ref(), 4, &cfg).unwrap();
            let row = report
                .rows
                .iter()
                .find(|r| r.round == frozen.round && r.method == m)
                .unwrap();
            assert_eq!(out.rejected.len(), row.rejected, "round {} {}", frozen.round, m.name());
            assert!((out.distance_km - row.distance_km).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_arrivals() {
    let cfg = SimConfig {
        arrival_rate: 0.0,
        ..small_config()
    };
    let r = run_simulation(&cfg, 0).unwrap();
    assert_eq!(r.driver.arrivals, 0);
    assert!(r.rows.iter().all(|row| row.requests == 0 && row.distance_km == 0.0));
}

#[test]
fn rejection_without_carry_over_is_terminal() {
    let cfg = SimConfig {
        carry_over: false,
        arrival_rate: 0.6,
        driver: SimMethod::LpDet,
        ..small_config()
    };
    let r = run_simulation(&cfg, 9).unwrap();
    assert_eq!(r.driver.rejections, r.driver.rejected_terminal);
    assert!(r.driver.conservation_ok);
}

#[test]
fn config_rejects_unknown_fields() {
    assert!(serde_json::from_str::<SimConfig>(r#"{"fleet_size": 3, "bogus": 1}"#).is_err());
    let cfg: SimConfig = serde_json::from_str(r#"{"fleet_size": 3}"#).unwrap();
    assert_eq!(cfg.fleet_size, 3);
    assert!(SimConfig { capacity: 0, ..Default::default() }.validate().is_err());
}
