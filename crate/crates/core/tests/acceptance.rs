//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rtv_core::batchsim::{run_simulations, scripted_carryover, SimConfig, SimMethod};
use rtv_core::colgen::solve_lp_by_colgen;
use rtv_core::generators::{gen_gap_family, gen_tightness_family};
use rtv_core::lp::{build_lp, solve_lp};
use rtv_core::mip::{brute_force_opt, solve_ilp};
use rtv_core::rounding::{run_trials_with, Method, RoundingTrialStats};
use rtv_core::routing::exact_cost;
use rtv_core::{Execution, FractionalSolution, TripCatalog};

use common::{brute_route, chernoff, penalty_instance, routing_case};

const E_INV: f64 = 0.36787944117144233;
const TRIALS: usize = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let ok = elapsed < limit;
    outcome(
        o.pass && ok,
        format!(
            "{}; {:.1}s (limit {:.0}s)",
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        ),
    )
}

fn gap_family() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ratios = Vec::new();
    for k in 2..=8 {
        let f = gen_gap_family(k).unwrap();
        let lp = build_lp(&f.catalog);
        let lp_obj = solve_lp(&lp).unwrap().primal.objective;
        let ilp_obj = solve_ilp(&lp, None).unwrap().objective;
        let kf = k as f64;
        worst = worst
            .max((lp_obj - (kf + 1.0) / kf).abs())
            .max((ilp_obj - 2.0).abs())
            .max((ilp_obj / lp_obj - 2.0 * kf / (kf + 1.0)).abs());
        ratios.push(ilp_obj / lp_obj);
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    outcome(
        worst <= 1e-6 && increasing,
        format!("max deviation {worst:.2e}, ratios increasing: {increasing}"),
    )
}

fn ilp_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..200 {
        let (inst, cat) = penalty_instance(seed, 6, 3, 3);
        let ilp = solve_ilp(&build_lp(&cat), None).unwrap().objective;
        // Oracle: enumerate the real vehicles only and charge penalties.
        let n_real = inst.vehicles.iter().filter(|v| !v.is_dummy()).count();
        let real = real_catalog(&cat, n_real);
        let penalties: Vec<f64> = inst.requests.iter().map(|r| r.penalty).collect();
        let bf = brute_force_opt(&real, Some(&penalties)).unwrap().objective;
        let d = (ilp - bf).abs();
        worst = worst.max(d);
        if d > 1e-9 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("200 instances, max |ilp - brute force| {worst:.2e}"))
}

/// The catalog restricted to the first `n_real` vehicles.
fn real_catalog(cat: &TripCatalog, n_real: usize) -> TripCatalog {
    TripCatalog::new(
        cat.n_requests(),
        cat.trips().to_vec(),
        (0..n_real).map(|v| cat.admissible(v).to_vec()).collect(),
    )
    .unwrap()
}

fn routing_oracle() -> Outcome {
    let (mut worst, mut flag_mismatch, mut feasible) = (0.0f64, 0, 0);
    for seed in 0..500 {
        let (inst, trip) = routing_case(seed);
        let v = &inst.vehicles[0];
        let dp = exact_cost(&trip, v, &inst).unwrap();
        match brute_route(&trip, v, &inst) {
            Some(len) => {
                feasible += 1;
                if !dp.feasible {
                    flag_mismatch += 1;
                } else {
                    worst = worst.max((dp.length - len).abs());
                }
            }
            None => flag_mismatch += usize::from(dp.feasible),
        }
    }
    outcome(
        worst <= 1e-9 && flag_mismatch == 0,
        format!("500 cases ({feasible} feasible), max length deviation {worst:.2e}, flag mismatches {flag_mismatch}"),
    )
}

struct McInstance {
    name: String,
    catalog: TripCatalog,
    x: FractionalSolution,
    /// ((k-1)/k)^k for tightness instances.
    exact_unassigned: Option<f64>,
    stats: RoundingTrialStats,
}

fn monte_carlo_instances() -> Vec<McInstance> {
    let mut out = Vec::new();
    for k in [2usize, 3, 4] {
        let t = gen_tightness_family(k).unwrap();
        let kf = k as f64;
        let stats = run_trials_with(
            &t.x,
            &t.family.catalog,
            Method::Dependent,
            TRIALS,
            1000 + k as u64,
            None,
            Execution::Parallel,
        )
        .unwrap();
        out.push(McInstance {
            name: format!("tightness k={k}"),
            catalog: t.family.catalog,
            x: t.x,
            exact_unassigned: Some(((kf - 1.0) / kf).powi(k as i32)),
            stats,
        });
    }
    for seed in 0..20 {
        let (_, cat) = penalty_instance(5000 + seed, 7, 4, 3);
        let x = solve_lp(&build_lp(&cat)).unwrap().primal;
        let stats =
            run_trials_with(&x, &cat, Method::Dependent, TRIALS, seed, None, Execution::Parallel)
                .unwrap();
        out.push(McInstance {
            name: format!("random seed {}", 5000 + seed),
            catalog: cat,
            x,
            exact_unassigned: None,
            stats,
        });
    }
    out
}

fn unassigned_bounds(mc: &[McInstance]) -> Outcome {
    let mut failures = Vec::new();
    let mut exact_checks = Vec::new();
    for m in mc {
        for (r, &f) in m.stats.per_request_unassigned_frequency.iter().enumerate() {
            let se = m.stats.binomial_se(f);
            if f > E_INV + 3.0 * se {
                failures.push(format!("{} r{r}: {f:.5} > 1/e", m.name));
            }
            if let Some(p) = m.exact_unassigned {
                let se_exact = m.stats.binomial_se(p);
                if (f - p).abs() > 3.0 * se_exact {
                    failures.push(format!("{} r{r}: {f:.5} vs exact {p:.8}", m.name));
                }
            }
        }
        if let Some(p) = m.exact_unassigned {
            let mean = m.stats.per_request_unassigned_frequency.iter().sum::<f64>()
                / m.catalog.n_requests() as f64;
            exact_checks.push(format!("{}: {mean:.5} vs {p:.8}", m.name));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{}; {}", exact_checks.join(", "), failure_text(&failures)),
    )
}

fn failure_text(failures: &[String]) -> String {
    if failures.is_empty() {
        "no violations".into()
    } else {
        format!("violations: {}", failures.join("; "))
    }
}

fn cost_bound(mc: &[McInstance]) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_margin = f64::NEG_INFINITY;
    for m in mc {
        let s = &m.stats;
        // Integral optima give sigma 0; the float floor absorbs summation error.
        let float_tol = 1e-9 * m.x.objective.abs().max(1.0);
        if s.cost_std_error > 0.0 {
            worst_margin = worst_margin.max((s.mean_cost - m.x.objective) / s.cost_std_error);
        }
        if s.mean_cost > m.x.objective + 3.0 * s.cost_std_error + float_tol {
            failures.push(format!("{}: {:.6} > {:.6}", m.name, s.mean_cost, m.x.objective));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} instances, largest (mean - LP)/sigma {worst_margin:.2}; {}",
            mc.len(),
            failure_text(&failures)
        ),
    )
}

fn chernoff_bounds(mc: &[McInstance]) -> Outcome {
    let stated = [(1, 0.679570), (2, 0.273566), (3, 0.078440)];
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for (delta, stated_value) in stated {
        let bound = chernoff(delta as f64);
        notes.push(format!("d={delta}: bound {bound:.6} (listed {stated_value})"));
        for m in mc {
            for r in 0..m.catalog.n_requests() {
                // Y_r has mean 1 before correction; test Y_r >= 1 + delta.
                let f = m.stats.coverage_at_least(r, 1 + delta);
                if f > bound + 3.0 * m.stats.binomial_se(f) {
                    failures.push(format!("{} r{r} d={delta}: {f:.5}", m.name));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{}; {}", notes.join(", "), failure_text(&failures)),
    )
}

fn covariance(mc: &[McInstance]) -> Outcome {
    let mut failures = Vec::new();
    let mut pairs = 0;
    for m in mc.iter().filter(|m| m.exact_unassigned.is_some()) {
        for p in &m.stats.pair_covariance {
            pairs += 1;
            let target = -p.x_a * p.x_b;
            if (p.covariance - target).abs() > 3.0 * p.std_error || p.joint_frequency != 0.0 {
                failures.push(format!(
                    "{} v{} ({},{}): {:.6} vs {:.6}",
                    m.name, p.vehicle, p.trip_a, p.trip_b, p.covariance, target
                ));
            }
        }
    }
    outcome(
        failures.is_empty() && pairs > 0,
        format!("{pairs} same-vehicle pairs; {}", failure_text(&failures)),
    )
}

fn carryover() -> Outcome {
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for k in [2usize, 3, 5] {
        let pts = scripted_carryover(k, 3, 10_000, 77 + k as u64, Execution::Parallel).unwrap();
        for p in &pts {
            if p.fraction_unassigned > p.bound + 3.0 * p.std_error {
                failures.push(format!("k={k} n={}: {:.5} > {:.5}", p.rounds, p.fraction_unassigned, p.bound));
            }
        }
        detail.push(format!(
            "k={k}: {}",
            pts.iter()
                .map(|p| format!("{:.4}<={:.4}", p.fraction_unassigned, p.bound))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    outcome(failures.is_empty(), format!("{}; {}", detail.join(", "), failure_text(&failures)))
}

fn colgen_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_violation = f64::NEG_INFINITY;
    let mut failures = 0;
    for seed in 0..100 {
        let (inst, cat) = penalty_instance(9000 + seed, 8, 3, 3);
        let k = inst.vehicles.iter().map(|v| v.capacity).max().unwrap();
        let full = solve_lp(&build_lp(&cat)).unwrap().primal.objective;
        let cg = solve_lp_by_colgen(&inst, k, None).unwrap();
        let d = (cg.primal.objective - full).abs();
        let viol = cg.dual.max_violation(&cat);
        worst = worst.max(d);
        worst_violation = worst_violation.max(viol);
        if d > 1e-6 || viol > 1e-6 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("100 instances, max |colgen - LP| {worst:.2e}, max dual violation on full catalog {worst_violation:.2e}"),
    )
}

/// Scenario for the desk-scale method comparison.
fn comparison_config() -> SimConfig {
    SimConfig {
        arrival_rate: 0.3,
        horizon_rounds: 60,
        batch_interval: 30.0,
        fleet_size: 20,
        capacity: 3,
        region_size_km: 5.0,
        speed: 0.01,
        methods: vec![SimMethod::Ilp, SimMethod::LpRand, SimMethod::LpDet],
        seeds: vec![1, 2, 3],
        ..Default::default()
    }
}

fn simulation() -> (Outcome, Outcome) {
    let cfg = comparison_config();
    let reports = run_simulations(&cfg, Execution::Parallel).unwrap();
    let pooled = rtv_core::batchsim::summarize(&cfg, &reports).pooled;
    let pct = |m| pooled[&m].rejected_pct;
    let (ilp, rand, det) = (pct(SimMethod::Ilp), pct(SimMethod::LpRand), pct(SimMethod::LpDet));
    let waiting: f64 = reports.iter().map(|r| r.driver.mean_waiting_per_round).sum::<f64>()
        / reports.len() as f64;
    let conserved = reports.iter().all(|r| r.driver.conservation_ok);
    let table = outcome(
        (rand - ilp).abs() <= 2.0
            && (det - ilp).abs() <= 2.0
            && waiting >= 50.0
            && conserved,
        format!(
            "rejected % ilp {ilp:.3}, lp+rand {rand:.3}, lp+det {det:.3} (det <= rand: {}); mean waiting/round {waiting:.1}; {} vehicles, {} rounds x {} seeds",
            det <= rand,
            cfg.fleet_size,
            cfg.horizon_rounds,
            cfg.seeds.len()
        ),
    );

    let rows: Vec<_> = reports
        .iter()
        .flat_map(|r| &r.rows)
        .filter(|r| r.method == SimMethod::Ilp)
        .collect();
    let well_formed = rows.len() == cfg.horizon_rounds * cfg.seeds.len()
        && rows.iter().all(|r| {
            (0.0..=1.0).contains(&r.lp_integral_frac) && (0.0..=1.0).contains(&r.lp_half_integral_frac)
        });
    let mean = |f: fn(&rtv_core::batchsim::SimulationReport) -> f64| {
        reports.iter().map(f).sum::<f64>() / reports.len() as f64
    };
    let support = outcome(
        well_formed,
        format!(
            "reported for {} rounds: mean integral fraction {:.4}, mean half-integral fraction of non-integral support {:.4}",
            rows.len(),
            mean(|r| r.mean_lp_integral_frac),
            mean(|r| r.mean_lp_half_integral_frac)
        ),
    );
    (table, support)
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: &str, name: &str, o: Outcome| {
        all_pass &= o.pass;
        println!(
            "criterion {id} [{name}]: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };

    let t = Instant::now();
    report("1", "gap family", within_time(gap_family(), t.elapsed(), Duration::from_secs(5)));

    let t = Instant::now();
    report("2", "ILP vs brute force", within_time(ilp_oracle(), t.elapsed(), Duration::from_secs(60)));

    let t = Instant::now();
    report("3", "routing vs permutations", within_time(routing_oracle(), t.elapsed(), Duration::from_secs(30)));

    let t = Instant::now();
    let mc = monte_carlo_instances();
    let c4 = unassigned_bounds(&mc);
    let mc_time = t.elapsed();
    report("4", "unassigned probability", within_time(c4, mc_time, Duration::from_secs(120)));
    report("5", "expected corrected cost", cost_bound(&mc));
    report("6", "over-assignment tail", chernoff_bounds(&mc));

    let t = Instant::now();
    report("7", "multi-round carry-over", within_time(carryover(), t.elapsed(), Duration::from_secs(120)));

    let t = Instant::now();
    report("8", "column generation", within_time(colgen_equivalence(), t.elapsed(), Duration::from_secs(300)));

    report("9", "same-vehicle covariance", covariance(&mc));

    let t = Instant::now();
    let (c10, c11) = simulation();
    report("10", "method comparison", within_time(c10, t.elapsed(), Duration::from_secs(600)));
    report("11", "LP support report", c11);

    if !all_pass {
        std::process::exit(1);
    }
}
