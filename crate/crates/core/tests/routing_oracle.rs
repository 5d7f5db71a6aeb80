mod common;

use rtv_core::routing::{exact_cost, heuristic_cost, MAX_EXACT_STOPS};
use rtv_core::{Error, Trip};

use common::{brute_route, routing_case};

#[test]
fn dynamic_program_matches_permutation_search() {
    for seed in 0..150 {
        let (inst, trip) = routing_case(seed);
        let v = &inst.vehicles[0];
        let dp = exact_cost(&trip, v, &inst).unwrap();
        match brute_route(&trip, v, &inst) {
            Some(len) => {
                assert!(dp.feasible, "seed {seed}");
                assert!((dp.length - len).abs() < 1e-9, "seed {seed}: {} vs {len}", dp.length);
            }
            None => assert!(!dp.feasible, "seed {seed}"),
        }
    }
}

#[test]
fn reported_order_reproduces_length() {
    for seed in 0..100 {
        let (inst, trip) = routing_case(seed);
        let v = &inst.vehicles[0];
        let dp = exact_cost(&trip, v, &inst).unwrap();
        if !dp.feasible {
            continue;
        }
        let replay = rtv_core::routing::evaluate_order(&dp.order, v, &inst).unwrap();
        assert!((replay - dp.length).abs() < 1e-9);
    }
}

#[test]
fn heuristic_never_beats_exact() {
    for seed in 0..100 {
        let (inst, trip) = routing_case(seed);
        let v = &inst.vehicles[0];
        let dp = exact_cost(&trip, v, &inst).unwrap();
        let h = heuristic_cost(&trip, v, &inst);
        if h.feasible {
            assert!(dp.feasible);
            assert!(h.length >= dp.length - 1e-9);
        }
    }
}

#[test]
fn too_many_stops_is_an_error() {
    let (mut inst, _) = routing_case(1);
    let proto = inst.requests[0].clone();
    inst.requests = (0..9)
        .map(|id| rtv_core::Request { id, ..proto.clone() })
        .collect();
    inst.vehicles[0].onboard.clear();
    let t = Trip::new(0..9);
    assert!(matches!(
        exact_cost(&t, &inst.vehicles[0], &inst),
        Err(Error::StopOverflow { stops: 18, limit }) if limit == MAX_EXACT_STOPS
    ));
}
