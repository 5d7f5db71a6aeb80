mod common;

use rtv_core::generators::{gen_random, RandomParams};
use rtv_core::routing::exact_cost;
use rtv_core::tripgen::{catalog_stats, generate_catalog};
use rtv_core::{validate_catalog, Trip};

/// Every subset of at most `k` requests, by direct enumeration.
fn subsets(n: usize, k: usize) -> Vec<Trip> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| Trip::new((0..n).filter(|i| m >> i & 1 == 1)))
        .collect()
}

#[test]
fn catalog_equals_enumeration_of_feasible_subsets() {
    for seed in 0..25 {
        let inst = gen_random(&RandomParams {
            n_requests: 6,
            n_vehicles: 2,
            capacity: 1 + seed as usize % 3,
            region_km: 3.0,
            seed,
            ..Default::default()
        });
        let k = 3;
        let cat = generate_catalog(&inst, k, None).unwrap();
        assert!(validate_catalog(&cat).is_empty());
        for (v, vehicle) in inst.vehicles.iter().enumerate() {
            for t in subsets(6, k) {
                let route = exact_cost(&t, vehicle, &inst).unwrap();
                let listed = cat.trip_id(&t).and_then(|id| cat.cost(id, v));
                match listed {
                    Some(c) => {
                        assert!(route.feasible, "seed {seed} v{v} {t:?}");
                        assert!((c - route.length).abs() < 1e-12);
                    }
                    None => assert!(!route.feasible, "seed {seed} v{v} {t:?} missing"),
                }
            }
        }
    }
}

#[test]
fn trip_ids_are_ordered_by_size_then_lexicographically() {
    let inst = gen_random(&RandomParams {
        n_requests: 8,
        n_vehicles: 3,
        capacity: 3,
        region_km: 2.0,
        seed: 3,
        ..Default::default()
    });
    let cat = generate_catalog(&inst, 3, None).unwrap();
    let keys: Vec<_> = cat.trips().iter().map(|t| (t.len(), t.requests().to_vec())).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    let stats = catalog_stats(&cat);
    assert_eq!(stats.by_size.iter().sum::<usize>(), stats.n_trips);
}
