#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtv_core::batchsim::add_dummies;
use rtv_core::generators::{gen_random, RandomParams};
use rtv_core::tripgen::generate_catalog;
use rtv_core::{Instance, Metric, OnboardPassenger, Point, Qos, Request, Trip, TripCatalog, Vehicle};

/// A stop as seen by the permutation oracle: (point, deadline, load change,
/// index of the stop that must come first).
struct OracleStop {
    point: Point,
    deadline: f64,
    delta: i32,
    after: Option<usize>,
}

/// Shortest feasible open route by trying every stop order. Independent of
/// the dynamic program under test.
pub fn brute_route(t: &Trip, v: &Vehicle, inst: &Instance) -> Option<f64> {
    let mut stops = Vec::new();
    for p in &v.onboard {
        stops.push(OracleStop {
            point: p.destination,
            deadline: p.latest_dropoff,
            delta: -1,
            after: None,
        });
    }
    for &r in t.requests() {
        let q = &inst.requests[r];
        let direct = q.origin.euclidean(q.destination) / inst.speed;
        stops.push(OracleStop {
            point: q.origin,
            deadline: q.request_time + q.max_wait,
            delta: 1,
            after: None,
        });
        stops.push(OracleStop {
            point: q.destination,
            deadline: q.request_time + direct + q.max_delay,
            delta: -1,
            after: Some(stops.len() - 1),
        });
    }
    let n = stops.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<f64> = None;
    permute(&mut order, 0, &mut |perm| {
        let mut pos = v.position;
        let mut len = 0.0;
        let mut load = v.onboard.len() as i32;
        let mut seen = vec![false; n];
        for &i in perm {
            let s = &stops[i];
            if let Some(a) = s.after {
                if !seen[a] {
                    return;
                }
            }
            load += s.delta;
            if load > v.capacity as i32 {
                return;
            }
            len += pos.euclidean(s.point);
            pos = s.point;
            if v.available_time + len / inst.speed > s.deadline + 1e-9 {
                return;
            }
            seen[i] = true;
        }
        if best.is_none_or(|b| len < b) {
            best = Some(len);
        }
    });
    best
}

fn permute(a: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == a.len() {
        f(a);
        return;
    }
    for i in k..a.len() {
        a.swap(k, i);
        permute(a, k + 1, f);
        a.swap(k, i);
    }
}

/// A random single-vehicle routing case with at most 8 stops.
pub fn routing_case(seed: u64) -> (Instance, Trip) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pt = |rng: &mut ChaCha8Rng| Point(rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0);
    let n_onboard = rng.random_range(0..=2usize);
    let n_req = rng.random_range(1..=(8 - n_onboard) / 2).min(3);
    let requests = (0..n_req)
        .map(|id| Request {
            id,
            origin: pt(&mut rng),
            destination: pt(&mut rng),
            request_time: rng.random::<f64>() * 60.0,
            max_wait: rng.random_range(100.0..500.0),
            max_delay: rng.random_range(100.0..600.0),
            penalty: 1.0,
        })
        .collect();
    let onboard = (0..n_onboard)
        .map(|_| OnboardPassenger {
            destination: pt(&mut rng),
            latest_dropoff: 60.0 + rng.random::<f64>() * 700.0,
        })
        .collect();
    let inst = Instance {
        requests,
        vehicles: vec![Vehicle {
            id: 0,
            position: pt(&mut rng),
            available_time: 60.0,
            capacity: rng.random_range(n_onboard.max(1)..=4),
            onboard,
            dummy_for: None,
        }],
        metric: Metric::Euclidean,
        speed: 0.01,
        qos: Qos::default(),
        trips: None,
    };
    (inst, Trip::new(0..n_req))
}

/// Random instance in the penalty version together with its catalog.
/// Sizes cycle with the seed: 1..=max_r requests, 1..=max_v vehicles,
/// capacity 1..=max_k.
pub fn penalty_instance(seed: u64, max_r: usize, max_v: usize, max_k: usize) -> (Instance, TripCatalog) {
    let s = seed as usize;
    let base = gen_random(&RandomParams {
        n_requests: 1 + s % max_r,
        n_vehicles: 1 + (s / max_r) % max_v,
        capacity: 1 + (s / (max_r * max_v)) % max_k,
        region_km: 3.0,
        seed,
        ..Default::default()
    });
    let inst = add_dummies(&base).unwrap();
    let k = inst.vehicles.iter().map(|v| v.capacity).max().unwrap();
    let cat = generate_catalog(&inst, k, None).unwrap();
    (inst, cat)
}

/// Chernoff-type tail bound e^δ / (1+δ)^(1+δ).
pub fn chernoff(delta: f64) -> f64 {
    delta.exp() / (1.0 + delta).powf(1.0 + delta)
}
