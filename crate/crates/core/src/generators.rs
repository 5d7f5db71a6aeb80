//! Instance constructors: the integrality-gap family, the rounding-tightness
//! family, and seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Admissible, FractionalSolution, Instance, Metric, Point, Qos, Request, Trip, TripCatalog,
    Vehicle, EMPTY_TRIP,
};

/// Default penalty multiplier: κ_r = multiplier × direct distance of r.
pub const DEFAULT_PENALTY_MULTIPLIER: f64 = 10.0;

/// An analytic instance with its explicit catalog.
#[derive(Clone, Debug)]
pub struct Family {
    pub instance: Instance,
    pub catalog: TripCatalog,
}

/// All subsets of `0..n` with at most `max` elements, by size then
/// lexicographically. The first entry is the empty set.
fn subsets_up_to(n: usize, max: usize) -> Vec<Trip> {
    let mut out = vec![Trip::empty()];
    let mut level = vec![Trip::empty()];
    for _ in 0..max.min(n) {
        let mut next = Vec::new();
        for t in &level {
            let start = t.requests().last().map_or(0, |&l| l + 1);
            for r in start..n {
                next.push(Trip::new(t.requests().iter().copied().chain([r])));
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// `n_vehicles` vehicles of capacity k and k+1 requests sharing one origin
/// and one destination one kilometer apart; every trip of size ≤ k costs 1
/// on every vehicle, the empty trip costs 0.
fn unit_family(k: usize, n_vehicles: usize) -> Result<Family> {
    if k < 2 {
        return Err(Error::invariant("k", "must be >= 2"));
    }
    let n = k + 1;
    let requests = (0..n)
        .map(|id| Request {
            id,
            origin: Point(0.0, 0.0),
            destination: Point(1.0, 0.0),
            request_time: 0.0,
            max_wait: 1e4,
            max_delay: 1e4,
            penalty: DEFAULT_PENALTY_MULTIPLIER,
        })
        .collect();
    let vehicles = (0..n_vehicles)
        .map(|id| Vehicle {
            id,
            position: Point(0.0, 0.0),
            available_time: 0.0,
            capacity: k,
            onboard: vec![],
            dummy_for: None,
        })
        .collect();
    let trips = subsets_up_to(n, k);
    let per_vehicle: Vec<Vec<Admissible>> = (0..n_vehicles)
        .map(|_| {
            trips
                .iter()
                .enumerate()
                .map(|(id, t)| Admissible {
                    trip: id,
                    cost: if t.is_empty() { 0.0 } else { 1.0 },
                })
                .collect()
        })
        .collect();
    let catalog = TripCatalog::new(n, trips, per_vehicle)?;
    let instance = Instance {
        requests,
        vehicles,
        metric: Metric::Euclidean,
        speed: 0.01,
        qos: Qos {
            max_wait: 1e4,
            max_delay: 1e4,
        },
        trips: Some(catalog.clone()),
    };
    Ok(Family { instance, catalog })
}

/// Two vehicles of capacity k, k+1 requests: LP optimum (k+1)/k, ILP optimum 2.
pub fn gen_gap_family(k: usize) -> Result<Family> {
    unit_family(k, 2)
}

#[derive(Clone, Debug)]
pub struct TightnessFamily {
    pub family: Family,
    /// Vehicle i takes the k-passenger trip that omits request i with value
    /// 1/k and the empty trip with value (k-1)/k.
    pub x: FractionalSolution,
}

/// k+1 vehicles and k+1 requests with the pathological optimal fractional
/// solution spreading every request uniformly over k vehicles.
pub fn gen_tightness_family(k: usize) -> Result<TightnessFamily> {
    let family = unit_family(k, k + 1)?;
    let cat = &family.catalog;
    let mut x = FractionalSolution::default();
    for v in 0..=k {
        let trip = Trip::new((0..=k).filter(|&r| r != v));
        let id = cat.trip_id(&trip).expect("k-subset in catalog");
        x.values.insert((v, id), 1.0 / k as f64);
        x.values.insert((v, EMPTY_TRIP), (k - 1) as f64 / k as f64);
    }
    x.objective = x.cost(cat)?;
    Ok(TightnessFamily { family, x })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub n_requests: usize,
    pub n_vehicles: usize,
    pub capacity: usize,
    pub region_km: f64,
    pub qos: Qos,
    /// Kilometers per second.
    pub speed: f64,
    pub penalty_multiplier: f64,
    pub seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            n_requests: 6,
            n_vehicles: 3,
            capacity: 2,
            region_km: 5.0,
            qos: Qos::default(),
            speed: 0.01,
            penalty_multiplier: DEFAULT_PENALTY_MULTIPLIER,
            seed: 0,
        }
    }
}

pub(crate) fn uniform_point(rng: &mut impl Rng, region: f64) -> Point {
    Point(rng.random::<f64>() * region, rng.random::<f64>() * region)
}

/// Uniform origins, destinations and vehicle positions in the square
/// `[0, region_km]²`, all requests issued at time 0.
pub fn gen_random(p: &RandomParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let requests = (0..p.n_requests)
        .map(|id| {
            let origin = uniform_point(&mut rng, p.region_km);
            let destination = uniform_point(&mut rng, p.region_km);
            Request {
                id,
                origin,
                destination,
                request_time: 0.0,
                max_wait: p.qos.max_wait,
                max_delay: p.qos.max_delay,
                penalty: p.penalty_multiplier * origin.euclidean(destination),
            }
        })
        .collect();
    let vehicles = (0..p.n_vehicles)
        .map(|id| Vehicle {
            id,
            position: uniform_point(&mut rng, p.region_km),
            available_time: 0.0,
            capacity: p.capacity,
            onboard: vec![],
            dummy_for: None,
        })
        .collect();
    Instance {
        requests,
        vehicles,
        metric: Metric::Euclidean,
        speed: p.speed,
        qos: p.qos,
        trips: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_catalog;

    #[test]
    fn gap_family_two() {
        let f = gen_gap_family(2).unwrap();
        assert_eq!(f.instance.n_vehicles(), 2);
        assert_eq!(f.instance.n_requests(), 3);
        assert_eq!(f.catalog.trips().len(), 7);
        assert!(validate_catalog(&f.catalog).is_empty());
        assert!(f.instance.validate().is_ok());
        assert!(gen_gap_family(1).is_err());
    }

    #[test]
    fn tightness_solution_is_feasible() {
        for k in 2..=6 {
            let t = gen_tightness_family(k).unwrap();
            assert_eq!(t.family.instance.n_vehicles(), k + 1);
            t.x.check(&t.family.catalog).unwrap();
            let expected = (k + 1) as f64 / k as f64;
            assert!((t.x.objective - expected).abs() < 1e-12);
        }
        let t = gen_tightness_family(2).unwrap();
        let vals: Vec<f64> = t.x.vehicle_values(0).map(|(_, x)| x).collect();
        assert_eq!(vals, vec![0.5, 0.5]);
    }

    #[test]
    fn random_is_deterministic() {
        let p = RandomParams {
            seed: 7,
            ..Default::default()
        };
        let a = serde_json::to_string(&gen_random(&p)).unwrap();
        let b = serde_json::to_string(&gen_random(&p)).unwrap();
        assert_eq!(a, b);
        let empty = gen_random(&RandomParams {
            n_requests: 0,
            ..p
        });
        assert!(empty.validate().is_ok());
        assert_eq!(empty.n_requests(), 0);
    }
}
