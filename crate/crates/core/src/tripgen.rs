//! Level-wise enumeration of the feasible trip catalog.
//!
//! Level 1 holds every feasible (request, vehicle) pair. A trip of size `s`
//! is a candidate for vehicle `v` only if all of its size `s - 1` sub-trips
//! are admissible for `v`; each candidate is then confirmed and costed by the
//! exact router. The catalog is downward closed per vehicle by construction.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{Admissible, Instance, Trip, TripCatalog, Vehicle};
use crate::routing;

/// Feasible trips of one vehicle at one level, with costs.
type Level = Vec<(Trip, f64)>;

pub(crate) fn route_cost(t: &Trip, v: &Vehicle, inst: &Instance) -> Option<f64> {
    match routing::exact_cost(t, v, inst) {
        Ok(r) if r.feasible => Some(r.length),
        Ok(_) => None,
        Err(Error::StopOverflow { .. }) => {
            debug!("skipping trip {:?} for vehicle {}: too many stops", t.requests(), v.id);
            None
        }
        Err(e) => panic!("routing failed unexpectedly: {e}"),
    }
}

/// Cost of the empty trip. When the onboard deadlines cannot all be met the
/// vehicle keeps only the empty trip, costed without deadlines.
pub(crate) fn empty_trip_cost(v: &Vehicle, inst: &Instance) -> (f64, bool) {
    if let Some(c) = route_cost(&Trip::empty(), v, inst) {
        return (c, true);
    }
    warn!("vehicle {} cannot meet its onboard deadlines", v.id);
    let mut relaxed = v.clone();
    relaxed
        .onboard
        .iter_mut()
        .for_each(|p| p.latest_dropoff = f64::INFINITY);
    let c = route_cost(&Trip::empty(), &relaxed, inst).unwrap_or(0.0);
    (c, false)
}

fn first_level(v: &Vehicle, inst: &Instance) -> Level {
    (0..inst.n_requests())
        .filter_map(|r| {
            let t = Trip::new([r]);
            route_cost(&t, v, inst).map(|c| (t, c))
        })
        .collect()
}

fn next_level(prev: &Level, v: &Vehicle, inst: &Instance) -> Level {
    let known: HashSet<&Trip> = prev.iter().map(|(t, _)| t).collect();
    let mut out = Level::new();
    for (t, _) in prev {
        let last = *t.requests().last().expect("non-empty trip");
        for r in last + 1..inst.n_requests() {
            let cand = Trip::new(t.requests().iter().copied().chain([r]));
            let closed = cand
                .requests()
                .iter()
                .all(|&q| q == r || known.contains(&cand.without(q)));
            if !closed {
                continue;
            }
            if let Some(c) = route_cost(&cand, v, inst) {
                out.push((cand, c));
            }
        }
    }
    out
}

/// Generates the catalog with trips of at most `max_trip_size` requests.
/// When `timeout` elapses generation stops before the next level and
/// `truncated_at` records the last completed level.
pub fn generate_catalog(
    inst: &Instance,
    max_trip_size: usize,
    timeout: Option<Duration>,
) -> Result<TripCatalog> {
    generate_catalog_with(inst, max_trip_size, timeout, Execution::default())
}

pub fn generate_catalog_with(
    inst: &Instance,
    max_trip_size: usize,
    timeout: Option<Duration>,
    mode: Execution,
) -> Result<TripCatalog> {
    if max_trip_size < 1 {
        return Err(Error::invariant("max_trip_size", "must be >= 1"));
    }
    let started = Instant::now();
    let n_v = inst.n_vehicles();
    let empties: Vec<(f64, bool)> =
        exec::map(mode, &inst.vehicles, |v| empty_trip_cost(v, inst));

    let mut per_vehicle_trips: Vec<Vec<(Trip, f64)>> = vec![Vec::new(); n_v];
    let mut current: Vec<Level> = exec::map_range(mode, n_v, |v| {
        if empties[v].1 {
            first_level(&inst.vehicles[v], inst)
        } else {
            Level::new()
        }
    });
    let mut truncated_at = None;
    let mut size = 1;
    loop {
        for (v, level) in current.iter().enumerate() {
            per_vehicle_trips[v].extend(level.iter().cloned());
        }
        if size >= max_trip_size || current.iter().all(|l| l.is_empty()) {
            break;
        }
        if let Some(limit) = timeout {
            if started.elapsed() >= limit {
                warn!("trip generation timed out after size {size}");
                truncated_at = Some(size);
                break;
            }
        }
        current = exec::map_range(mode, n_v, |v| next_level(&current[v], &inst.vehicles[v], inst));
        size += 1;
    }

    let mut all: BTreeSet<(usize, Trip)> = BTreeSet::new();
    for list in &per_vehicle_trips {
        all.extend(list.iter().map(|(t, _)| (t.len(), t.clone())));
    }
    let mut trips = vec![Trip::empty()];
    trips.extend(all.into_iter().map(|(_, t)| t));
    let ids: HashMap<&Trip, usize> = trips.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let per_vehicle: Vec<Vec<Admissible>> = per_vehicle_trips
        .iter()
        .enumerate()
        .map(|(v, list)| {
            let mut adm = vec![Admissible {
                trip: 0,
                cost: empties[v].0,
            }];
            adm.extend(list.iter().map(|(t, c)| Admissible {
                trip: ids[t],
                cost: *c,
            }));
            adm
        })
        .collect();
    let mut cat = TripCatalog::new(inst.n_requests(), trips, per_vehicle)?;
    cat.truncated_at = truncated_at;
    Ok(cat)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogStats {
    /// Number of distinct trips by size; index 0 counts the empty trip.
    pub by_size: Vec<usize>,
    /// |T|.
    pub n_trips: usize,
    /// Σ_v |T(v)|.
    pub n_pairs: usize,
}

pub fn catalog_stats(cat: &TripCatalog) -> CatalogStats {
    let max = cat.trips().iter().map(Trip::len).max().unwrap_or(0);
    let mut by_size = vec![0; max + 1];
    for t in cat.trips() {
        by_size[t.len()] += 1;
    }
    CatalogStats {
        by_size,
        n_trips: cat.trips().len(),
        n_pairs: (0..cat.n_vehicles()).map(|v| cat.admissible(v).len()).sum(),
    }
}
