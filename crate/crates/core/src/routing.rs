//! Single-vehicle routing cost oracle.
//!
//! A vehicle starts at its position at its available time and must drop off
//! its onboard passengers and pick up and drop off every request of the trip
//! (open path, no return). Pickups precede their dropoffs, occupancy never
//! exceeds capacity, and every stop is served no later than its deadline.
//! Travel time is distance / speed and service time is zero, so the arrival
//! time at a stop is a strictly increasing function of the path length.
//! Because of that the length-minimal label of a (visited set, last stop)
//! state also has the earliest arrival, and a Held-Karp recursion over
//! those states is exact.

use crate::error::{Error, Result};
use crate::model::{Instance, Point, RequestId, Trip, Vehicle};

/// Largest stop count handled by [`exact_cost`].
pub const MAX_EXACT_STOPS: usize = 16;
/// Slack allowed on deadlines, in seconds.
pub const DEADLINE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopKind {
    Pickup,
    Dropoff,
    OnboardDropoff,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stop {
    pub kind: StopKind,
    /// Request id for pickups and dropoffs, onboard index otherwise.
    pub id: usize,
    pub point: Point,
    /// Latest service time, seconds.
    pub deadline: f64,
    pub load_delta: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteResult {
    pub order: Vec<Stop>,
    /// Kilometers. For a dummy vehicle this is the penalty of its request.
    pub length: f64,
    pub feasible: bool,
}

impl RouteResult {
    fn infeasible() -> Self {
        RouteResult {
            order: Vec::new(),
            length: f64::INFINITY,
            feasible: false,
        }
    }
}

/// Stops of `(t, v)`: onboard dropoffs first, then for each request of the
/// trip (ascending) its pickup followed by its dropoff.
pub fn stops(t: &Trip, v: &Vehicle, inst: &Instance) -> Vec<Stop> {
    let mut out = Vec::with_capacity(v.onboard.len() + 2 * t.len());
    for (i, p) in v.onboard.iter().enumerate() {
        out.push(Stop {
            kind: StopKind::OnboardDropoff,
            id: i,
            point: p.destination,
            deadline: p.latest_dropoff,
            load_delta: -1,
        });
    }
    for &r in t.requests() {
        let req = &inst.requests[r];
        out.push(Stop {
            kind: StopKind::Pickup,
            id: r,
            point: req.origin,
            deadline: req.latest_pickup(),
            load_delta: 1,
        });
        out.push(Stop {
            kind: StopKind::Dropoff,
            id: r,
            point: req.destination,
            deadline: inst.latest_dropoff(r),
            load_delta: -1,
        });
    }
    out
}

/// Index of the pickup stop that must precede stop `j`, if any.
fn predecessor(stops: &[Stop], j: usize) -> Option<usize> {
    (stops[j].kind == StopKind::Dropoff).then(|| j - 1)
}

fn dummy_route(t: &Trip, v: &Vehicle, r: RequestId, inst: &Instance) -> RouteResult {
    match t.requests() {
        [] => RouteResult {
            order: Vec::new(),
            length: 0.0,
            feasible: true,
        },
        [only] if *only == r => RouteResult {
            order: Vec::new(),
            length: inst.requests[r].penalty,
            feasible: true,
        },
        _ => {
            let _ = v;
            RouteResult::infeasible()
        }
    }
}

/// Minimum-length feasible route for trip `t` on vehicle `v`, by dynamic
/// programming over (visited stops, last stop). Returns `feasible = false`
/// when no feasible route exists.
pub fn exact_cost(t: &Trip, v: &Vehicle, inst: &Instance) -> Result<RouteResult> {
    if let Some(r) = v.dummy_for {
        return Ok(dummy_route(t, v, r, inst));
    }
    let stops = stops(t, v, inst);
    let n = stops.len();
    if n > MAX_EXACT_STOPS {
        return Err(Error::StopOverflow {
            stops: n,
            limit: MAX_EXACT_STOPS,
        });
    }
    if n == 0 {
        return Ok(RouteResult {
            order: Vec::new(),
            length: 0.0,
            feasible: true,
        });
    }

    // dist[i][j] between stops; dist[n][j] from the start position.
    let mut dist = vec![vec![0.0; n]; n + 1];
    for i in 0..=n {
        let from = if i == n { v.position } else { stops[i].point };
        for j in 0..n {
            dist[i][j] = inst.distance(from, stops[j].point);
        }
    }
    let start_load = v.onboard.len() as i32;
    let cap = v.capacity as i32;
    let time_at = |len: f64| v.available_time + len / inst.speed;

    let states = 1usize << n;
    let mut best = vec![f64::INFINITY; states * n];
    let mut parent = vec![u8::MAX; states * n];
    let mut load = vec![start_load; states];
    for mask in 1..states {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + stops[low].load_delta;
    }

    for j in 0..n {
        if predecessor(&stops, j).is_some() || start_load + stops[j].load_delta > cap {
            continue;
        }
        let len = dist[n][j];
        if time_at(len) <= stops[j].deadline + DEADLINE_TOL {
            best[(1 << j) * n + j] = len;
        }
    }
    for mask in 1..states {
        for last in 0..n {
            let cur = best[mask * n + last];
            if mask & (1 << last) == 0 || !cur.is_finite() {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                if let Some(p) = predecessor(&stops, next) {
                    if mask & (1 << p) == 0 {
                        continue;
                    }
                }
                if load[mask] + stops[next].load_delta > cap {
                    continue;
                }
                let len = cur + dist[last][next];
                if time_at(len) > stops[next].deadline + DEADLINE_TOL {
                    continue;
                }
                let slot = (mask | (1 << next)) * n + next;
                // Strict comparison: ties keep the smaller predecessor.
                if len < best[slot] {
                    best[slot] = len;
                    parent[slot] = last as u8;
                }
            }
        }
    }

    let full = states - 1;
    let mut end = None;
    let mut length = f64::INFINITY;
    for last in 0..n {
        if best[full * n + last] < length {
            length = best[full * n + last];
            end = Some(last);
        }
    }
    let Some(mut last) = end else {
        return Ok(RouteResult::infeasible());
    };
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        order.push(stops[last]);
        let p = parent[mask * n + last];
        mask &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    order.reverse();
    Ok(RouteResult {
        order,
        length,
        feasible: true,
    })
}

/// True iff an exact feasible route exists.
pub fn trip_feasible(t: &Trip, v: &Vehicle, inst: &Instance) -> Result<bool> {
    Ok(exact_cost(t, v, inst)?.feasible)
}

/// Length of visiting `order` from the vehicle start, or `None` if the
/// sequence breaks a deadline, the capacity, or pickup-before-dropoff.
pub fn evaluate_order(order: &[Stop], v: &Vehicle, inst: &Instance) -> Option<f64> {
    let mut load = v.onboard.len() as i32;
    let mut at = v.position;
    let mut len = 0.0;
    let mut picked: Vec<usize> = Vec::new();
    for s in order {
        match s.kind {
            StopKind::Pickup => picked.push(s.id),
            StopKind::Dropoff if !picked.contains(&s.id) => return None,
            _ => {}
        }
        load += s.load_delta;
        if load > v.capacity as i32 {
            return None;
        }
        len += inst.distance(at, s.point);
        at = s.point;
        if v.available_time + len / inst.speed > s.deadline + DEADLINE_TOL {
            return None;
        }
    }
    Some(len)
}

/// Cheapest-insertion route. Onboard dropoffs are inserted one at a time,
/// then each request as a pickup/dropoff pair at the feasible positions of
/// least added length. When an insertion fails the construction restarts
/// with the insertion order rotated, up to one attempt per stop. The result
/// is never shorter than [`exact_cost`] and may be infeasible on feasible
/// inputs.
pub fn heuristic_cost(t: &Trip, v: &Vehicle, inst: &Instance) -> RouteResult {
    if let Some(r) = v.dummy_for {
        return dummy_route(t, v, r, inst);
    }
    let all = stops(t, v, inst);
    if all.is_empty() {
        return RouteResult {
            order: Vec::new(),
            length: 0.0,
            feasible: true,
        };
    }
    // Insertion units: single onboard dropoffs, or (pickup, dropoff) pairs.
    let mut units: Vec<(usize, Option<usize>)> = (0..v.onboard.len()).map(|i| (i, None)).collect();
    let base = v.onboard.len();
    units.extend((0..t.len()).map(|i| (base + 2 * i, Some(base + 2 * i + 1))));

    let attempts = all.len().max(1);
    for attempt in 0..attempts {
        let mut route: Vec<Stop> = Vec::with_capacity(all.len());
        let mut ok = true;
        for k in 0..units.len() {
            let (a, b) = units[(k + attempt) % units.len()];
            let mut best: Option<(f64, Vec<Stop>)> = None;
            for i in 0..=route.len() {
                let mut with_a = route.clone();
                with_a.insert(i, all[a]);
                let candidates: Vec<Vec<Stop>> = match b {
                    None => vec![with_a],
                    Some(b) => (i + 1..=with_a.len())
                        .map(|j| {
                            let mut r = with_a.clone();
                            r.insert(j, all[b]);
                            r
                        })
                        .collect(),
                };
                for cand in candidates {
                    if let Some(len) = evaluate_order(&cand, v, inst) {
                        if best.as_ref().is_none_or(|(l, _)| len < *l) {
                            best = Some((len, cand));
                        }
                    }
                }
            }
            match best {
                Some((_, r)) => route = r,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let length = evaluate_order(&route, v, inst).unwrap_or(f64::INFINITY);
            return RouteResult {
                order: route,
                length,
                feasible: true,
            };
        }
    }
    RouteResult::infeasible()
}

/// Heuristic length divided by exact length; 1 when both are zero.
pub fn approximation_ratio(heuristic: f64, exact: f64) -> f64 {
    if exact <= 0.0 {
        if heuristic <= 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        heuristic / exact
    }
}

/// Summary of heuristic-versus-exact comparisons over a set of pairs.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct AlphaReport {
    pub pairs: usize,
    /// Pairs where the exact route is feasible but the heuristic found none.
    pub heuristic_failures: usize,
    /// Largest ratio over pairs where both are feasible.
    pub alpha_hat: f64,
    pub mean_ratio: f64,
}

/// Compares the two oracles on every given (trip, vehicle) pair.
pub fn alpha_report(pairs: &[(Trip, usize)], inst: &Instance) -> Result<AlphaReport> {
    let mut rep = AlphaReport {
        alpha_hat: 1.0,
        ..Default::default()
    };
    let mut sum = 0.0;
    let mut both = 0usize;
    for (t, v) in pairs {
        let veh = &inst.vehicles[*v];
        let e = exact_cost(t, veh, inst)?;
        if !e.feasible {
            continue;
        }
        rep.pairs += 1;
        let h = heuristic_cost(t, veh, inst);
        if !h.feasible {
            rep.heuristic_failures += 1;
            continue;
        }
        let ratio = approximation_ratio(h.length, e.length);
        rep.alpha_hat = rep.alpha_hat.max(ratio);
        sum += ratio;
        both += 1;
    }
    rep.mean_ratio = if both > 0 { sum / both as f64 } else { 1.0 };
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Metric, OnboardPassenger, Qos, Request};

    fn req(id: usize, o: (f64, f64), d: (f64, f64), wait: f64, delay: f64) -> Request {
        Request {
            id,
            origin: Point(o.0, o.1),
            destination: Point(d.0, d.1),
            request_time: 0.0,
            max_wait: wait,
            max_delay: delay,
            penalty: 1.0,
        }
    }

    fn inst(requests: Vec<Request>, vehicles: Vec<Vehicle>) -> Instance {
        Instance {
            requests,
            vehicles,
            metric: Metric::Euclidean,
            speed: 1.0,
            qos: Qos::default(),
            trips: None,
        }
    }

    fn veh(cap: usize, at: (f64, f64)) -> Vehicle {
        Vehicle {
            id: 0,
            position: Point(at.0, at.1),
            available_time: 0.0,
            capacity: cap,
            onboard: vec![],
            dummy_for: None,
        }
    }

    #[test]
    fn empty_trip_empty_vehicle() {
        let i = inst(vec![], vec![veh(2, (0.0, 0.0))]);
        let r = exact_cost(&Trip::empty(), &i.vehicles[0], &i).unwrap();
        assert!(r.feasible);
        assert_eq!(r.length, 0.0);
        assert_eq!(heuristic_cost(&Trip::empty(), &i.vehicles[0], &i).length, 0.0);
        assert!(trip_feasible(&Trip::empty(), &i.vehicles[0], &i).unwrap());
    }

    #[test]
    fn single_request_from_its_origin() {
        let i = inst(
            vec![req(0, (1.0, 1.0), (4.0, 5.0), 100.0, 100.0)],
            vec![veh(1, (1.0, 1.0))],
        );
        let r = exact_cost(&Trip::new([0]), &i.vehicles[0], &i).unwrap();
        assert!(r.feasible);
        assert!((r.length - 5.0).abs() < 1e-12);
        assert_eq!(r.order[0].kind, StopKind::Pickup);
    }

    #[test]
    fn unreachable_pickup_is_infeasible() {
        let i = inst(
            vec![req(0, (10.0, 0.0), (11.0, 0.0), 5.0, 100.0)],
            vec![veh(1, (0.0, 0.0))],
        );
        assert!(!trip_feasible(&Trip::new([0]), &i.vehicles[0], &i).unwrap());
        assert!(!heuristic_cost(&Trip::new([0]), &i.vehicles[0], &i).feasible);
    }

    #[test]
    fn capacity_forces_sequential_service() {
        // Both requests go 0 -> 10 along a line; with capacity 1 the second
        // must wait for the first to be dropped, which blows its deadline.
        let i = inst(
            vec![
                req(0, (0.0, 0.0), (10.0, 0.0), 1.0, 1.0),
                req(1, (0.0, 0.0), (10.0, 0.0), 1.0, 1.0),
            ],
            vec![veh(1, (0.0, 0.0))],
        );
        let t = Trip::new([0, 1]);
        assert!(!trip_feasible(&t, &i.vehicles[0], &i).unwrap());
        let mut roomy = i.clone();
        roomy.vehicles[0].capacity = 2;
        let r = exact_cost(&t, &roomy.vehicles[0], &roomy).unwrap();
        assert!(r.feasible);
        assert!((r.length - 10.0).abs() < 1e-12);
    }

    #[test]
    fn onboard_deadline_is_honored() {
        let mut v = veh(2, (0.0, 0.0));
        v.onboard.push(OnboardPassenger {
            destination: Point(-3.0, 0.0),
            latest_dropoff: 3.0,
        });
        let i = inst(vec![req(0, (1.0, 0.0), (2.0, 0.0), 100.0, 100.0)], vec![v]);
        let r = exact_cost(&Trip::new([0]), &i.vehicles[0], &i).unwrap();
        assert!(r.feasible);
        assert_eq!(r.order[0].kind, StopKind::OnboardDropoff);
        assert!((r.length - (3.0 + 4.0 + 1.0)).abs() < 1e-12);
        let empty = exact_cost(&Trip::empty(), &i.vehicles[0], &i).unwrap();
        assert!((empty.length - 3.0).abs() < 1e-12);
    }

    #[test]
    fn stop_overflow_is_an_error() {
        let reqs: Vec<_> = (0..9)
            .map(|i| req(i, (0.0, 0.0), (1.0, 0.0), 100.0, 100.0))
            .collect();
        let i = inst(reqs, vec![veh(9, (0.0, 0.0))]);
        let t = Trip::new(0..9);
        assert!(matches!(
            exact_cost(&t, &i.vehicles[0], &i),
            Err(Error::StopOverflow { stops: 18, .. })
        ));
    }

    #[test]
    fn dummy_vehicle_costs() {
        let mut i = inst(
            vec![
                req(0, (0.0, 0.0), (1.0, 0.0), 1.0, 1.0),
                req(1, (0.0, 0.0), (1.0, 0.0), 1.0, 1.0),
            ],
            vec![],
        );
        i.requests[1].penalty = 42.0;
        let mut d = veh(1, (0.0, 0.0));
        d.dummy_for = Some(1);
        assert_eq!(exact_cost(&Trip::new([1]), &d, &i).unwrap().length, 42.0);
        assert!(!exact_cost(&Trip::new([0]), &d, &i).unwrap().feasible);
        assert_eq!(exact_cost(&Trip::empty(), &d, &i).unwrap().length, 0.0);
    }

    #[test]
    fn heuristic_is_dominated_by_exact() {
        let i = inst(
            vec![
                req(0, (1.0, 0.0), (5.0, 0.0), 100.0, 100.0),
                req(1, (2.0, 1.0), (0.0, 3.0), 100.0, 100.0),
                req(2, (4.0, 4.0), (1.0, 1.0), 100.0, 100.0),
            ],
            vec![veh(3, (0.0, 0.0))],
        );
        let t = Trip::new([0, 1, 2]);
        let e = exact_cost(&t, &i.vehicles[0], &i).unwrap();
        let h = heuristic_cost(&t, &i.vehicles[0], &i);
        assert!(h.feasible && e.feasible);
        assert!(h.length >= e.length - 1e-12);
        assert_eq!(evaluate_order(&e.order, &i.vehicles[0], &i), Some(e.length));
    }
}
