//! Penalty version and multi-round batch dispatch.
//!
//! Every request gets a dummy vehicle that can only serve it, at its penalty
//! κ_r, so each batch instance is feasible. A simulation path is driven by
//! one method (the ILP by default): each round the waiting requests and the
//! fleet are frozen into an instance, the driver's assignment is committed
//! and the fleet moves along its routes for one batch interval. Every other
//! method is evaluated on the same frozen instances, so methods are compared
//! on identical inputs rather than on diverging paths.
//!
//! A request left to its dummy is rejected for the round: it stays waiting
//! with its penalty multiplied by the growth factor until it is served or
//! its latest pickup passes, at which point it reneges.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::generators::{gen_tightness_family, uniform_point, DEFAULT_PENALTY_MULTIPLIER};
use crate::json::round_sig;
use crate::lp::{build_lp, solve_lp, support_histogram, SupportHistogram};
use crate::mip::solve_ilp;
use crate::model::{
    Assignment, FractionalSolution, Instance, Metric, OnboardPassenger, Point, Qos, Request,
    RequestId, Trip, TripCatalog, Vehicle,
};
use crate::rounding::{self, Method};
use crate::routing::{self, StopKind};
use crate::tripgen::generate_catalog;

/// Appends one dummy vehicle per request, with ids after the real vehicles.
/// A catalog attached to the instance is extended with the dummy columns.
pub fn add_dummies(inst: &Instance) -> Result<Instance> {
    let mut out = inst.clone();
    let first = inst.n_vehicles();
    for r in &inst.requests {
        out.vehicles.push(Vehicle {
            id: first + r.id,
            position: r.origin,
            available_time: 0.0,
            capacity: 1,
            onboard: vec![],
            dummy_for: Some(r.id),
        });
    }
    if let Some(cat) = &inst.trips {
        let singles: Vec<Trip> = (0..inst.n_requests()).map(|r| Trip::new([r])).collect();
        let extra = inst
            .requests
            .iter()
            .map(|r| vec![(Trip::empty(), 0.0), (Trip::new([r.id]), r.penalty)])
            .collect();
        out.trips = Some(cat.with_extra(singles, extra)?);
    }
    Ok(out)
}

/// Indices of the dummy vehicles' requests in a penalty instance.
fn n_real_vehicles(inst: &Instance) -> usize {
    inst.vehicles.iter().filter(|v| !v.is_dummy()).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SimMethod {
    #[serde(rename = "ilp")]
    Ilp,
    #[serde(rename = "lp+rand")]
    LpRand,
    #[serde(rename = "lp+det")]
    LpDet,
}

impl SimMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Ilp => "ilp",
            SimMethod::LpRand => "lp+rand",
            SimMethod::LpDet => "lp+det",
        }
    }
}

impl std::str::FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ilp" => Ok(SimMethod::Ilp),
            "lp+rand" => Ok(SimMethod::LpRand),
            "lp+det" => Ok(SimMethod::LpDet),
            _ => Err(Error::invariant("method", format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    /// κ_r starts at this multiple of the direct distance of r.
    pub base_multiplier: f64,
    /// Factor applied to κ_r for every round r stays unassigned.
    pub growth: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            base_multiplier: DEFAULT_PENALTY_MULTIPLIER,
            growth: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Requests per second.
    pub arrival_rate: f64,
    pub horizon_rounds: usize,
    /// Seconds.
    pub batch_interval: f64,
    pub fleet_size: usize,
    pub capacity: usize,
    pub region_size_km: f64,
    /// Kilometers per second.
    pub speed: f64,
    pub qos: Qos,
    pub penalty: PenaltyConfig,
    /// Methods evaluated on every frozen instance.
    pub methods: Vec<SimMethod>,
    /// One replication per seed.
    pub seeds: Vec<u64>,
    /// Method whose assignments move the fleet.
    pub driver: SimMethod,
    /// Defaults to the capacity.
    pub max_trip_size: Option<usize>,
    /// When false a rejected request leaves the system at once.
    pub carry_over: bool,
    /// Record wall-clock solve times. Off by default so reports are
    /// reproducible byte for byte.
    pub timing: bool,
    pub ilp_time_limit_s: Option<f64>,
    /// Keep the frozen instances in the report.
    pub save_instances: bool,
    pub support_bins: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            arrival_rate: 0.2,
            horizon_rounds: 20,
            batch_interval: 30.0,
            fleet_size: 10,
            capacity: 3,
            region_size_km: 5.0,
            speed: 0.01,
            qos: Qos::default(),
            penalty: PenaltyConfig::default(),
            methods: vec![SimMethod::Ilp, SimMethod::LpRand, SimMethod::LpDet],
            seeds: vec![0],
            driver: SimMethod::Ilp,
            max_trip_size: None,
            carry_over: true,
            timing: false,
            ilp_time_limit_s: None,
            save_instances: false,
            support_bins: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invariant(field, msg))
            }
        };
        check(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0, "arrival_rate", "must be >= 0")?;
        check(self.batch_interval.is_finite() && self.batch_interval > 0.0, "batch_interval", "must be > 0")?;
        check(self.capacity >= 1, "capacity", "must be >= 1")?;
        check(self.region_size_km.is_finite() && self.region_size_km > 0.0, "region_size_km", "must be > 0")?;
        check(self.speed.is_finite() && self.speed > 0.0, "speed", "must be > 0")?;
        check(self.qos.max_wait >= 0.0 && self.qos.max_delay >= 0.0, "qos", "must be >= 0")?;
        check(self.penalty.base_multiplier >= 0.0, "penalty.base_multiplier", "must be >= 0")?;
        check(self.penalty.growth >= 1.0, "penalty.growth", "must be >= 1")?;
        check(!self.methods.is_empty(), "methods", "must not be empty")?;
        check(!self.seeds.is_empty(), "seeds", "must not be empty")?;
        check(self.max_trip_size.is_none_or(|k| k >= 1), "max_trip_size", "must be >= 1")?;
        check(self.support_bins >= 2, "support_bins", "must be >= 2")?;
        check(self.ilp_time_limit_s.is_none_or(|t| t > 0.0), "ilp_time_limit_s", "must be > 0")
    }

    fn trip_size(&self) -> usize {
        self.max_trip_size.unwrap_or(self.capacity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Passenger {
    pub request: usize,
    pub destination: Point,
    pub latest_dropoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannedStop {
    pub kind: PlannedKind,
    /// Global request id.
    pub request: usize,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PlannedKind {
    /// Carries the latest dropoff time of the picked-up passenger.
    Pickup(f64),
    Dropoff,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FleetVehicle {
    pub position: Point,
    pub capacity: usize,
    pub onboard: Vec<Passenger>,
    pub route: Vec<PlannedStop>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaitingRequest {
    /// `request.id` is the global id; `request.penalty` is the current κ.
    pub request: Request,
    pub rounds_unassigned: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Counters {
    pub arrivals: usize,
    pub served: usize,
    pub reneged: usize,
    /// Rejections that removed the request (no carry-over).
    pub rejected_terminal: usize,
    /// Per-round rejection events.
    pub rejections: usize,
    pub distance_km: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchState {
    pub round: usize,
    /// Seconds; the current round is solved at this time.
    pub clock: f64,
    pub waiting: BTreeMap<usize, WaitingRequest>,
    pub fleet: Vec<FleetVehicle>,
    pub counters: Counters,
    next_id: usize,
}

impl BatchState {
    pub fn new(fleet: Vec<FleetVehicle>, clock: f64) -> Self {
        BatchState {
            round: 0,
            clock,
            waiting: BTreeMap::new(),
            fleet,
            counters: Counters::default(),
            next_id: 0,
        }
    }

    pub fn onboard(&self) -> usize {
        self.fleet.iter().map(|v| v.onboard.len()).sum()
    }

    /// Every arrival is waiting, onboard, served, reneged or rejected.
    pub fn conserved(&self) -> bool {
        let c = &self.counters;
        c.arrivals == c.served + c.reneged + c.rejected_terminal + self.waiting.len() + self.onboard()
    }

    /// Adds new requests; ids are reassigned globally and penalties set
    /// from the direct distance.
    pub fn admit(&mut self, requests: impl IntoIterator<Item = Request>, base_multiplier: f64) {
        for mut r in requests {
            r.id = self.next_id;
            r.penalty = base_multiplier * r.origin.euclidean(r.destination);
            self.next_id += 1;
            self.counters.arrivals += 1;
            self.waiting.insert(
                r.id,
                WaitingRequest {
                    request: r,
                    rounds_unassigned: 0,
                },
            );
        }
    }

    fn renege(&mut self) {
        let clock = self.clock;
        let before = self.waiting.len();
        self.waiting
            .retain(|_, w| w.request.latest_pickup() >= clock - routing::DEADLINE_TOL);
        self.counters.reneged += before - self.waiting.len();
    }
}

/// One round's penalty instance and its catalog, in local ids.
#[derive(Clone, Debug)]
pub struct FrozenInstance {
    pub round: usize,
    pub instance: Instance,
    pub catalog: TripCatalog,
    /// Global id of each local request.
    pub global_ids: Vec<usize>,
    pub n_real: usize,
}

impl FrozenInstance {
    pub fn penalties(&self) -> Vec<f64> {
        self.instance.requests.iter().map(|r| r.penalty).collect()
    }
}

fn freeze(state: &BatchState, cfg: &SimConfig) -> Result<FrozenInstance> {
    let global_ids: Vec<usize> = state.waiting.keys().copied().collect();
    let requests = state
        .waiting
        .values()
        .enumerate()
        .map(|(i, w)| Request {
            id: i,
            ..w.request.clone()
        })
        .collect();
    let vehicles = state
        .fleet
        .iter()
        .enumerate()
        .map(|(i, f)| Vehicle {
            id: i,
            position: f.position,
            available_time: state.clock,
            capacity: f.capacity,
            onboard: f
                .onboard
                .iter()
                .map(|p| OnboardPassenger {
                    destination: p.destination,
                    latest_dropoff: p.latest_dropoff,
                })
                .collect(),
            dummy_for: None,
        })
        .collect();
    let base = Instance {
        requests,
        vehicles,
        metric: Metric::Euclidean,
        speed: cfg.speed,
        qos: cfg.qos,
        trips: None,
    };
    let instance = add_dummies(&base)?;
    let catalog = generate_catalog(&instance, cfg.trip_size(), None)?;
    Ok(FrozenInstance {
        round: state.round,
        instance,
        catalog,
        global_ids,
        n_real: state.fleet.len(),
    })
}

/// LP relaxation of a frozen instance.
#[derive(Clone, Debug)]
pub struct RoundLp {
    pub x: FractionalSolution,
    pub support: SupportHistogram,
    pub solve_ms: f64,
}

pub fn solve_round_lp(frozen: &FrozenInstance, bins: usize) -> Result<RoundLp> {
    let started = Instant::now();
    let x = solve_lp(&build_lp(&frozen.catalog))?.primal;
    let solve_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(RoundLp {
        support: support_histogram(&x, bins)?,
        x,
        solve_ms,
    })
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: SimMethod,
    pub assignment: Assignment,
    /// Route cost of the real vehicles, km.
    pub distance_km: f64,
    /// Local ids of requests not served by a real vehicle.
    pub rejected: Vec<RequestId>,
    pub solve_ms: f64,
}

fn derive_seed(seed: u64, round: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Solves a frozen instance with one method. `lp` is reused by the rounding
/// methods when given.
pub fn solve_frozen(
    frozen: &FrozenInstance,
    method: SimMethod,
    lp: Option<&RoundLp>,
    seed: u64,
    cfg: &SimConfig,
) -> Result<MethodOutcome> {
    let cat = &frozen.catalog;
    let started = Instant::now();
    let assignment = if frozen.instance.n_requests() == 0 {
        Assignment::idle(cat)?
    } else {
        match method {
            SimMethod::Ilp => {
                let limit = cfg.ilp_time_limit_s.map(Duration::from_secs_f64);
                solve_ilp(&build_lp(cat), limit)?.assignment
            }
            SimMethod::LpRand | SimMethod::LpDet => {
                let owned;
                let lp = match lp {
                    Some(lp) => lp,
                    None => {
                        owned = solve_round_lp(frozen, cfg.support_bins)?;
                        &owned
                    }
                };
                if method == SimMethod::LpRand {
                    rounding::round_dependent(&lp.x, cat, derive_seed(seed, frozen.round))?
                } else {
                    rounding::round_deterministic(&lp.x, cat)?
                }
            }
        }
    };
    let mut solve_ms = started.elapsed().as_secs_f64() * 1e3;
    if let (Some(lp), SimMethod::LpRand | SimMethod::LpDet) = (lp, method) {
        solve_ms += lp.solve_ms;
    }
    let mut covered = vec![false; frozen.instance.n_requests()];
    let mut distance_km = 0.0;
    for v in 0..frozen.n_real {
        let t = assignment.by_vehicle[v];
        distance_km += cat.cost(t, v).expect("admissible choice");
        cat.trip(t).requests().iter().for_each(|&r| covered[r] = true);
    }
    let rejected = (0..covered.len()).filter(|&r| !covered[r]).collect();
    Ok(MethodOutcome {
        method,
        assignment,
        distance_km,
        rejected,
        solve_ms: if cfg.timing { solve_ms } else { 0.0 },
    })
}

/// Planned stops of vehicle `v` for its assigned trip, in global ids.
fn plan(frozen: &FrozenInstance, state: &BatchState, v: usize, trip: &Trip) -> Result<Vec<PlannedStop>> {
    let inst = &frozen.instance;
    let mut vehicle = inst.vehicles[v].clone();
    let mut route = routing::exact_cost(trip, &vehicle, inst)?;
    if !route.feasible && trip.is_empty() {
        // Onboard deadlines already missed: drop everyone off anyway.
        vehicle.onboard.iter_mut().for_each(|p| p.latest_dropoff = f64::INFINITY);
        route = routing::exact_cost(trip, &vehicle, inst)?;
    }
    if !route.feasible {
        return Err(Error::Numerical(format!(
            "assigned trip {:?} has no feasible route for vehicle {v}",
            trip.requests()
        )));
    }
    Ok(route
        .order
        .iter()
        .map(|s| match s.kind {
            StopKind::Pickup => PlannedStop {
                kind: PlannedKind::Pickup(inst.latest_dropoff(s.id)),
                request: frozen.global_ids[s.id],
                point: s.point,
            },
            StopKind::Dropoff => PlannedStop {
                kind: PlannedKind::Dropoff,
                request: frozen.global_ids[s.id],
                point: s.point,
            },
            StopKind::OnboardDropoff => PlannedStop {
                kind: PlannedKind::Dropoff,
                request: state.fleet[v].onboard[s.id].request,
                point: s.point,
            },
        })
        .collect())
}

/// Moves every vehicle along its route for `dt` seconds.
fn advance(state: &mut BatchState, dt: f64, speed: f64) {
    let BatchState {
        fleet,
        waiting,
        counters,
        ..
    } = state;
    for f in fleet.iter_mut() {
        let mut budget = speed * dt;
        let mut done = 0;
        for stop in &f.route {
            let d = f.position.euclidean(stop.point);
            if d > budget {
                let s = budget / d;
                f.position = Point(
                    f.position.0 + s * (stop.point.0 - f.position.0),
                    f.position.1 + s * (stop.point.1 - f.position.1),
                );
                counters.distance_km += budget;
                break;
            }
            budget -= d;
            counters.distance_km += d;
            f.position = stop.point;
            done += 1;
            match stop.kind {
                PlannedKind::Pickup(latest_dropoff) => {
                    let w = waiting.remove(&stop.request).expect("picked-up request is waiting");
                    f.onboard.push(Passenger {
                        request: stop.request,
                        destination: w.request.destination,
                        latest_dropoff,
                    });
                }
                PlannedKind::Dropoff => {
                    let i = f
                        .onboard
                        .iter()
                        .position(|p| p.request == stop.request)
                        .expect("dropped-off request is onboard");
                    f.onboard.remove(i);
                    counters.served += 1;
                }
            }
        }
        f.route.drain(..done);
    }
}

#[derive(Clone, Debug)]
pub struct RoundReport {
    pub frozen: FrozenInstance,
    pub outcome: MethodOutcome,
}

/// Reneges expired requests, solves the frozen instance with `method`,
/// commits the assignment, updates penalties and advances the fleet and the
/// clock by one batch interval. On error the input state is untouched.
pub fn run_round(
    state: &BatchState,
    cfg: &SimConfig,
    method: SimMethod,
    seed: u64,
) -> Result<(BatchState, RoundReport)> {
    let mut next = state.clone();
    next.renege();
    let frozen = freeze(&next, cfg)?;
    let outcome = solve_frozen(&frozen, method, None, seed, cfg)?;
    for v in 0..frozen.n_real {
        let trip = frozen.catalog.trip(outcome.assignment.by_vehicle[v]);
        next.fleet[v].route = plan(&frozen, &next, v, trip)?;
    }
    for &r in &outcome.rejected {
        let g = frozen.global_ids[r];
        next.counters.rejections += 1;
        if cfg.carry_over {
            let w = next.waiting.get_mut(&g).expect("waiting request");
            w.rounds_unassigned += 1;
            w.request.penalty *= cfg.penalty.growth;
        } else {
            next.waiting.remove(&g);
            next.counters.rejected_terminal += 1;
        }
    }
    advance(&mut next, cfg.batch_interval, cfg.speed);
    next.clock += cfg.batch_interval;
    next.round += 1;
    Ok((next, RoundReport { frozen, outcome }))
}

fn arrivals(rng: &mut ChaCha8Rng, cfg: &SimConfig, from: f64, to: f64) -> Vec<Request> {
    let lambda = cfg.arrival_rate * (to - from);
    if lambda <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
    let mut times: Vec<f64> = (0..n).map(|_| from + rng.random::<f64>() * (to - from)).collect();
    times.sort_by(f64::total_cmp);
    times
        .into_iter()
        .map(|t| Request {
            id: 0,
            origin: uniform_point(rng, cfg.region_size_km),
            destination: uniform_point(rng, cfg.region_size_km),
            request_time: t,
            max_wait: cfg.qos.max_wait,
            max_delay: cfg.qos.max_delay,
            penalty: 0.0,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRow {
    pub seed: u64,
    pub round: usize,
    pub method: SimMethod,
    pub requests: usize,
    pub rejected: usize,
    pub rejected_pct: f64,
    pub distance_km: f64,
    pub solve_ms: f64,
    pub lp_integral_frac: f64,
    pub lp_half_integral_frac: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MethodAggregate {
    pub requests: usize,
    pub rejected: usize,
    pub rejected_pct: f64,
    pub distance_km: f64,
    pub solve_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriverSummary {
    pub method: SimMethod,
    pub arrivals: usize,
    pub served: usize,
    pub reneged: usize,
    pub rejected_terminal: usize,
    pub rejections: usize,
    pub waiting: usize,
    pub onboard: usize,
    pub distance_traveled_km: f64,
    pub mean_waiting_per_round: f64,
    /// Conservation held after every round.
    pub conservation_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub rows: Vec<RoundRow>,
    pub methods: BTreeMap<SimMethod, MethodAggregate>,
    pub driver: DriverSummary,
    /// Means over rounds with at least one request.
    pub mean_lp_integral_frac: f64,
    pub mean_lp_half_integral_frac: f64,
    #[serde(skip)]
    pub frozen: Vec<FrozenInstance>,
}

fn aggregate<'a>(rows: impl IntoIterator<Item = &'a RoundRow>) -> BTreeMap<SimMethod, MethodAggregate> {
    let mut out: BTreeMap<SimMethod, MethodAggregate> = BTreeMap::new();
    for r in rows {
        let a = out.entry(r.method).or_default();
        a.requests += r.requests;
        a.rejected += r.rejected;
        a.distance_km += r.distance_km;
        a.solve_ms += r.solve_ms;
    }
    for a in out.values_mut() {
        a.rejected_pct = pct(a.rejected, a.requests);
    }
    out
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Runs one replication.
pub fn run_simulation(cfg: &SimConfig, seed: u64) -> Result<SimulationReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fleet = (0..cfg.fleet_size)
        .map(|_| FleetVehicle {
            position: uniform_point(&mut rng, cfg.region_size_km),
            capacity: cfg.capacity,
            onboard: vec![],
            route: vec![],
        })
        .collect();
    let dt = cfg.batch_interval;
    let mut state = BatchState::new(fleet, dt);
    let mut rows = Vec::new();
    let mut frozen_all = Vec::new();
    let mut conservation_ok = true;
    let mut waiting_total = 0usize;
    let (mut integral_sum, mut half_sum, mut lp_rounds) = (0.0, 0.0, 0usize);

    for _ in 0..cfg.horizon_rounds {
        let new = arrivals(&mut rng, cfg, state.clock - dt, state.clock);
        state.admit(new, cfg.penalty.base_multiplier);
        let (next, report) = run_round(&state, cfg, cfg.driver, seed)?;
        let frozen = &report.frozen;
        let n = frozen.instance.n_requests();
        waiting_total += n;
        let lp = if n > 0 {
            Some(solve_round_lp(frozen, cfg.support_bins)?)
        } else {
            None
        };
        let (integral, half) = lp
            .as_ref()
            .map_or((1.0, 0.0), |lp| (lp.support.integral_fraction, lp.support.half_integral_fraction));
        if lp.is_some() {
            integral_sum += integral;
            half_sum += half;
            lp_rounds += 1;
        }
        for &m in &cfg.methods {
            let outcome = if m == cfg.driver {
                report.outcome.clone()
            } else {
                solve_frozen(frozen, m, lp.as_ref(), seed, cfg)?
            };
            rows.push(RoundRow {
                seed,
                round: frozen.round,
                method: m,
                requests: n,
                rejected: outcome.rejected.len(),
                rejected_pct: pct(outcome.rejected.len(), n),
                distance_km: outcome.distance_km,
                solve_ms: outcome.solve_ms,
                lp_integral_frac: integral,
                lp_half_integral_frac: half,
            });
        }
        state = next;
        conservation_ok &= state.conserved();
        if cfg.save_instances {
            frozen_all.push(report.frozen);
        }
    }

    let c = &state.counters;
    let driver = DriverSummary {
        method: cfg.driver,
        arrivals: c.arrivals,
        served: c.served,
        reneged: c.reneged,
        rejected_terminal: c.rejected_terminal,
        rejections: c.rejections,
        waiting: state.waiting.len(),
        onboard: state.onboard(),
        distance_traveled_km: c.distance_km,
        mean_waiting_per_round: if cfg.horizon_rounds > 0 {
            waiting_total as f64 / cfg.horizon_rounds as f64
        } else {
            0.0
        },
        conservation_ok,
    };
    let mean = |s: f64| if lp_rounds > 0 { s / lp_rounds as f64 } else { 0.0 };
    Ok(SimulationReport {
        seed,
        methods: aggregate(&rows),
        rows,
        driver,
        mean_lp_integral_frac: mean(integral_sum),
        mean_lp_half_integral_frac: mean(half_sum),
        frozen: frozen_all,
    })
}

/// One replication per configured seed, run concurrently.
pub fn run_simulations(cfg: &SimConfig, mode: Execution) -> Result<Vec<SimulationReport>> {
    cfg.validate()?;
    exec::map(mode, &cfg.seeds, |&s| run_simulation(cfg, s))
        .into_iter()
        .collect()
}

pub const CSV_HEADER: &str =
    "seed,round,method,requests,rejected_pct,distance_km,solve_ms,lp_integral_frac,lp_half_integral_frac";

pub fn rows_to_csv<'a>(rows: impl IntoIterator<Item = &'a RoundRow>) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.seed,
            r.round,
            r.method.name(),
            r.requests,
            round_sig(r.rejected_pct),
            round_sig(r.distance_km),
            round_sig(r.solve_ms),
            round_sig(r.lp_integral_frac),
            round_sig(r.lp_half_integral_frac),
        ));
    }
    out
}

/// Aggregate JSON document over all replications.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary<'a> {
    pub config: &'a SimConfig,
    pub pooled: BTreeMap<SimMethod, MethodAggregate>,
    pub replications: &'a [SimulationReport],
}

pub fn summarize<'a>(cfg: &'a SimConfig, reports: &'a [SimulationReport]) -> SimulationSummary<'a> {
    SimulationSummary {
        config: cfg,
        pooled: aggregate(reports.iter().flat_map(|r| &r.rows)),
        replications: reports,
    }
}

/// Fraction of requests still unassigned after each round when the same
/// fractional solution is rounded independently every round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarryoverPoint {
    pub rounds: usize,
    pub fraction_unassigned: f64,
    /// Standard error over replications.
    pub std_error: f64,
    /// (1/e)^rounds.
    pub bound: f64,
}

/// Scripted carry-over on the tightness family with parameter `k`: every
/// round the family's fractional optimum is rounded with dependent rounding
/// and the requests it assigns leave. Replication `i`, round `n` (from 1)
/// uses seed `base_seed + i·rounds + n − 1`.
pub fn scripted_carryover(
    k: usize,
    rounds: usize,
    replications: usize,
    base_seed: u64,
    mode: Execution,
) -> Result<Vec<CarryoverPoint>> {
    if replications < 2 {
        return Err(Error::invariant("replications", "must be >= 2"));
    }
    let fam = gen_tightness_family(k)?;
    let cat = &fam.family.catalog;
    let n_r = cat.n_requests();
    let per_rep: Vec<Result<Vec<f64>>> = exec::map_range(mode, replications, |i| {
        let mut left: BTreeSet<RequestId> = (0..n_r).collect();
        let mut out = Vec::with_capacity(rounds);
        for n in 0..rounds {
            let seed = base_seed.wrapping_add((i * rounds + n) as u64);
            let a = rounding::round_dependent(&fam.x, cat, seed)?;
            left.retain(|r| a.unassigned.contains(r));
            out.push(left.len() as f64 / n_r as f64);
        }
        Ok(out)
    });
    let per_rep: Vec<Vec<f64>> = per_rep.into_iter().collect::<Result<_>>()?;
    let m = replications as f64;
    Ok((0..rounds)
        .map(|n| {
            let mean = per_rep.iter().map(|f| f[n]).sum::<f64>() / m;
            let var = per_rep.iter().map(|f| (f[n] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            CarryoverPoint {
                rounds: n + 1,
                fraction_unassigned: mean,
                std_error: (var / m).sqrt(),
                bound: (-((n + 1) as f64)).exp(),
            }
        })
        .collect())
}

/// Expected penalized cost of dependent rounding against the penalty ILP.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenaltyBoundCheck {
    pub ilp_optimum: f64,
    pub lp_optimum: f64,
    pub sum_penalties: f64,
    /// ilp_optimum + Σκ / e.
    pub bound: f64,
    pub mean_cost: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Rounds the LP optimum of a penalty instance `trials` times, charging κ_r
/// for every request left uncovered after correction.
pub fn penalty_bound_check(
    frozen: &FrozenInstance,
    trials: usize,
    base_seed: u64,
    mode: Execution,
) -> Result<PenaltyBoundCheck> {
    let cat = &frozen.catalog;
    let lp = build_lp(cat);
    let ilp = solve_ilp(&lp, None)?;
    let x = solve_lp(&lp)?.primal;
    let penalties = frozen.penalties();
    let stats = rounding::run_trials_with(
        &x,
        cat,
        Method::Dependent,
        trials,
        base_seed,
        Some(&penalties),
        mode,
    )?;
    let sum_penalties: f64 = penalties.iter().sum();
    Ok(PenaltyBoundCheck {
        ilp_optimum: ilp.objective,
        lp_optimum: x.objective,
        sum_penalties,
        bound: ilp.objective + sum_penalties / std::f64::consts::E,
        mean_cost: stats.mean_penalized_cost.expect("penalties given"),
        std_error: stats.penalized_cost_std_error.expect("penalties given"),
        trials,
    })
}

/// Freezes an arbitrary instance (without dummies) into a penalty instance
/// with a generated catalog.
pub fn freeze_instance(inst: &Instance, max_trip_size: usize) -> Result<FrozenInstance> {
    let real = n_real_vehicles(inst);
    let instance = if real == inst.n_vehicles() {
        add_dummies(inst)?
    } else {
        inst.clone()
    };
    let catalog = match &instance.trips {
        Some(cat) => cat.clone(),
        None => generate_catalog(&instance, max_trip_size, None)?,
    };
    Ok(FrozenInstance {
        round: 0,
        global_ids: (0..instance.n_requests()).collect(),
        n_real: real,
        instance,
        catalog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_random, RandomParams};
    use crate::mip::brute_force_opt;

    fn small_cfg() -> SimConfig {
        SimConfig {
            arrival_rate: 0.1,
            horizon_rounds: 6,
            fleet_size: 3,
            capacity: 2,
            region_size_km: 3.0,
            ..Default::default()
        }
    }

    #[test]
    fn dummies_are_appended() {
        let inst = gen_random(&RandomParams::default());
        let d = add_dummies(&inst).unwrap();
        assert_eq!(d.n_vehicles(), 3 + 6);
        assert_eq!(d.vehicles[3].dummy_for, Some(0));
        assert_eq!(d.vehicles[8].id, 8);
    }

    #[test]
    fn no_real_vehicles_pays_all_penalties() {
        let mut inst = gen_random(&RandomParams::default());
        inst.vehicles.clear();
        let f = freeze_instance(&inst, 2).unwrap();
        let ilp = solve_ilp(&build_lp(&f.catalog), None).unwrap();
        let total: f64 = inst.requests.iter().map(|r| r.penalty).sum();
        assert!((ilp.objective - total).abs() < 1e-9);
    }

    #[test]
    fn catalog_dummies_extend_catalog() {
        let f = crate::generators::gen_gap_family(2).unwrap();
        let d = add_dummies(&f.instance).unwrap();
        let cat = d.trips.as_ref().unwrap();
        assert_eq!(cat.n_vehicles(), 5);
        assert_eq!(cat.admissible(2).len(), 2);
        assert!(crate::model::validate_catalog(cat).is_empty());
        let bf = brute_force_opt(cat, None).unwrap();
        assert!((bf.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_arrivals_do_nothing() {
        let cfg = SimConfig {
            arrival_rate: 0.0,
            ..small_cfg()
        };
        let r = run_simulation(&cfg, 1).unwrap();
        assert!(r.rows.iter().all(|row| row.requests == 0));
        assert_eq!(r.driver.distance_traveled_km, 0.0);
        assert_eq!(r.rows.len(), 6 * 3);
    }

    #[test]
    fn simulation_is_deterministic_and_conserving() {
        let cfg = small_cfg();
        let a = run_simulation(&cfg, 4).unwrap();
        let b = run_simulation(&cfg, 4).unwrap();
        assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
        assert!(a.driver.conservation_ok);
        assert!(a.driver.arrivals > 0);
    }

    #[test]
    fn single_request_is_served() {
        let cfg = SimConfig {
            fleet_size: 1,
            horizon_rounds: 1,
            ..small_cfg()
        };
        let mut state = BatchState::new(
            vec![FleetVehicle {
                position: Point(0.0, 0.0),
                capacity: 2,
                onboard: vec![],
                route: vec![],
            }],
            30.0,
        );
        state.admit(
            [Request {
                id: 0,
                origin: Point(0.1, 0.0),
                destination: Point(0.2, 0.0),
                request_time: 10.0,
                max_wait: 300.0,
                max_delay: 600.0,
                penalty: 0.0,
            }],
            10.0,
        );
        let (next, report) = run_round(&state, &cfg, SimMethod::Ilp, 0).unwrap();
        assert!(report.outcome.rejected.is_empty());
        assert_eq!(next.counters.served, 1);
        assert!(next.conserved());
        assert_eq!(next.clock, 60.0);
    }

    #[test]
    fn no_carry_over_rejects_for_good() {
        let cfg = SimConfig {
            fleet_size: 0,
            carry_over: false,
            ..small_cfg()
        };
        let r = run_simulation(&cfg, 2).unwrap();
        assert!(r.driver.conservation_ok);
        assert_eq!(r.driver.rejected_terminal, r.driver.arrivals);
    }

    #[test]
    fn carryover_decays() {
        let pts = scripted_carryover(2, 3, 2000, 0, Execution::default()).unwrap();
        assert_eq!(pts.len(), 3);
        for w in pts.windows(2) {
            assert!(w[1].fraction_unassigned <= w[0].fraction_unassigned);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = SimConfig {
            batch_interval: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let parsed: SimConfig = serde_json::from_str(r#"{"methods": ["lp+det"]}"#).unwrap();
        assert_eq!(parsed.methods, vec![SimMethod::LpDet]);
    }
}
