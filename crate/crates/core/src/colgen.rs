//! Column generation for the LP relaxation.
//!
//! The restricted master is solved with request rows in covering form so that
//! the request duals are nonnegative. Each round prices every vehicle with an
//! exact pricer that maximizes Σ_{r∈t} y_r − c_{tv} by depth-first subset
//! enumeration, and adds the best trip of every vehicle whose value exceeds
//! z_v. Added trips come with all their sub-trips, which keeps the master
//! downward closed. When the column set stops growing the master is solved
//! once more in equality form to obtain the primal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use log::debug;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lp::{build_lp, solve_lp, solve_lp_with, DualForm, SUPPORT_TOL};
use crate::model::{
    Admissible, DualSolution, FractionalSolution, Instance, RequestId, Trip, TripCatalog,
    VehicleId,
};
use crate::tripgen;

/// A dual constraint counts as violated above this margin.
pub const VIOLATION_TOL: f64 = 1e-7;
const TIE_TOL: f64 = 1e-12;
const BIG_M_START: f64 = 1e6;
const BIG_M_LIMIT: f64 = 1e9;

/// Route cost of a (trip, vehicle) pair, `None` when infeasible.
pub trait CostOracle: Sync {
    fn n_requests(&self) -> usize;
    fn n_vehicles(&self) -> usize;
    fn cost(&self, t: &Trip, v: VehicleId) -> Option<f64>;
    /// The request a penalty vehicle stands for.
    fn dummy_for(&self, _v: VehicleId) -> Option<RequestId> {
        None
    }
}

/// Costs from the exact router, with the same empty-trip rules as the trip
/// generator.
pub struct RoutingOracle<'a> {
    inst: &'a Instance,
    empty: Vec<(f64, bool)>,
}

impl<'a> RoutingOracle<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let empty = inst
            .vehicles
            .iter()
            .map(|v| tripgen::empty_trip_cost(v, inst))
            .collect();
        RoutingOracle { inst, empty }
    }
}

impl CostOracle for RoutingOracle<'_> {
    fn n_requests(&self) -> usize {
        self.inst.n_requests()
    }

    fn n_vehicles(&self) -> usize {
        self.inst.n_vehicles()
    }

    fn cost(&self, t: &Trip, v: VehicleId) -> Option<f64> {
        let (empty_cost, ok) = self.empty[v];
        if t.is_empty() {
            Some(empty_cost)
        } else if !ok {
            None
        } else {
            tripgen::route_cost(t, &self.inst.vehicles[v], self.inst)
        }
    }

    fn dummy_for(&self, v: VehicleId) -> Option<RequestId> {
        self.inst.vehicles[v].dummy_for
    }
}

/// Costs looked up in an explicit catalog.
pub struct CatalogOracle<'a> {
    cat: &'a TripCatalog,
}

impl<'a> CatalogOracle<'a> {
    pub fn new(cat: &'a TripCatalog) -> Self {
        CatalogOracle { cat }
    }
}

impl CostOracle for CatalogOracle<'_> {
    fn n_requests(&self) -> usize {
        self.cat.n_requests()
    }

    fn n_vehicles(&self) -> usize {
        self.cat.n_vehicles()
    }

    fn cost(&self, t: &Trip, v: VehicleId) -> Option<f64> {
        self.cat.trip_id(t).and_then(|id| self.cat.cost(id, v))
    }
}

type CostCache = Mutex<HashMap<Trip, Option<f64>>>;

fn cached_cost(oracle: &dyn CostOracle, cache: Option<&CostCache>, t: &Trip, v: VehicleId) -> Option<f64> {
    let Some(cache) = cache else {
        return oracle.cost(t, v);
    };
    if let Some(&c) = cache.lock().expect("cost cache").get(t) {
        return c;
    }
    let c = oracle.cost(t, v);
    cache.lock().expect("cost cache").insert(t.clone(), c);
    c
}

fn trip_order_less(a: &Trip, b: &Trip) -> bool {
    (a.len(), a.requests()) < (b.len(), b.requests())
}

struct Pricer<'a> {
    oracle: &'a dyn CostOracle,
    cache: Option<&'a CostCache>,
    v: VehicleId,
    y: &'a [f64],
    max_size: usize,
    cands: Vec<RequestId>,
    /// suffix[i] = Σ_{j ≥ i} y[cands[j]].
    suffix: Vec<f64>,
    best: (Trip, f64),
}

impl Pricer<'_> {
    fn offer(&mut self, t: Trip, value: f64) {
        let (ref bt, bv) = self.best;
        if value > bv + TIE_TOL || (value >= bv - TIE_TOL && trip_order_less(&t, bt)) {
            self.best = (t, value);
        }
    }

    fn dfs(&mut self, start: usize, current: &mut Vec<RequestId>, profit: f64, cost: f64) {
        if current.len() >= self.max_size {
            return;
        }
        for i in start..self.cands.len() {
            let r = self.cands[i];
            // Costs are monotone, so no superset of current ∪ {r} can beat this.
            if profit + self.y[r] + self.suffix[i + 1] - cost < self.best.1 - TIE_TOL {
                continue;
            }
            current.push(r);
            let t = Trip::new(current.iter().copied());
            if let Some(c) = cached_cost(self.oracle, self.cache, &t, self.v) {
                let p = profit + self.y[r];
                self.offer(t, p - c);
                if p + self.suffix[i + 1] - c >= self.best.1 - TIE_TOL {
                    self.dfs(i + 1, current, p, c);
                }
            }
            current.pop();
        }
    }
}

fn price_with_cache(
    oracle: &dyn CostOracle,
    cache: Option<&CostCache>,
    v: VehicleId,
    y: &[f64],
    max_trip_size: usize,
) -> (Trip, f64) {
    let empty = Trip::empty();
    let Some(c0) = cached_cost(oracle, cache, &empty, v) else {
        return (empty, f64::NEG_INFINITY);
    };
    let cands: Vec<RequestId> = (0..y.len()).filter(|&r| y[r] > 0.0).collect();
    let mut suffix = vec![0.0; cands.len() + 1];
    for i in (0..cands.len()).rev() {
        suffix[i] = suffix[i + 1] + y[cands[i]];
    }
    let mut p = Pricer {
        oracle,
        cache,
        v,
        y,
        max_size: max_trip_size,
        cands,
        suffix,
        best: (empty, -c0),
    };
    p.dfs(0, &mut Vec::new(), 0.0, c0);
    p.best
}

/// Trip maximizing Σ_{r∈t} y_r − c_{tv} over the feasible trips of `v` with
/// at most `max_trip_size` requests, with its value. Ties go to the smaller
/// trip, then the lexicographically smaller one. Requests with y_r ≤ 0 are
/// never needed since costs are monotone.
pub fn price_vehicle(
    oracle: &dyn CostOracle,
    v: VehicleId,
    y: &[f64],
    max_trip_size: usize,
) -> (Trip, f64) {
    price_with_cache(oracle, None, v, y, max_trip_size)
}

/// A violated dual constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub vehicle: VehicleId,
    pub trip: Trip,
    /// Σ_{r∈t} y_r − c_{tv} − z_v.
    pub amount: f64,
}

/// First vehicle (by id) whose best trip violates Σ y_r − z_v ≤ c_{tv} by
/// more than [`VIOLATION_TOL`], or `None` when (y, z) is dual feasible.
pub fn separate_dual(
    oracle: &dyn CostOracle,
    dual: &DualSolution,
    max_trip_size: usize,
) -> Option<Violation> {
    (0..oracle.n_vehicles()).find_map(|v| {
        let (trip, value) = price_vehicle(oracle, v, &dual.y, max_trip_size);
        let amount = value - dual.z[v];
        (amount > VIOLATION_TOL).then_some(Violation {
            vehicle: v,
            trip,
            amount,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub master_objective: f64,
    pub columns_added: usize,
    pub max_violation: f64,
}

pub fn log_to_csv(log: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,master_objective,columns_added,max_violation\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.iteration, r.master_objective, r.columns_added, r.max_violation
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct ColgenOptions {
    pub max_trip_size: usize,
    /// Defaults to 10·|R|·|V|.
    pub iteration_cap: Option<usize>,
    pub mode: Execution,
}

impl ColgenOptions {
    pub fn new(max_trip_size: usize) -> Self {
        ColgenOptions {
            max_trip_size,
            iteration_cap: None,
            mode: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ColgenResult {
    /// The generated columns; `primal` refers to its trip ids.
    pub catalog: TripCatalog,
    pub primal: FractionalSolution,
    /// Master dual with y ≥ 0, certified feasible for every trip up to the
    /// size limit.
    pub dual: DualSolution,
    /// Number of rounds that added columns.
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// Empty trip for every vehicle plus the singleton of every penalty vehicle.
pub fn default_initial_columns(oracle: &dyn CostOracle) -> Vec<(VehicleId, Trip)> {
    let mut out = Vec::new();
    for v in 0..oracle.n_vehicles() {
        out.push((v, Trip::empty()));
        if let Some(r) = oracle.dummy_for(v) {
            out.push((v, Trip::new([r])));
        }
    }
    out
}

/// Column generation on an instance: catalog costs when the instance carries
/// an explicit catalog, the router otherwise.
pub fn solve_lp_by_colgen(
    inst: &Instance,
    max_trip_size: usize,
    initial: Option<&[(VehicleId, Trip)]>,
) -> Result<ColgenResult> {
    let opts = ColgenOptions::new(max_trip_size);
    match &inst.trips {
        Some(cat) => {
            let oracle = CatalogOracle::new(cat);
            let init = initial.map_or_else(|| default_initial_columns(&oracle), <[_]>::to_vec);
            solve_lp_by_colgen_with(&oracle, &init, &opts)
        }
        None => {
            let oracle = RoutingOracle::new(inst);
            let init = initial.map_or_else(|| default_initial_columns(&oracle), <[_]>::to_vec);
            solve_lp_by_colgen_with(&oracle, &init, &opts)
        }
    }
}

/// Column set per vehicle: trip → cost.
type Columns = Vec<BTreeMap<Trip, f64>>;

fn add_closed(cols: &mut BTreeMap<Trip, f64>, oracle: &dyn CostOracle, cache: &CostCache, v: VehicleId, t: &Trip) -> usize {
    let mut added = 0;
    let reqs = t.requests();
    for mask in 0u64..(1u64 << reqs.len()) {
        let sub = Trip::new((0..reqs.len()).filter(|i| mask >> i & 1 == 1).map(|i| reqs[i]));
        if cols.contains_key(&sub) {
            continue;
        }
        if let Some(c) = cached_cost(oracle, Some(cache), &sub, v) {
            cols.insert(sub, c);
            added += 1;
        }
    }
    added
}

/// Catalog over `cols`, with artificial vehicles appended: one per entry of
/// `artificial`, admitting ∅ at 0 and {r} at `big_m`.
fn master_catalog(n_requests: usize, cols: &Columns, artificial: &[RequestId], big_m: f64) -> Result<TripCatalog> {
    let mut set: BTreeSet<(usize, &Trip)> = cols
        .iter()
        .flat_map(|m| m.keys().map(|t| (t.len(), t)))
        .collect();
    let singles: Vec<Trip> = artificial.iter().map(|&r| Trip::new([r])).collect();
    set.extend(singles.iter().map(|t| (1, t)));
    let empty = Trip::empty();
    set.insert((0, &empty));
    let trips: Vec<Trip> = set.into_iter().map(|(_, t)| t.clone()).collect();
    let index: HashMap<&Trip, usize> = trips.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut per_vehicle: Vec<Vec<Admissible>> = cols
        .iter()
        .map(|m| {
            m.iter()
                .map(|(t, &cost)| Admissible {
                    trip: index[t],
                    cost,
                })
                .collect()
        })
        .collect();
    for t in &singles {
        per_vehicle.push(vec![
            Admissible { trip: 0, cost: 0.0 },
            Admissible {
                trip: index[t],
                cost: big_m,
            },
        ]);
    }
    TripCatalog::new(n_requests, trips, per_vehicle)
}

/// Column generation against any cost oracle. `initial` must contain every
/// vehicle's empty trip. Requests not covered by a penalty vehicle get an
/// internal big-M cover that must be unused at convergence; otherwise the LP
/// is reported infeasible.
pub fn solve_lp_by_colgen_with(
    oracle: &dyn CostOracle,
    initial: &[(VehicleId, Trip)],
    opts: &ColgenOptions,
) -> Result<ColgenResult> {
    if opts.max_trip_size < 1 {
        return Err(Error::invariant("max_trip_size", "must be >= 1"));
    }
    let n_r = oracle.n_requests();
    let n_v = oracle.n_vehicles();
    let caches: Vec<CostCache> = (0..n_v).map(|_| Mutex::new(HashMap::new())).collect();
    let mut cols: Columns = vec![BTreeMap::new(); n_v];
    for (v, t) in initial {
        if *v >= n_v {
            return Err(Error::invariant("initial", format!("unknown vehicle {v}")));
        }
        add_closed(&mut cols[*v], oracle, &caches[*v], *v, t);
    }
    if let Some(v) = (0..n_v).find(|&v| !cols[v].contains_key(&Trip::empty())) {
        return Err(Error::invariant("initial", format!("vehicle {v} lacks the empty trip")));
    }
    let mut penalized = vec![false; n_r];
    (0..n_v).filter_map(|v| oracle.dummy_for(v)).for_each(|r| penalized[r] = true);
    let artificial: Vec<RequestId> = (0..n_r).filter(|&r| !penalized[r]).collect();

    let cap = opts.iteration_cap.unwrap_or((10 * n_r * n_v).max(1));
    let mut big_m = BIG_M_START;
    let mut iterations = 0;
    let mut log = Vec::new();
    let dual = loop {
        let cat = master_catalog(n_r, &cols, &artificial, big_m)?;
        let sol = solve_lp_with(&build_lp(&cat), DualForm::Covering)?;
        let dual = DualSolution {
            y: sol.dual.y.clone(),
            z: sol.dual.z[..n_v].to_vec(),
            objective: sol.dual.objective,
        };
        let priced = exec::map_range(opts.mode, n_v, |v| {
            price_with_cache(oracle, Some(&caches[v]), v, &dual.y, opts.max_trip_size)
        });
        let mut added = 0;
        let mut max_violation: f64 = 0.0;
        for (v, (t, value)) in priced.iter().enumerate() {
            let amount = value - dual.z[v];
            max_violation = max_violation.max(amount);
            if amount > VIOLATION_TOL && !cols[v].contains_key(t) {
                added += add_closed(&mut cols[v], oracle, &caches[v], v, t);
            }
        }
        log.push(IterationRecord {
            iteration: log.len(),
            master_objective: sol.primal.objective,
            columns_added: added,
            max_violation,
        });
        debug!(
            "colgen round {}: objective {} added {added} violation {max_violation}",
            log.len() - 1,
            sol.primal.objective
        );
        if added == 0 {
            let used = (0..artificial.len()).any(|a| {
                sol.primal
                    .vehicle_values(n_v + a)
                    .any(|(t, x)| t != 0 && x > SUPPORT_TOL)
            });
            if !used {
                break dual;
            }
            if big_m >= BIG_M_LIMIT {
                return Err(Error::Infeasible);
            }
            big_m *= 1e3;
            continue;
        }
        iterations += 1;
        if iterations > cap {
            return Err(Error::IterationCap(cap));
        }
    };

    let catalog = master_catalog(n_r, &cols, &[], 0.0)?;
    let primal = solve_lp(&build_lp(&catalog))?.primal;
    Ok(ColgenResult {
        catalog,
        primal,
        dual,
        iterations,
        log,
    })
}
