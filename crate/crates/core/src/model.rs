//! Domain types shared by every solver: requests, vehicles, trips, the trip
//! catalog, fractional and integral solutions, and dual solutions.
//!
//! Request and vehicle ids are dense: the i-th request of an instance has id
//! `i`, and likewise for vehicles. Trips hold request ids in ascending order.
//! Trip 0 of every catalog is the empty trip.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

pub type RequestId = usize;
pub type VehicleId = usize;
pub type TripId = usize;

/// Id of the empty trip in every catalog.
pub const EMPTY_TRIP: TripId = 0;

/// Tolerance on the equality constraints of a fractional solution.
pub const FRACTIONAL_TOL: f64 = 1e-6;
/// Tolerance used when comparing stored and recomputed assignment costs.
pub const COST_TOL: f64 = 1e-9;

/// A point in the plane, in kilometers. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub f64, pub f64);

impl Point {
    pub fn euclidean(self, other: Point) -> f64 {
        (self.0 - other.0).hypot(self.1 - other.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub origin: Point,
    pub destination: Point,
    /// Seconds.
    pub request_time: f64,
    /// Latest pickup is `request_time + max_wait`.
    pub max_wait: f64,
    /// Latest dropoff is `request_time + direct travel time + max_delay`.
    pub max_delay: f64,
    /// Cost of leaving the request unserved in the penalty version.
    pub penalty: f64,
}

impl Request {
    pub fn latest_pickup(&self) -> f64 {
        self.request_time + self.max_wait
    }
}

/// A passenger already inside a vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnboardPassenger {
    pub destination: Point,
    pub latest_dropoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub position: Point,
    pub available_time: f64,
    pub capacity: usize,
    #[serde(default)]
    pub onboard: Vec<OnboardPassenger>,
    /// Set on the dummy vehicle of a request in the penalty version. A dummy
    /// vehicle can serve only the empty trip (cost 0) and `{r}` (cost κ_r).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dummy_for: Option<RequestId>,
}

impl Vehicle {
    pub fn is_dummy(&self) -> bool {
        self.dummy_for.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qos {
    pub max_wait: f64,
    pub max_delay: f64,
}

impl Default for Qos {
    fn default() -> Self {
        Qos {
            max_wait: 300.0,
            max_delay: 600.0,
        }
    }
}

/// Distance model. Serialized as `"euclidean"` or
/// `{"matrix": [[...]], "points": [[x, y], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricRepr", into = "MetricRepr")]
pub enum Metric {
    Euclidean,
    Matrix {
        matrix: Vec<Vec<f64>>,
        points: Vec<Point>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MetricRepr {
    Named(String),
    Matrix {
        matrix: Vec<Vec<f64>>,
        points: Vec<Point>,
    },
}

impl TryFrom<MetricRepr> for Metric {
    type Error = String;

    fn try_from(r: MetricRepr) -> std::result::Result<Self, String> {
        match r {
            MetricRepr::Named(s) if s == "euclidean" => Ok(Metric::Euclidean),
            MetricRepr::Named(s) => Err(format!("unknown metric {s:?}")),
            MetricRepr::Matrix { matrix, points } => Ok(Metric::Matrix { matrix, points }),
        }
    }
}

impl From<Metric> for MetricRepr {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Euclidean => MetricRepr::Named("euclidean".into()),
            Metric::Matrix { matrix, points } => MetricRepr::Matrix { matrix, points },
        }
    }
}

impl Metric {
    /// Distance in kilometers. For a matrix metric both points must be listed
    /// in `points`; this is checked when the instance is validated.
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        match self {
            Metric::Euclidean => a.euclidean(b),
            Metric::Matrix { matrix, points } => {
                let i = points.iter().position(|p| *p == a);
                let j = points.iter().position(|p| *p == b);
                match (i, j) {
                    (Some(i), Some(j)) => matrix[i][j],
                    _ => panic!("point missing from distance matrix"),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let Metric::Matrix { matrix, points } = self else {
            return Ok(());
        };
        let n = points.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Metric(format!("matrix must be {n}x{n}")));
        }
        for i in 0..n {
            if matrix[i][i] != 0.0 {
                return Err(Error::Metric(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = matrix[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Metric(format!("negative or non-finite entry ({i}, {j})")));
                }
                if (d - matrix[j][i]).abs() > 1e-9 {
                    return Err(Error::Metric(format!("asymmetric entries ({i}, {j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if matrix[i][k] > matrix[i][j] + matrix[j][k] + 1e-9 {
                        return Err(Error::Metric(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn contains(&self, p: Point) -> bool {
        match self {
            Metric::Euclidean => true,
            Metric::Matrix { points, .. } => points.contains(&p),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub requests: Vec<Request>,
    pub vehicles: Vec<Vehicle>,
    pub metric: Metric,
    /// Kilometers per second.
    pub speed: f64,
    pub qos: Qos,
    /// Precomputed catalog; stored in its own file, never in the instance file.
    #[serde(skip)]
    pub trips: Option<TripCatalog>,
}

impl Instance {
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.metric.distance(a, b)
    }

    pub fn travel_time(&self, a: Point, b: Point) -> f64 {
        self.distance(a, b) / self.speed
    }

    pub fn direct_distance(&self, r: RequestId) -> f64 {
        let req = &self.requests[r];
        self.distance(req.origin, req.destination)
    }

    pub fn latest_dropoff(&self, r: RequestId) -> f64 {
        let req = &self.requests[r];
        req.request_time + self.travel_time(req.origin, req.destination) + req.max_delay
    }

    pub fn n_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Checks every type invariant; the error names the failing field.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::invariant("speed", "must be positive"));
        }
        if !nonneg(self.qos.max_wait) || !nonneg(self.qos.max_delay) {
            return Err(Error::invariant("qos", "max_wait and max_delay must be >= 0"));
        }
        self.metric.validate()?;
        for (i, r) in self.requests.iter().enumerate() {
            let field = |f: &str| format!("requests[{i}].{f}");
            if r.id != i {
                return Err(Error::invariant(field("id"), format!("expected {i}, got {}", r.id)));
            }
            if !nonneg(r.max_wait) {
                return Err(Error::invariant(field("max_wait"), "must be >= 0"));
            }
            if !nonneg(r.max_delay) {
                return Err(Error::invariant(field("max_delay"), "must be >= 0"));
            }
            if !nonneg(r.penalty) {
                return Err(Error::invariant(field("penalty"), "must be >= 0"));
            }
            if !r.request_time.is_finite() {
                return Err(Error::invariant(field("request_time"), "must be finite"));
            }
            if !self.metric.contains(r.origin) || !self.metric.contains(r.destination) {
                return Err(Error::Metric(format!("request {i} endpoint missing from points")));
            }
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = |f: &str| format!("vehicles[{i}].{f}");
            if v.id != i {
                return Err(Error::invariant(field("id"), format!("expected {i}, got {}", v.id)));
            }
            if v.capacity < 1 {
                return Err(Error::invariant(field("capacity"), "must be >= 1"));
            }
            if v.onboard.len() > v.capacity {
                return Err(Error::invariant(field("onboard"), "more passengers than capacity"));
            }
            if let Some(p) = v.onboard.iter().find(|p| p.latest_dropoff < v.available_time) {
                return Err(Error::invariant(
                    field("onboard"),
                    format!("latest_dropoff {} before available_time", p.latest_dropoff),
                ));
            }
            if let Some(r) = v.dummy_for {
                if r >= self.requests.len() {
                    return Err(Error::invariant(field("dummy_for"), "unknown request"));
                }
            }
            if !self.metric.contains(v.position)
                || v.onboard.iter().any(|p| !self.metric.contains(p.destination))
            {
                return Err(Error::Metric(format!("vehicle {i} point missing from points")));
            }
        }
        Ok(())
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let inst: Instance = json::from_str(&text)?;
    inst.validate()?;
    Ok(inst)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    json::write_file(path.as_ref(), inst)
}

/// A set of requests served together, in canonical (sorted, distinct) form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<RequestId>")]
pub struct Trip(Vec<RequestId>);

impl From<Vec<RequestId>> for Trip {
    fn from(v: Vec<RequestId>) -> Self {
        Trip::new(v)
    }
}

impl Trip {
    pub fn new(requests: impl IntoIterator<Item = RequestId>) -> Self {
        let mut v: Vec<_> = requests.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Trip(v)
    }

    pub fn empty() -> Self {
        Trip(Vec::new())
    }

    pub fn requests(&self) -> &[RequestId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, r: RequestId) -> bool {
        self.0.binary_search(&r).is_ok()
    }

    pub fn without(&self, r: RequestId) -> Trip {
        Trip(self.0.iter().copied().filter(|&x| x != r).collect())
    }
}

/// An admissible (trip, vehicle) pair with its cost c_{tv}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissible {
    pub trip: TripId,
    pub cost: f64,
}

/// The candidate trip set T with per-vehicle admissible lists T(v) and
/// per-request lists T(r).
#[derive(Clone, Debug)]
pub struct TripCatalog {
    trips: Vec<Trip>,
    per_vehicle: Vec<Vec<Admissible>>,
    per_request: Vec<Vec<TripId>>,
    index: HashMap<Trip, TripId>,
    /// Set when generation stopped early; holds the last completed trip size.
    pub truncated_at: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    trips: Vec<Trip>,
    per_vehicle: BTreeMap<String, Vec<Admissible>>,
}

impl TripCatalog {
    /// Builds a catalog. `trips[0]` must be the empty trip; per-vehicle
    /// lists are sorted by trip id.
    pub fn new(
        n_requests: usize,
        trips: Vec<Trip>,
        mut per_vehicle: Vec<Vec<Admissible>>,
    ) -> Result<Self> {
        if trips.first().is_none_or(|t| !t.is_empty()) {
            return Err(Error::invariant("trips", "trip 0 must be the empty trip"));
        }
        let mut index = HashMap::with_capacity(trips.len());
        let mut per_request = vec![Vec::new(); n_requests];
        for (id, t) in trips.iter().enumerate() {
            if index.insert(t.clone(), id).is_some() {
                return Err(Error::invariant("trips", format!("duplicate trip {:?}", t.0)));
            }
            for &r in t.requests() {
                if r >= n_requests {
                    return Err(Error::invariant("trips", format!("unknown request {r}")));
                }
                per_request[r].push(id);
            }
        }
        for (v, list) in per_vehicle.iter_mut().enumerate() {
            list.sort_by_key(|a| a.trip);
            if list.windows(2).any(|w| w[0].trip == w[1].trip) {
                return Err(Error::invariant("per_vehicle", format!("duplicate trip for {v}")));
            }
            if let Some(a) = list.iter().find(|a| a.trip >= trips.len()) {
                return Err(Error::invariant("per_vehicle", format!("unknown trip {}", a.trip)));
            }
            if let Some(a) = list.iter().find(|a| !(a.cost.is_finite() && a.cost >= 0.0)) {
                return Err(Error::invariant(
                    "per_vehicle",
                    format!("cost of trip {} for vehicle {v} must be >= 0", a.trip),
                ));
            }
        }
        Ok(TripCatalog {
            trips,
            per_vehicle,
            per_request,
            index,
            truncated_at: None,
        })
    }

    pub fn n_requests(&self) -> usize {
        self.per_request.len()
    }

    pub fn n_vehicles(&self) -> usize {
        self.per_vehicle.len()
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn trip(&self, id: TripId) -> &Trip {
        &self.trips[id]
    }

    pub fn trip_id(&self, t: &Trip) -> Option<TripId> {
        self.index.get(t).copied()
    }

    /// T(v), sorted by trip id.
    pub fn admissible(&self, v: VehicleId) -> &[Admissible] {
        &self.per_vehicle[v]
    }

    /// T(r): trips containing `r`, ascending.
    pub fn trips_with(&self, r: RequestId) -> &[TripId] {
        &self.per_request[r]
    }

    pub fn cost(&self, t: TripId, v: VehicleId) -> Option<f64> {
        let list = self.per_vehicle.get(v)?;
        list.binary_search_by_key(&t, |a| a.trip)
            .ok()
            .map(|i| list[i].cost)
    }

    /// Appends vehicles whose admissible lists may reference new trips.
    /// Existing trip ids are preserved.
    pub fn with_extra(
        &self,
        new_trips: impl IntoIterator<Item = Trip>,
        new_vehicles: Vec<Vec<(Trip, f64)>>,
    ) -> Result<TripCatalog> {
        let mut trips = self.trips.clone();
        let mut index = self.index.clone();
        for t in new_trips {
            if !index.contains_key(&t) {
                index.insert(t.clone(), trips.len());
                trips.push(t);
            }
        }
        let mut per_vehicle = self.per_vehicle.clone();
        for list in new_vehicles {
            let mut adm = Vec::with_capacity(list.len());
            for (t, cost) in list {
                let id = match index.get(&t) {
                    Some(&id) => id,
                    None => {
                        index.insert(t.clone(), trips.len());
                        trips.push(t);
                        trips.len() - 1
                    }
                };
                adm.push(Admissible { trip: id, cost });
            }
            per_vehicle.push(adm);
        }
        let mut cat = TripCatalog::new(self.n_requests(), trips, per_vehicle)?;
        cat.truncated_at = self.truncated_at;
        Ok(cat)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CatalogFile {
            trips: self.trips.clone(),
            per_vehicle: self
                .per_vehicle
                .iter()
                .enumerate()
                .map(|(v, l)| (v.to_string(), l.clone()))
                .collect(),
        };
        json::to_canonical_string(&file)
    }

    pub fn from_json(text: &str, n_requests: usize) -> Result<Self> {
        let file: CatalogFile = json::from_str(text)?;
        let mut per_vehicle = Vec::with_capacity(file.per_vehicle.len());
        let mut keyed: Vec<(usize, Vec<Admissible>)> = Vec::new();
        for (k, l) in file.per_vehicle {
            let v: usize = k
                .parse()
                .map_err(|_| Error::invariant("per_vehicle", format!("bad vehicle key {k:?}")))?;
            keyed.push((v, l));
        }
        keyed.sort_by_key(|(v, _)| *v);
        for (i, (v, l)) in keyed.into_iter().enumerate() {
            if v != i {
                return Err(Error::invariant("per_vehicle", format!("missing vehicle {i}")));
            }
            per_vehicle.push(l);
        }
        TripCatalog::new(n_requests, file.trips, per_vehicle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, n_requests: usize) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, n_requests)
    }
}

/// A catalog defect found by [`validate_catalog`].
#[derive(Clone, Debug, PartialEq)]
pub enum CatalogViolation {
    MissingEmptyTrip { vehicle: VehicleId },
    /// `trip ∖ {request}` is not admissible for `vehicle`.
    Closure {
        trip: TripId,
        vehicle: VehicleId,
        request: RequestId,
    },
    /// `c(trip ∖ {request}, vehicle) > c(trip, vehicle)`.
    Monotonicity {
        trip: TripId,
        vehicle: VehicleId,
        request: RequestId,
    },
}

/// Reports every violation of per-vehicle downward closure, cost
/// monotonicity and empty-trip membership.
pub fn validate_catalog(cat: &TripCatalog) -> Vec<CatalogViolation> {
    let mut out = Vec::new();
    for v in 0..cat.n_vehicles() {
        if cat.cost(EMPTY_TRIP, v).is_none() {
            out.push(CatalogViolation::MissingEmptyTrip { vehicle: v });
        }
        for a in cat.admissible(v) {
            let t = cat.trip(a.trip);
            for &r in t.requests() {
                let sub = cat
                    .trip_id(&t.without(r))
                    .and_then(|id| cat.cost(id, v));
                match sub {
                    // A missing empty trip is reported once above.
                    None if t.len() == 1 => {}
                    None => out.push(CatalogViolation::Closure {
                        trip: a.trip,
                        vehicle: v,
                        request: r,
                    }),
                    Some(c) if c > a.cost + COST_TOL => out.push(CatalogViolation::Monotonicity {
                        trip: a.trip,
                        vehicle: v,
                        request: r,
                    }),
                    Some(_) => {}
                }
            }
        }
    }
    out
}

/// LP values x_{tv}, sparse. Keys are `(vehicle, trip)` so that each
/// vehicle's distribution is contiguous and ordered by trip id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FractionalSolution {
    pub values: BTreeMap<(VehicleId, TripId), f64>,
    pub objective: f64,
}

#[derive(Serialize, Deserialize)]
struct FractionalEntry {
    trip: TripId,
    vehicle: VehicleId,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct FractionalFile {
    values: Vec<FractionalEntry>,
    objective: f64,
}

impl Serialize for FractionalSolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FractionalFile {
            values: self
                .values
                .iter()
                .map(|(&(vehicle, trip), &value)| FractionalEntry {
                    trip,
                    vehicle,
                    value,
                })
                .collect(),
            objective: self.objective,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FractionalSolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = FractionalFile::deserialize(d)?;
        Ok(FractionalSolution {
            values: f
                .values
                .into_iter()
                .map(|e| ((e.vehicle, e.trip), e.value))
                .collect(),
            objective: f.objective,
        })
    }
}

impl FractionalSolution {
    pub fn get(&self, trip: TripId, vehicle: VehicleId) -> f64 {
        self.values.get(&(vehicle, trip)).copied().unwrap_or(0.0)
    }

    /// `(trip, value)` pairs of one vehicle, ascending by trip id.
    pub fn vehicle_values(&self, v: VehicleId) -> impl Iterator<Item = (TripId, f64)> + '_ {
        self.values
            .range((v, 0)..(v + 1, 0))
            .map(|(&(_, t), &x)| (t, x))
    }

    pub fn cost(&self, cat: &TripCatalog) -> Result<f64> {
        let mut total = 0.0;
        for (&(v, t), &x) in &self.values {
            let c = cat
                .cost(t, v)
                .ok_or(Error::Inadmissible { trip: t, vehicle: v })?;
            total += c * x;
        }
        Ok(total)
    }

    /// Checks value ranges, admissibility, and the request and vehicle
    /// equality rows within [`FRACTIONAL_TOL`].
    pub fn check(&self, cat: &TripCatalog) -> Result<()> {
        let mut per_request = vec![0.0; cat.n_requests()];
        let mut per_vehicle = vec![0.0; cat.n_vehicles()];
        for (&(v, t), &x) in &self.values {
            if !(-FRACTIONAL_TOL..=1.0 + FRACTIONAL_TOL).contains(&x) {
                return Err(Error::invariant("x", format!("x[{t},{v}] = {x} outside [0, 1]")));
            }
            if v >= cat.n_vehicles() || cat.cost(t, v).is_none() {
                return Err(Error::Inadmissible { trip: t, vehicle: v });
            }
            per_vehicle[v] += x;
            for &r in cat.trip(t).requests() {
                per_request[r] += x;
            }
        }
        if let Some((r, s)) = per_request
            .iter()
            .enumerate()
            .find(|(_, s)| (*s - 1.0).abs() > FRACTIONAL_TOL)
        {
            return Err(Error::invariant("x", format!("request {r} row sums to {s}")));
        }
        if let Some((v, s)) = per_vehicle
            .iter()
            .enumerate()
            .find(|(_, s)| (*s - 1.0).abs() > FRACTIONAL_TOL)
        {
            return Err(Error::invariant("x", format!("vehicle {v} row sums to {s}")));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        json::from_str(&std::fs::read_to_string(path)?)
    }
}

/// One trip per vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub by_vehicle: Vec<TripId>,
    pub cost: f64,
    pub unassigned: BTreeSet<RequestId>,
}

impl Assignment {
    /// Builds an assignment from per-vehicle trip choices, checking
    /// admissibility and that no request is served twice.
    pub fn from_choices(choices: Vec<TripId>, cat: &TripCatalog) -> Result<Assignment> {
        if choices.len() != cat.n_vehicles() {
            return Err(Error::invariant(
                "by_vehicle",
                format!("{} choices for {} vehicles", choices.len(), cat.n_vehicles()),
            ));
        }
        let mut covered = vec![false; cat.n_requests()];
        let mut cost = 0.0;
        for (v, &t) in choices.iter().enumerate() {
            cost += cat
                .cost(t, v)
                .ok_or(Error::Inadmissible { trip: t, vehicle: v })?;
            for &r in cat.trip(t).requests() {
                if std::mem::replace(&mut covered[r], true) {
                    return Err(Error::invariant(
                        "by_vehicle",
                        format!("request {r} served by more than one vehicle"),
                    ));
                }
            }
        }
        let unassigned = (0..cat.n_requests()).filter(|&r| !covered[r]).collect();
        Ok(Assignment {
            by_vehicle: choices,
            cost,
            unassigned,
        })
    }

    /// Every vehicle on the empty trip.
    pub fn idle(cat: &TripCatalog) -> Result<Assignment> {
        Assignment::from_choices(vec![EMPTY_TRIP; cat.n_vehicles()], cat)
    }

    pub fn to_file(&self, cat: &TripCatalog) -> SolutionFile {
        SolutionFile {
            by_vehicle: self
                .by_vehicle
                .iter()
                .enumerate()
                .map(|(v, &t)| (v.to_string(), cat.trip(t).requests().to_vec()))
                .collect(),
            cost: self.cost,
            unassigned: self.unassigned.iter().copied().collect(),
        }
    }
}

/// Σ_v c_{t(v), v}, recomputed from the catalog.
pub fn assignment_cost(a: &Assignment, cat: &TripCatalog) -> Result<f64> {
    a.by_vehicle
        .iter()
        .enumerate()
        .map(|(v, &t)| cat.cost(t, v).ok_or(Error::Inadmissible { trip: t, vehicle: v }))
        .sum()
}

/// Solution file layout: vehicle id → request ids of its trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub by_vehicle: BTreeMap<String, Vec<RequestId>>,
    pub cost: f64,
    pub unassigned: Vec<RequestId>,
}

/// Dual values: `y` per request row, `z` per vehicle row, with dual
/// constraints Σ_{r∈t} y_r − z_v ≤ c_{tv}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
}

impl DualSolution {
    /// Σ_{r∈t} y_r − z_v − c_{tv}; positive means the dual constraint is violated.
    pub fn violation(&self, trip: &Trip, v: VehicleId, cost: f64) -> f64 {
        trip.requests().iter().map(|&r| self.y[r]).sum::<f64>() - self.z[v] - cost
    }

    /// c_{tv} − Σ_{r∈t} y_r + z_v.
    pub fn reduced_cost(&self, trip: &Trip, v: VehicleId, cost: f64) -> f64 {
        -self.violation(trip, v, cost)
    }

    /// Largest violation over all admissible pairs of the catalog.
    pub fn max_violation(&self, cat: &TripCatalog) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for v in 0..cat.n_vehicles() {
            for a in cat.admissible(v) {
                worst = worst.max(self.violation(cat.trip(a.trip), v, a.cost));
            }
        }
        worst
    }
}
