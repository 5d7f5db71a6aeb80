//! Rounding of fractional solutions.
//!
//! * Independent rounding sets every indicator X_tv to 1 with probability
//!   x_tv on its own; the result may over-assign vehicles and is returned
//!   uncorrected.
//! * Dependent rounding draws one trip per vehicle from the vehicle's
//!   distribution {x_tv}_t and then applies the multiplicity correction.
//! * Deterministic rounding gives every vehicle its largest-valued trip and
//!   applies the same correction.
//!
//! Random draws use ChaCha8 seeded with `seed_from_u64`; trial `i` of a batch
//! uses seed `base_seed + i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::model::{
    Assignment, FractionalSolution, RequestId, TripCatalog, TripId, VehicleId, FRACTIONAL_TOL,
};

/// Identifier of the random stream written to every stats file.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";
/// Trials per aggregation chunk. Fixed so that the floating-point summation
/// order does not depend on the thread count.
const CHUNK: usize = 4096;
/// Relative slack when comparing fractional values for the argmax.
const TIE_TOL: f64 = 1e-9;

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Per-vehicle categorical sampling plus correction.
    Dependent,
    /// Largest fractional value per vehicle plus correction.
    Deterministic,
    /// Independent Bernoulli per indicator, no correction.
    Independent,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" | "dependent" => Ok(Method::Dependent),
            "det" | "deterministic" => Ok(Method::Deterministic),
            "indep" | "independent" => Ok(Method::Independent),
            _ => Err(Error::invariant("method", format!("unknown rounding method {s:?}"))),
        }
    }
}

/// Sets each indicator to 1 independently with probability x_tv. Returns
/// the chosen `(vehicle, trip)` pairs in key order.
pub fn round_independent(x: &FractionalSolution, seed: u64) -> Vec<(VehicleId, TripId)> {
    let mut rng = trial_rng(seed);
    x.values
        .iter()
        .filter(|&(_, &p)| rng.random::<f64>() < p)
        .map(|(&k, _)| k)
        .collect()
}

fn vehicle_sum(x: &FractionalSolution, v: VehicleId) -> Result<f64> {
    let s: f64 = x.vehicle_values(v).map(|(_, p)| p).sum();
    if (s - 1.0).abs() > FRACTIONAL_TOL {
        return Err(Error::invariant("x", format!("vehicle {v} values sum to {s}")));
    }
    Ok(s)
}

/// One trip per vehicle drawn by inverse CDF over the vehicle's columns in
/// trip-id order, before any correction.
pub fn sample_dependent(
    x: &FractionalSolution,
    n_vehicles: usize,
    seed: u64,
) -> Result<Vec<TripId>> {
    let mut rng = trial_rng(seed);
    let mut out = Vec::with_capacity(n_vehicles);
    for v in 0..n_vehicles {
        let total = vehicle_sum(x, v)?;
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (t, p) in x.vehicle_values(v) {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            pick = Some(t);
            if u < acc {
                break;
            }
        }
        out.push(pick.expect("vehicle with positive mass"));
    }
    Ok(out)
}

/// Largest fractional value per vehicle, ties by lowest trip id.
pub fn argmax_choices(x: &FractionalSolution, n_vehicles: usize) -> Result<Vec<TripId>> {
    (0..n_vehicles)
        .map(|v| {
            vehicle_sum(x, v)?;
            let max = x
                .vehicle_values(v)
                .map(|(_, p)| p)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(x.vehicle_values(v)
                .find(|&(_, p)| p >= max - TIE_TOL)
                .map(|(t, _)| t)
                .expect("non-empty vehicle distribution"))
        })
        .collect()
}

/// Resolves requests served by several vehicles. Requests are processed in
/// ascending id; each one stays in the trip whose competitors save the most
/// by dropping it (ties to the lowest vehicle id) and is removed from all
/// other trips, which shrink to their catalog sub-trips on the same vehicle.
/// The total cost never increases when costs are monotone.
pub fn multiplicity_correction(raw: &[TripId], cat: &TripCatalog) -> Result<Assignment> {
    if raw.len() != cat.n_vehicles() {
        return Err(Error::invariant("raw", "one trip per vehicle required"));
    }
    let mut ids = raw.to_vec();
    let mut cost = Vec::with_capacity(ids.len());
    for (v, &t) in ids.iter().enumerate() {
        cost.push(cat.cost(t, v).ok_or(Error::Inadmissible { trip: t, vehicle: v })?);
    }
    let mut count = vec![0usize; cat.n_requests()];
    for &t in &ids {
        for &r in cat.trip(t).requests() {
            count[r] += 1;
        }
    }
    for r in 0..cat.n_requests() {
        if count[r] < 2 {
            continue;
        }
        let mut holders: Vec<(VehicleId, TripId, f64)> = Vec::new();
        for (v, &t) in ids.iter().enumerate() {
            let trip = cat.trip(t);
            if !trip.contains(r) {
                continue;
            }
            let reduced = trip.without(r);
            let rid = cat.trip_id(&reduced);
            let rcost = rid.and_then(|id| cat.cost(id, v));
            let (Some(rid), Some(rcost)) = (rid, rcost) else {
                return Err(Error::ClosureViolation {
                    vehicle: v,
                    requests: reduced.requests().to_vec(),
                });
            };
            holders.push((v, rid, cost[v] - rcost));
        }
        let total: f64 = holders.iter().map(|h| h.2).sum();
        let mut keep = 0;
        for (i, h) in holders.iter().enumerate() {
            if total - h.2 > total - holders[keep].2 {
                keep = i;
            }
        }
        for (i, &(v, rid, saving)) in holders.iter().enumerate() {
            if i != keep {
                ids[v] = rid;
                cost[v] -= saving;
            }
        }
        count[r] = 1;
    }
    Assignment::from_choices(ids, cat)
}

pub fn round_dependent(x: &FractionalSolution, cat: &TripCatalog, seed: u64) -> Result<Assignment> {
    multiplicity_correction(&sample_dependent(x, cat.n_vehicles(), seed)?, cat)
}

pub fn round_deterministic(x: &FractionalSolution, cat: &TripCatalog) -> Result<Assignment> {
    multiplicity_correction(&argmax_choices(x, cat.n_vehicles())?, cat)
}

/// Empirical frequency of one supported indicator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorFrequency {
    pub vehicle: VehicleId,
    pub trip: TripId,
    pub x: f64,
    pub frequency: f64,
    pub std_error: f64,
}

/// Empirical covariance of two indicators of the same vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCovariance {
    pub vehicle: VehicleId,
    pub trip_a: TripId,
    pub trip_b: TripId,
    pub x_a: f64,
    pub x_b: f64,
    /// Fraction of trials with both indicators set.
    pub joint_frequency: f64,
    pub covariance: f64,
    /// Delta-method standard error that also carries the sampling error of
    /// both marginals.
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrialStats {
    pub method: Method,
    pub trials: usize,
    pub base_seed: u64,
    pub rng: String,
    /// Assignment cost after correction (raw cost for independent rounding).
    pub mean_cost: f64,
    pub cost_std_error: f64,
    /// Cost of the per-vehicle choices before correction.
    pub mean_raw_cost: f64,
    /// Mean of (cost + penalties of unassigned requests), when penalties
    /// were supplied.
    pub mean_penalized_cost: Option<f64>,
    pub penalized_cost_std_error: Option<f64>,
    pub unassigned_fraction_mean: f64,
    pub unassigned_fraction_std_error: f64,
    pub per_request_unassigned_frequency: Vec<f64>,
    /// `coverage_histogram[r][y]`: frequency with which `y` chosen trips
    /// contain `r` before correction. Each row sums to 1.
    pub coverage_histogram: Vec<Vec<f64>>,
    pub indicator_frequency: Vec<IndicatorFrequency>,
    pub pair_covariance: Vec<PairCovariance>,
    /// Fraction of trials with some vehicle holding two or more trips.
    pub vehicle_violation_frequency: f64,
}

impl RoundingTrialStats {
    /// Binomial standard error of a frequency over these trials.
    pub fn binomial_se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Frequency with which request `r` lies in at least `y` chosen trips.
    pub fn coverage_at_least(&self, r: RequestId, y: usize) -> f64 {
        self.coverage_histogram[r].iter().skip(y).sum()
    }
}

/// Supported columns of x, grouped by vehicle.
struct Support {
    cols: Vec<(VehicleId, TripId, f64)>,
    /// Index range of each vehicle's columns in `cols`.
    ranges: Vec<std::ops::Range<usize>>,
    pairs: Vec<(usize, usize)>,
}

impl Support {
    fn new(x: &FractionalSolution, n_vehicles: usize) -> Self {
        let cols: Vec<_> = x
            .values
            .iter()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(&(v, t), &p)| (v, t, p))
            .collect();
        let mut ranges = Vec::with_capacity(n_vehicles);
        let mut pairs = Vec::new();
        let mut start = 0;
        for v in 0..n_vehicles {
            let end = start + cols[start..].iter().take_while(|c| c.0 == v).count();
            for a in start..end {
                for b in a + 1..end {
                    pairs.push((a, b));
                }
            }
            ranges.push(start..end);
            start = end;
        }
        Support {
            cols,
            ranges,
            pairs,
        }
    }

    fn index(&self, v: VehicleId, t: TripId) -> usize {
        let r = self.ranges[v].clone();
        r.start + self.cols[r].partition_point(|c| c.1 < t)
    }
}

#[derive(Clone)]
struct Acc {
    trials: usize,
    cost: f64,
    cost_sq: f64,
    raw_cost: f64,
    penalized: f64,
    penalized_sq: f64,
    unassigned: f64,
    unassigned_sq: f64,
    per_request: Vec<u64>,
    coverage: Vec<Vec<u64>>,
    indicator: Vec<u64>,
    joint: Vec<u64>,
    violations: u64,
}

impl Acc {
    fn new(n_requests: usize, n_cols: usize, n_pairs: usize) -> Self {
        Acc {
            trials: 0,
            cost: 0.0,
            cost_sq: 0.0,
            raw_cost: 0.0,
            penalized: 0.0,
            penalized_sq: 0.0,
            unassigned: 0.0,
            unassigned_sq: 0.0,
            per_request: vec![0; n_requests],
            coverage: vec![vec![0; 2]; n_requests],
            indicator: vec![0; n_cols],
            joint: vec![0; n_pairs],
            violations: 0,
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.trials += o.trials;
        self.cost += o.cost;
        self.cost_sq += o.cost_sq;
        self.raw_cost += o.raw_cost;
        self.penalized += o.penalized;
        self.penalized_sq += o.penalized_sq;
        self.unassigned += o.unassigned;
        self.unassigned_sq += o.unassigned_sq;
        for (a, b) in self.per_request.iter_mut().zip(&o.per_request) {
            *a += b;
        }
        for (a, b) in self.coverage.iter_mut().zip(&o.coverage) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.indicator.iter_mut().zip(&o.indicator) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(&o.joint) {
            *a += b;
        }
        self.violations += o.violations;
    }
}

struct TrialContext<'a> {
    x: &'a FractionalSolution,
    cat: &'a TripCatalog,
    method: Method,
    penalties: Option<&'a [f64]>,
    support: Support,
}

impl TrialContext<'_> {
    fn run(&self, seed: u64, acc: &mut Acc) -> Result<()> {
        let cat = self.cat;
        let n_r = cat.n_requests();
        let mut chosen: Vec<usize> = Vec::new();
        let (final_cost, unassigned, raw_cost) = match self.method {
            Method::Independent => {
                let picks = round_independent(self.x, seed);
                let mut per_vehicle = vec![0u32; cat.n_vehicles()];
                let mut covered = vec![false; n_r];
                let mut cost = 0.0;
                for &(v, t) in &picks {
                    chosen.push(self.support.index(v, t));
                    per_vehicle[v] += 1;
                    cost += cat.cost(t, v).ok_or(Error::Inadmissible { trip: t, vehicle: v })?;
                    cat.trip(t).requests().iter().for_each(|&r| covered[r] = true);
                }
                if per_vehicle.iter().any(|&c| c >= 2) {
                    acc.violations += 1;
                }
                let unassigned: Vec<RequestId> = (0..n_r).filter(|&r| !covered[r]).collect();
                (cost, unassigned, cost)
            }
            Method::Dependent | Method::Deterministic => {
                let raw = if self.method == Method::Dependent {
                    sample_dependent(self.x, cat.n_vehicles(), seed)?
                } else {
                    argmax_choices(self.x, cat.n_vehicles())?
                };
                let mut raw_cost = 0.0;
                for (v, &t) in raw.iter().enumerate() {
                    chosen.push(self.support.index(v, t));
                    raw_cost += cat.cost(t, v).ok_or(Error::Inadmissible { trip: t, vehicle: v })?;
                }
                let a = multiplicity_correction(&raw, cat)?;
                (a.cost, a.unassigned.into_iter().collect(), raw_cost)
            }
        };

        let mut y = vec![0usize; n_r];
        for &c in &chosen {
            let (_, t, _) = self.support.cols[c];
            for &r in cat.trip(t).requests() {
                y[r] += 1;
            }
            acc.indicator[c] += 1;
        }
        for (r, &count) in y.iter().enumerate() {
            let row = &mut acc.coverage[r];
            if row.len() <= count {
                row.resize(count + 1, 0);
            }
            row[count] += 1;
        }
        if !acc.joint.is_empty() {
            let mut set = vec![false; self.support.cols.len()];
            chosen.iter().for_each(|&c| set[c] = true);
            for (k, &(a, b)) in self.support.pairs.iter().enumerate() {
                if set[a] && set[b] {
                    acc.joint[k] += 1;
                }
            }
        }
        for &r in &unassigned {
            acc.per_request[r] += 1;
        }
        let frac = if n_r > 0 {
            unassigned.len() as f64 / n_r as f64
        } else {
            0.0
        };
        acc.trials += 1;
        acc.cost += final_cost;
        acc.cost_sq += final_cost * final_cost;
        acc.raw_cost += raw_cost;
        acc.unassigned += frac;
        acc.unassigned_sq += frac * frac;
        if let Some(p) = self.penalties {
            let pc = final_cost + unassigned.iter().map(|&r| p[r]).sum::<f64>();
            acc.penalized += pc;
            acc.penalized_sq += pc * pc;
        }
        Ok(())
    }
}

fn mean_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Runs `trials` roundings with seeds `base_seed + i` and aggregates them.
pub fn run_trials(
    x: &FractionalSolution,
    cat: &TripCatalog,
    method: Method,
    trials: usize,
    base_seed: u64,
) -> Result<RoundingTrialStats> {
    run_trials_with(x, cat, method, trials, base_seed, None, Execution::default())
}

/// [`run_trials`] with optional per-request penalties (adds the penalized
/// cost to the stats) and an explicit execution mode.
pub fn run_trials_with(
    x: &FractionalSolution,
    cat: &TripCatalog,
    method: Method,
    trials: usize,
    base_seed: u64,
    penalties: Option<&[f64]>,
    mode: Execution,
) -> Result<RoundingTrialStats> {
    if trials < 1 {
        return Err(Error::invariant("trials", "must be >= 1"));
    }
    x.check(cat)?;
    let n_r = cat.n_requests();
    let ctx = TrialContext {
        x,
        cat,
        method,
        penalties,
        support: Support::new(x, cat.n_vehicles()),
    };
    let n_cols = ctx.support.cols.len();
    let n_pairs = ctx.support.pairs.len();
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Result<Acc>> = exec::map_range(mode, chunks, |c| {
        let mut acc = Acc::new(n_r, n_cols, n_pairs);
        for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            ctx.run(base_seed.wrapping_add(i as u64), &mut acc)?;
        }
        Ok(acc)
    });
    let mut acc = Acc::new(n_r, n_cols, n_pairs);
    for p in partial {
        acc.merge(&p?);
    }

    let n = acc.trials as f64;
    let (mean_cost, cost_std_error) = mean_se(acc.cost, acc.cost_sq, acc.trials);
    let (unassigned_fraction_mean, unassigned_fraction_std_error) =
        mean_se(acc.unassigned, acc.unassigned_sq, acc.trials);
    let (mean_penalized_cost, penalized_cost_std_error) = match penalties {
        Some(_) => {
            let (m, s) = mean_se(acc.penalized, acc.penalized_sq, acc.trials);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    let binom = |p: f64| (p * (1.0 - p) / n).sqrt();
    let indicator_frequency = ctx
        .support
        .cols
        .iter()
        .zip(&acc.indicator)
        .map(|(&(vehicle, trip, x), &count)| {
            let f = count as f64 / n;
            IndicatorFrequency {
                vehicle,
                trip,
                x,
                frequency: f,
                std_error: binom(f),
            }
        })
        .collect();
    let pair_covariance = ctx
        .support
        .pairs
        .iter()
        .zip(&acc.joint)
        .map(|(&(a, b), &n11)| {
            let (vehicle, trip_a, x_a) = ctx.support.cols[a];
            let (_, trip_b, x_b) = ctx.support.cols[b];
            let pa = acc.indicator[a] as f64 / n;
            let pb = acc.indicator[b] as f64 / n;
            let pab = n11 as f64 / n;
            let covariance = pab - pa * pb;
            // Cells of (X_a, X_b) and the centered product on each.
            let cells = [
                (pab, (1.0 - pa) * (1.0 - pb)),
                (pa - pab, (1.0 - pa) * -pb),
                (pb - pab, -pa * (1.0 - pb)),
                (1.0 - pa - pb + pab, pa * pb),
            ];
            let var_prod = cells.iter().map(|(f, z)| f * z * z).sum::<f64>() - covariance.powi(2);
            let var = var_prod.max(0.0)
                + pb * pb * pa * (1.0 - pa)
                + pa * pa * pb * (1.0 - pb);
            PairCovariance {
                vehicle,
                trip_a,
                trip_b,
                x_a,
                x_b,
                joint_frequency: pab,
                covariance,
                std_error: (var / n).sqrt(),
            }
        })
        .collect();

    Ok(RoundingTrialStats {
        method,
        trials: acc.trials,
        base_seed,
        rng: RNG_ALGORITHM.to_string(),
        mean_cost,
        cost_std_error,
        mean_raw_cost: acc.raw_cost / n,
        mean_penalized_cost,
        penalized_cost_std_error,
        unassigned_fraction_mean,
        unassigned_fraction_std_error,
        per_request_unassigned_frequency: acc.per_request.iter().map(|&c| c as f64 / n).collect(),
        coverage_histogram: acc
            .coverage
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / n).collect())
            .collect(),
        indicator_frequency,
        pair_covariance,
        vehicle_violation_frequency: acc.violations as f64 / n,
    })
}
