//! Exact ILP solver: LP-based branch and bound, plus a brute-force
//! enumeration oracle for small instances.
//!
//! Branching fixes a column to 1 or 0. Fixing (t, v) to 1 removes every
//! other column of v and every column sharing a request with t, so each node
//! LP keeps the structure of the root LP.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::time::{Duration, Instant};

use log::debug;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, StandardFormLP};
use crate::model::{Assignment, TripCatalog, TripId, EMPTY_TRIP};

pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Nodes whose bound is within this of the incumbent are pruned.
const PRUNE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct MipResult {
    pub assignment: Assignment,
    pub objective: f64,
    pub root_bound: f64,
    /// Smallest bound over unexplored nodes, or the objective when proven.
    pub best_bound: f64,
    pub proven_optimal: bool,
    pub nodes: usize,
}

impl MipResult {
    pub fn gap(&self) -> f64 {
        self.objective - self.best_bound
    }
}

#[derive(Clone, Debug)]
struct Node {
    ones: Vec<usize>,
    zeros: Vec<usize>,
    bound: f64,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap order: smaller bound first, then older node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Builds an assignment from the columns chosen at value 1.
fn assignment_from_columns(lp: &StandardFormLP, chosen: &[usize]) -> Assignment {
    let mut by_vehicle = vec![EMPTY_TRIP; lp.n_vehicles];
    let mut covered = vec![false; lp.n_requests];
    let mut cost = 0.0;
    for &j in chosen {
        let c = &lp.columns[j];
        by_vehicle[c.vehicle] = c.trip;
        cost += c.cost;
        for &r in &c.requests {
            covered[r] = true;
        }
    }
    // Vehicles left without a chosen column take their empty-trip column.
    for (v, t) in by_vehicle.iter().enumerate() {
        if *t == EMPTY_TRIP && !chosen.iter().any(|&j| lp.columns[j].vehicle == v) {
            if let Some(c) = lp
                .columns
                .iter()
                .find(|c| c.vehicle == v && c.trip == EMPTY_TRIP)
            {
                cost += c.cost;
            }
        }
    }
    Assignment {
        by_vehicle,
        cost,
        unassigned: (0..lp.n_requests).filter(|&r| !covered[r]).collect(),
    }
}

/// Restricted LP of a node and the map from its columns to root columns.
fn node_lp(lp: &StandardFormLP, node: &Node) -> (StandardFormLP, Vec<usize>) {
    let mut vehicle_fixed = vec![None; lp.n_vehicles];
    let mut request_fixed = vec![false; lp.n_requests];
    for &j in &node.ones {
        let c = &lp.columns[j];
        vehicle_fixed[c.vehicle] = Some(j);
        for &r in &c.requests {
            request_fixed[r] = true;
        }
    }
    let zeros: BTreeSet<usize> = node.zeros.iter().copied().collect();
    let mut map = Vec::new();
    let sub = lp.filter(|j, c| {
        let keep = if zeros.contains(&j) {
            false
        } else if let Some(f) = vehicle_fixed[c.vehicle] {
            f == j
        } else {
            !c.requests.iter().any(|&r| request_fixed[r])
        };
        if keep {
            map.push(j);
        }
        keep
    });
    (sub, map)
}

/// Branch and bound: depth-first dives (fix-to-1 child first) until the
/// first incumbent, then best-bound node selection. Branches on the most
/// fractional column, ties by lowest column index.
pub fn solve_ilp(lp: &StandardFormLP, time_limit: Option<Duration>) -> Result<MipResult> {
    let started = Instant::now();
    let mut incumbent: Option<(f64, Vec<usize>)> = None;
    let mut stack: Vec<Node> = Vec::new();
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    stack.push(Node {
        ones: vec![],
        zeros: vec![],
        bound: f64::NEG_INFINITY,
        seq,
    });

    loop {
        let node = if incumbent.is_none() {
            stack.pop()
        } else {
            if !stack.is_empty() {
                heap.extend(stack.drain(..));
            }
            heap.pop()
        };
        let Some(node) = node else { break };
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - PRUNE_TOL {
                continue;
            }
        }
        if time_limit.is_some_and(|l| started.elapsed() >= l) {
            let open_bound = heap
                .iter()
                .chain(stack.iter())
                .map(|n| n.bound)
                .fold(node.bound, f64::min);
            let Some((obj, cols)) = incumbent else {
                return Err(Error::TimeLimit);
            };
            return Ok(MipResult {
                assignment: assignment_from_columns(lp, &cols),
                objective: obj,
                root_bound,
                best_bound: open_bound.min(obj),
                proven_optimal: false,
                nodes,
            });
        }

        nodes += 1;
        let (sub, map) = node_lp(lp, &node);
        let sol = match solve_lp(&sub) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        let bound = sol.primal.objective;
        if nodes == 1 {
            root_bound = bound;
        }
        debug_assert!(bound >= node.bound - 1e-6, "child bound below parent bound");
        if let Some((best, _)) = &incumbent {
            if bound >= best - PRUNE_TOL {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for (k, &x) in sol.column_values.iter().enumerate() {
            let frac = x.min(1.0 - x);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((map[k], frac));
            }
        }
        match branch {
            None => {
                let chosen: Vec<usize> = sol
                    .column_values
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0.5)
                    .map(|(k, _)| map[k])
                    .collect();
                let a = assignment_from_columns(lp, &chosen);
                debug!("incumbent {} at node {nodes}", a.cost);
                if incumbent.as_ref().is_none_or(|(b, _)| a.cost < *b) {
                    incumbent = Some((a.cost, chosen));
                }
            }
            Some((j, _)) => {
                let mut zero = node.clone();
                zero.zeros.push(j);
                zero.bound = bound;
                seq += 1;
                zero.seq = seq;
                let mut one = node;
                one.ones.push(j);
                one.bound = bound;
                seq += 1;
                one.seq = seq;
                if incumbent.is_none() {
                    stack.push(zero);
                    stack.push(one);
                } else {
                    heap.push(one);
                    heap.push(zero);
                }
            }
        }
    }

    let (objective, cols) = incumbent.ok_or(Error::Infeasible)?;
    Ok(MipResult {
        assignment: assignment_from_columns(lp, &cols),
        objective,
        root_bound,
        best_bound: objective,
        proven_optimal: true,
        nodes,
    })
}

pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub assignment: Assignment,
    /// Assignment cost plus the penalties of unassigned requests.
    pub objective: f64,
}

/// Enumerates every vehicle → trip combination. Without penalties every
/// request must be covered exactly once; with penalties an uncovered request
/// r costs `penalties[r]`. Ties keep the lexicographically smallest trip-id
/// vector.
pub fn brute_force_opt(
    cat: &TripCatalog,
    penalties: Option<&[f64]>,
) -> Result<BruteForceResult> {
    let size: f64 = (0..cat.n_vehicles())
        .map(|v| cat.admissible(v).len() as f64)
        .product();
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceOverflow {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    struct Search<'a> {
        cat: &'a TripCatalog,
        penalties: Option<&'a [f64]>,
        choice: Vec<TripId>,
        covered: Vec<bool>,
        best: Option<(f64, Vec<TripId>)>,
    }

    impl Search<'_> {
        fn go(&mut self, v: usize, cost: f64) {
            if v == self.cat.n_vehicles() {
                let mut total = cost;
                for (r, &c) in self.covered.iter().enumerate() {
                    if !c {
                        match self.penalties {
                            Some(p) => total += p[r],
                            None => return,
                        }
                    }
                }
                if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                    self.best = Some((total, self.choice.clone()));
                }
                return;
            }
            for a in self.cat.admissible(v) {
                let reqs = self.cat.trip(a.trip).requests();
                if reqs.iter().any(|&r| self.covered[r]) {
                    continue;
                }
                reqs.iter().for_each(|&r| self.covered[r] = true);
                self.choice.push(a.trip);
                self.go(v + 1, cost + a.cost);
                self.choice.pop();
                reqs.iter().for_each(|&r| self.covered[r] = false);
            }
        }
    }

    let mut s = Search {
        cat,
        penalties,
        choice: Vec::with_capacity(cat.n_vehicles()),
        covered: vec![false; cat.n_requests()],
        best: None,
    };
    s.go(0, 0.0);
    let (objective, choice) = s.best.ok_or(Error::Infeasible)?;
    Ok(BruteForceResult {
        assignment: Assignment::from_choices(choice, cat)?,
        objective,
    })
}
