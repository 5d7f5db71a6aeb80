//! LP relaxation of the assignment problem, solved by a dense revised
//! simplex method.
//!
//! Rows are one equality per request (covered exactly once) followed by one
//! equality per vehicle (exactly one trip, possibly empty). Columns are the
//! admissible (trip, vehicle) pairs sorted by (vehicle, trip). The basis
//! inverse is kept explicitly, updated with an elementary row transformation
//! per pivot and recomputed from scratch every [`REFACTOR_EVERY`] pivots.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DualSolution, FractionalSolution, RequestId, TripCatalog, TripId, VehicleId};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
/// Phase-1 objective above which the LP is declared infeasible.
pub const INFEASIBLE_TOL: f64 = 1e-7;
/// Smallest acceptable pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-11;
/// Entries of the pivot column below this are ignored in the ratio test.
const RATIO_TOL: f64 = 1e-9;
pub const REFACTOR_EVERY: usize = 50;
/// Values at or below this are left out of the sparse primal solution.
pub const SUPPORT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub trip: TripId,
    pub vehicle: VehicleId,
    pub cost: f64,
    pub requests: Vec<RequestId>,
}

/// min c·x subject to the request and vehicle rows, x ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardFormLP {
    pub n_requests: usize,
    pub n_vehicles: usize,
    pub columns: Vec<Column>,
}

impl StandardFormLP {
    /// Sorts the columns by (vehicle, trip).
    pub fn new(n_requests: usize, n_vehicles: usize, mut columns: Vec<Column>) -> Self {
        columns.sort_by_key(|c| (c.vehicle, c.trip));
        StandardFormLP {
            n_requests,
            n_vehicles,
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_requests + self.n_vehicles
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn vehicle_row(&self, v: VehicleId) -> usize {
        self.n_requests + v
    }

    /// Row indices with a 1 in column `j`.
    pub fn column_rows(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let c = &self.columns[j];
        c.requests
            .iter()
            .copied()
            .chain(std::iter::once(self.vehicle_row(c.vehicle)))
    }

    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for j in 0..self.n_cols() {
            for i in self.column_rows(j) {
                a[i][j] = 1.0;
            }
        }
        a
    }

    /// Restriction to the columns for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Column) -> bool) -> StandardFormLP {
        StandardFormLP {
            n_requests: self.n_requests,
            n_vehicles: self.n_vehicles,
            columns: self
                .columns
                .iter()
                .enumerate()
                .filter(|(j, c)| keep(*j, c))
                .map(|(_, c)| c.clone())
                .collect(),
        }
    }

    /// CPLEX-style LP text: objective, one equality row per constraint, and
    /// bounds. Variable `x_<trip>_<vehicle>`, rows `req_<r>` and `veh_<v>`.
    pub fn to_lp_format(&self) -> String {
        let var = |c: &Column| format!("x_{}_{}", c.trip, c.vehicle);
        let mut s = String::from("\\ RTV assignment LP relaxation\nMinimize\n obj:");
        for c in &self.columns {
            let _ = write!(s, " + {} {}", c.cost, var(c));
        }
        s.push_str("\nSubject To\n");
        let mut rows: Vec<Vec<String>> = vec![Vec::new(); self.n_rows()];
        for (j, c) in self.columns.iter().enumerate() {
            for i in self.column_rows(j) {
                rows[i].push(var(c));
            }
        }
        for (i, terms) in rows.iter().enumerate() {
            let name = if i < self.n_requests {
                format!("req_{i}")
            } else {
                format!("veh_{}", i - self.n_requests)
            };
            let lhs = if terms.is_empty() {
                "0".to_string()
            } else {
                terms.join(" + ")
            };
            let _ = writeln!(s, " {name}: {lhs} = 1");
        }
        s.push_str("Bounds\n");
        for c in &self.columns {
            let _ = writeln!(s, " 0 <= {} <= 1", var(c));
        }
        s.push_str("End\n");
        s
    }
}

/// One column per admissible (trip, vehicle) pair of the catalog.
pub fn build_lp(cat: &TripCatalog) -> StandardFormLP {
    let mut cols = Vec::new();
    for v in 0..cat.n_vehicles() {
        for a in cat.admissible(v) {
            cols.push(Column {
                trip: a.trip,
                vehicle: v,
                cost: a.cost,
                requests: cat.trip(a.trip).requests().to_vec(),
            });
        }
    }
    StandardFormLP::new(cat.n_requests(), cat.n_vehicles(), cols)
}

/// Which LP the dual is read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DualForm {
    /// Equality rows; y and z are sign-free.
    #[default]
    Equality,
    /// Request rows as coverings (≥ 1), so that y ≥ 0. The optimum equals
    /// the equality optimum whenever the columns are downward closed with
    /// monotone costs; the primal may over-cover requests.
    Covering,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub primal: FractionalSolution,
    pub dual: DualSolution,
    /// Column values indexed like `StandardFormLP::columns`.
    pub column_values: Vec<f64>,
    pub iterations: usize,
    /// Basic variable per row at optimality.
    pub basis: Vec<usize>,
}

pub fn solve_lp(lp: &StandardFormLP) -> Result<LpSolution> {
    solve_lp_with(lp, DualForm::Equality)
}

pub fn solve_lp_with(lp: &StandardFormLP, form: DualForm) -> Result<LpSolution> {
    let mut s = Simplex::new(lp, form);
    s.run()?;
    Ok(s.solution(lp, form))
}

/// Variable layout: structural columns, then one surplus per request row in
/// covering form, then one artificial per row.
struct Simplex {
    m: usize,
    n_struct: usize,
    n_surplus: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    basic: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    phase_one: bool,
    iterations: usize,
    pivots_since_refactor: usize,
    degenerate: usize,
}

impl Simplex {
    fn new(lp: &StandardFormLP, form: DualForm) -> Self {
        let m = lp.n_rows();
        let n_struct = lp.n_cols();
        let n_surplus = match form {
            DualForm::Equality => 0,
            DualForm::Covering => lp.n_requests,
        };
        let mut cols: Vec<Vec<(usize, f64)>> = (0..n_struct)
            .map(|j| lp.column_rows(j).map(|i| (i, 1.0)).collect())
            .collect();
        let mut cost: Vec<f64> = lp.columns.iter().map(|c| c.cost).collect();
        for r in 0..n_surplus {
            cols.push(vec![(r, -1.0)]);
            cost.push(0.0);
        }
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
        }
        let first_art = n_struct + n_surplus;
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; cols.len()];
        is_basic[first_art..].iter_mut().for_each(|b| *b = true);
        Simplex {
            m,
            n_struct,
            n_surplus,
            cols,
            cost,
            basic: (first_art..first_art + m).collect(),
            is_basic,
            binv,
            xb: vec![1.0; m],
            phase_one: true,
            iterations: 0,
            pivots_since_refactor: 0,
            degenerate: 0,
        }
    }

    fn first_artificial(&self) -> usize {
        self.n_struct + self.n_surplus
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial()
    }

    fn phase_cost(&self, j: usize) -> f64 {
        if self.phase_one {
            if self.is_artificial(j) {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &b) in self.basic.iter().enumerate() {
            let cb = self.phase_cost(b);
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (p, &x) in pi.iter_mut().zip(row) {
                    *p += cb * x;
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64]) -> f64 {
        self.phase_cost(j) - self.cols[j].iter().map(|&(i, a)| pi[i] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, out) in alpha.iter_mut().enumerate() {
                *out += self.binv[i * m + r] * a;
            }
        }
        alpha
    }

    fn objective(&self) -> f64 {
        self.basic
            .iter()
            .zip(&self.xb)
            .map(|(&b, &x)| self.phase_cost(b) * x)
            .sum()
    }

    fn pivot(&mut self, p: usize, entering: usize, alpha: &[f64]) -> Result<()> {
        let m = self.m;
        let piv = alpha[p];
        if piv.abs() < PIVOT_TOL {
            return Err(Error::Numerical(format!("pivot magnitude {piv:e}")));
        }
        let theta = self.xb[p] / piv;
        for i in 0..m {
            if i != p {
                self.xb[i] -= theta * alpha[i];
                if self.xb[i].abs() < FEAS_TOL * 1e-3 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[p] = theta;
        let prow: Vec<f64> = self.binv[p * m..(p + 1) * m].iter().map(|x| x / piv).collect();
        for i in 0..m {
            if i == p || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (x, &pr) in row.iter_mut().zip(&prow) {
                *x -= f * pr;
            }
        }
        self.binv[p * m..(p + 1) * m].copy_from_slice(&prow);
        self.is_basic[self.basic[p]] = false;
        self.is_basic[entering] = true;
        self.basic[p] = entering;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes B⁻¹ by Gauss-Jordan elimination with partial pivoting and
    /// x_B = B⁻¹·1.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basic.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (pr, pv) = (c..m)
                .map(|r| (r, b[r * m + c].abs()))
                .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv < PIVOT_TOL {
                return Err(Error::Numerical("singular basis".into()));
            }
            if pr != c {
                for k in 0..m {
                    b.swap(pr * m + k, c * m + k);
                    inv.swap(pr * m + k, c * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = b[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        b[r * m + k] -= f * b[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            let x: f64 = self.binv[i * m..(i + 1) * m].iter().sum();
            self.xb[i] = if x.abs() < FEAS_TOL * 1e-3 { 0.0 } else { x };
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Runs the current phase to optimality.
    fn optimize(&mut self) -> Result<()> {
        let n_total = self.cols.len();
        let bland_after = 5 * (self.m + self.n_struct);
        let max_iter = 50 * (self.m + n_total) + 1000;
        self.degenerate = 0;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Numerical("simplex iteration limit".into()));
            }
            let bland = self.degenerate > bland_after;
            let pi = self.duals();
            let mut entering = None;
            let mut best = -OPT_TOL;
            for j in 0..n_total {
                if self.is_basic[j] || (!self.phase_one && self.is_artificial(j)) {
                    continue;
                }
                let d = self.reduced_cost(j, &pi);
                if d < best {
                    entering = Some(j);
                    best = d;
                    if bland {
                        break;
                    }
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };
            let alpha = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if alpha[i] <= RATIO_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / alpha[i];
                let better = match leave {
                    None => true,
                    Some((p, r)) => {
                        if ratio < r - 1e-12 {
                            true
                        } else if ratio <= r + 1e-12 {
                            if bland {
                                self.basic[i] < self.basic[p]
                            } else {
                                alpha[i] > alpha[p]
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((p, ratio)) = leave else {
                return Err(Error::Numerical("unbounded direction".into()));
            };
            if ratio <= 1e-12 {
                self.degenerate += 1;
            }
            self.pivot(p, q, &alpha)?;
            self.iterations += 1;
        }
    }

    /// Pivots basic artificials out where a non-artificial column has a
    /// nonzero entry in their row; the rest sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        for p in 0..m {
            if !self.is_artificial(self.basic[p]) {
                continue;
            }
            let row = self.binv[p * m..(p + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial() {
                if self.is_basic[j] {
                    continue;
                }
                let rho: f64 = self.cols[j].iter().map(|&(i, a)| row[i] * a).sum();
                if rho.abs() > 1e-7 && best.is_none_or(|(_, b)| rho.abs() > b) {
                    best = Some((j, rho.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.pivot(p, j, &alpha)?;
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        self.optimize()?;
        if self.objective() > INFEASIBLE_TOL {
            return Err(Error::Infeasible);
        }
        self.drive_out_artificials()?;
        self.phase_one = false;
        self.refactor()?;
        self.optimize()
    }

    fn solution(&self, lp: &StandardFormLP, form: DualForm) -> LpSolution {
        let mut column_values = vec![0.0; self.n_struct];
        for (i, &b) in self.basic.iter().enumerate() {
            if b < self.n_struct {
                column_values[b] = self.xb[i].clamp(0.0, 1.0);
            }
        }
        let mut primal = FractionalSolution::default();
        for (j, &x) in column_values.iter().enumerate() {
            if x > SUPPORT_TOL {
                let c = &lp.columns[j];
                primal.values.insert((c.vehicle, c.trip), x);
                primal.objective += c.cost * x;
            }
        }
        let pi = self.duals();
        let mut y: Vec<f64> = pi[..lp.n_requests].to_vec();
        if form == DualForm::Covering {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let z: Vec<f64> = pi[lp.n_requests..].iter().map(|p| -p).collect();
        let objective = y.iter().sum::<f64>() - z.iter().sum::<f64>();
        debug_assert!(
            objective <= primal.objective + 1e-6 * (1.0 + primal.objective.abs()),
            "weak duality: dual {objective} > primal {}",
            primal.objective
        );
        LpSolution {
            primal,
            dual: DualSolution { y, z, objective },
            column_values,
            iterations: self.iterations,
            basis: self.basic.clone(),
        }
    }
}

/// Distribution of the nonzero values of a fractional solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportHistogram {
    /// Equal-width bins over (0, 1]; a value of exactly 1 lands in the last bin.
    pub counts: Vec<usize>,
    pub supported: usize,
    pub non_integral: usize,
    /// Share of supported values within 1e-6 of 1.
    pub integral_fraction: f64,
    /// Share of non-integral supported values within 1e-6 of 1/2 (0 when
    /// every supported value is integral).
    pub half_integral_fraction: f64,
}

pub fn support_histogram(x: &FractionalSolution, bins: usize) -> Result<SupportHistogram> {
    if bins < 2 {
        return Err(Error::invariant("bins", "must be >= 2"));
    }
    let mut counts = vec![0; bins];
    let (mut supported, mut integral, mut half) = (0usize, 0usize, 0usize);
    for &v in x.values.values() {
        if v <= SUPPORT_TOL {
            continue;
        }
        supported += 1;
        counts[((v * bins as f64).ceil() as usize).clamp(1, bins) - 1] += 1;
        if (v - 1.0).abs() <= 1e-6 {
            integral += 1;
        } else if (v - 0.5).abs() <= 1e-6 {
            half += 1;
        }
    }
    let non_integral = supported - integral;
    Ok(SupportHistogram {
        counts,
        supported,
        non_integral,
        integral_fraction: if supported > 0 {
            integral as f64 / supported as f64
        } else {
            1.0
        },
        half_integral_fraction: if non_integral > 0 {
            half as f64 / non_integral as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Admissible, Trip};

    fn single(cost: f64) -> TripCatalog {
        TripCatalog::new(
            1,
            vec![Trip::empty(), Trip::new([0])],
            vec![vec![
                Admissible { trip: 0, cost: 0.0 },
                Admissible { trip: 1, cost },
            ]],
        )
        .unwrap()
    }

    #[test]
    fn minimal_instance_shape() {
        let lp = build_lp(&single(5.0));
        assert_eq!((lp.n_rows(), lp.n_cols()), (2, 2));
        assert_eq!(lp.dense_matrix(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn forced_single_column() {
        let sol = solve_lp(&build_lp(&single(5.0))).unwrap();
        assert!((sol.primal.objective - 5.0).abs() < 1e-9);
        assert!((sol.primal.get(1, 0) - 1.0).abs() < 1e-9);
        assert!((sol.dual.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn uncoverable_request_is_infeasible() {
        let cat = TripCatalog::new(
            2,
            vec![Trip::empty(), Trip::new([0])],
            vec![vec![
                Admissible { trip: 0, cost: 0.0 },
                Admissible { trip: 1, cost: 1.0 },
            ]],
        )
        .unwrap();
        assert!(matches!(solve_lp(&build_lp(&cat)), Err(Error::Infeasible)));
    }

    #[test]
    fn histogram_counts() {
        let mut x = FractionalSolution::default();
        for (i, v) in [1.0, 0.5, 0.25, 0.25].into_iter().enumerate() {
            x.values.insert((i, 0), v);
        }
        let h = support_histogram(&x, 4).unwrap();
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
        assert!((h.integral_fraction - 0.25).abs() < 1e-12);
        assert!((h.half_integral_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!(support_histogram(&x, 1).is_err());
    }

    #[test]
    fn integral_histogram() {
        let mut x = FractionalSolution::default();
        x.values.insert((0, 1), 1.0);
        x.values.insert((1, 0), 1.0);
        assert_eq!(support_histogram(&x, 10).unwrap().integral_fraction, 1.0);
    }

    #[test]
    fn lp_format_lists_every_row() {
        let text = build_lp(&single(5.0)).to_lp_format();
        assert!(text.contains("req_0: x_1_0 = 1"));
        assert!(text.contains("veh_0: x_0_0 + x_1_0 = 1"));
        assert!(text.ends_with("End\n"));
    }
}
