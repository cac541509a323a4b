//! Revised bounded-variable simplex for weighted L1 regression.
//!
//! For columns phi_j (one per data row), labels y_j and weights w_j > 0 the
//! regression problem  min_c sum_j w_j |y_j - <c, phi_j>|  has the dual
//!
//!   max  sum_j y_j lambda_j   s.t.  sum_j lambda_j phi_j = 0,  -w_j <= lambda_j <= w_j,
//!
//! which is solved here in minimization form. The simplex multipliers of the
//! equality rows are minus the optimal regression coefficients, and
//! lambda_j / w_j is a dual certificate with sup norm at most 1.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Access to the constraint matrix by columns.
pub trait ColumnSource<T: Scalar>: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Writes column j into `out` (length n_rows).
    fn column(&self, j: usize, out: &mut [T]);
    /// out_j = <pi, a_j> for every column.
    fn price(&self, pi: &[T], out: &mut [T]);
    /// out = sum_j coeffs_j a_j.
    fn combine(&self, coeffs: &[T], out: &mut [T]);
}

/// Dense row-major matrix source.
#[derive(Clone, Debug)]
pub struct DenseColumns<T> {
    rows: usize,
    cols: usize,
    /// data[i * cols + j]
    data: Vec<T>,
}

impl<T: Scalar> DenseColumns<T> {
    /// Builds from per-column vectors (each of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Result<Self> {
        let cols = columns.len();
        let mut data = vec![T::zero(); rows * cols];
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Domain(format!(
                    "column {j} has length {} instead of {rows}",
                    c.len()
                )));
            }
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = v.clone();
            }
        }
        Ok(DenseColumns { rows, cols, data })
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> ColumnSource<T> for DenseColumns<T> {
    fn n_rows(&self) -> usize {
        self.rows
    }
    fn n_cols(&self) -> usize {
        self.cols
    }
    fn column(&self, j: usize, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.get(i, j).clone();
        }
    }
    fn price(&self, pi: &[T], out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (i, p) in pi.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o = o.clone() + p.clone() * a.clone();
            }
        }
    }
    fn combine(&self, coeffs: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = T::zero();
            for (c, a) in coeffs.iter().zip(row) {
                if !c.is_zero() {
                    acc = acc + c.clone() * a.clone();
                }
            }
            *o = acc;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::IterationLimit => "iteration-limit",
        }
    }
}

/// Primal: two-phase primal simplex on the bounded dual (Bland in exact mode).
/// DualLongStep: dual simplex on the same problem with a bound-flipping ratio
/// test; every basis is dual feasible after choosing bounds by reduced-cost
/// sign, so it needs no first phase and passes many breakpoints per pivot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Primal,
    DualLongStep,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub method: Method,
    pub max_iterations: usize,
    /// Float mode: rebuild the basis inverse after this many pivots.
    pub refactor_every: usize,
    /// Float mode: consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Float mode: reduced-cost and pivot tolerances.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            method: Method::Primal,
            max_iterations: 200_000,
            refactor_every: 500,
            degenerate_limit: 50,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DualSolution<T> {
    pub status: Status,
    /// Regression coefficients (minus the simplex multipliers).
    pub coefficients: Vec<T>,
    /// Optimal lambda_j.
    pub lambda: Vec<T>,
    /// sum_j y_j lambda_j.
    pub dual_objective: T,
    pub iterations: usize,
    /// Constraint rows found linearly dependent on the others.
    pub redundant_rows: Vec<usize>,
    pub bland_pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Basic,
    Lower,
    Upper,
}

struct Solver<'a, T: Scalar, S: ColumnSource<T>> {
    src: &'a S,
    p: usize,
    ncols: usize,
    lo: Vec<T>,
    hi: Vec<T>,
    x: Vec<T>,
    place: Vec<Place>,
    basis: Vec<usize>,
    /// Row-major p x p basis inverse.
    binv: Vec<T>,
    art_sign: Vec<T>,
    opts: SimplexOptions,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland_pivots: usize,
    /// Phase-two costs, kept for the dual method's refactorizations.
    dual_cost: Vec<T>,
    /// Squared row norms of B^-1 (dual steepest-edge weights), maintained
    /// by the dual method only.
    row_norms: Vec<T>,
}

enum Step {
    Optimal,
    Pivoted,
}

impl<'a, T: Scalar, S: ColumnSource<T>> Solver<'a, T, S> {
    fn total(&self) -> usize {
        self.ncols + self.p
    }

    fn column_of(&self, j: usize, out: &mut [T]) {
        if j < self.ncols {
            self.src.column(j, out);
        } else {
            for o in out.iter_mut() {
                *o = T::zero();
            }
            let i = j - self.ncols;
            out[i] = self.art_sign[i].clone();
        }
    }

    fn binv_row(&self, r: usize) -> &[T] {
        &self.binv[r * self.p..(r + 1) * self.p]
    }

    fn ftran(&self, a: &[T]) -> Vec<T> {
        (0..self.p).map(|i| T::dot(self.binv_row(i), a)).collect()
    }

    /// pi = c_B^T B^-1.
    fn multipliers(&self, cost: &[T]) -> Vec<T> {
        let mut pi = vec![T::zero(); self.p];
        for (i, &b) in self.basis.iter().enumerate() {
            let c = &cost[b];
            if !c.is_zero() {
                T::sub_scaled(&mut pi, &-c.clone(), self.binv_row(i));
            }
        }
        pi
    }

    fn reduced_costs(&self, cost: &[T], pi: &[T]) -> Vec<T> {
        let mut d = vec![T::zero(); self.total()];
        self.src.price(pi, &mut d[..self.ncols]);
        for j in 0..self.ncols {
            d[j] = cost[j].clone() - d[j].clone();
        }
        for i in 0..self.p {
            let j = self.ncols + i;
            d[j] = cost[j].clone() - pi[i].clone() * self.art_sign[i].clone();
        }
        d
    }

    fn use_bland(&self) -> bool {
        T::EXACT || self.degenerate_run >= self.opts.degenerate_limit
    }

    fn choose_entering(&self, d: &[T]) -> Option<usize> {
        let tol = T::tolerance(self.opts.optimality_tol);
        let bland = self.use_bland();
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.total() {
            if self.place[j] == Place::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let gain = match self.place[j] {
                Place::Lower if d[j] < -tol.clone() => -d[j].clone(),
                Place::Upper if d[j] > tol => d[j].clone(),
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.as_ref().is_none_or(|(_, g)| gain > *g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, alpha: &[T]) {
        let p = self.p;
        let piv = alpha[r].clone();
        for k in 0..p {
            let v = self.binv[r * p + k].clone() / piv.clone();
            self.binv[r * p + k] = v;
        }
        let row_r: Vec<T> = self.binv_row(r).to_vec();
        for (i, f) in alpha.iter().enumerate() {
            if i == r || f.is_zero() {
                continue;
            }
            let row = &mut self.binv[i * p..(i + 1) * p];
            if self.row_norms.is_empty() {
                T::sub_scaled(row, f, &row_r);
            } else {
                self.row_norms[i] = T::sub_scaled_norm(row, f, &row_r);
            }
        }
        if !self.row_norms.is_empty() {
            self.row_norms[r] = T::dot(&row_r, &row_r);
        }
    }

    fn refresh_row_norms(&mut self) {
        if !self.row_norms.is_empty() {
            self.row_norms = (0..self.p)
                .map(|i| T::dot(self.binv_row(i), self.binv_row(i)))
                .collect();
        }
    }

    /// One iteration on the given cost vector.
    fn iterate(&mut self, cost: &[T]) -> Result<Step> {
        let pi = self.multipliers(cost);
        let d = self.reduced_costs(cost, &pi);
        let Some(q) = self.choose_entering(&d) else {
            return Ok(Step::Optimal);
        };
        let mut a = vec![T::zero(); self.p];
        self.column_of(q, &mut a);
        let alpha = self.ftran(&a);
        // entering moves up from its lower bound or down from its upper bound
        let up = self.place[q] == Place::Lower;
        let ptol = T::tolerance(self.opts.pivot_tol);
        let bland = self.use_bland();
        let mut step = self.hi[q].clone() - self.lo[q].clone();
        let mut leave: Option<usize> = None;
        for (i, ai) in alpha.iter().enumerate() {
            // rate of change of basic i per unit step
            let rate = if up { -ai.clone() } else { ai.clone() };
            let b = self.basis[i];
            let limit = if rate < -ptol.clone() {
                (self.x[b].clone() - self.lo[b].clone()) / (-rate.clone())
            } else if rate > ptol {
                (self.hi[b].clone() - self.x[b].clone()) / rate.clone()
            } else {
                continue;
            };
            let limit = if limit.is_negative() { T::zero() } else { limit };
            let better = match &leave {
                _ if limit < step => true,
                None => false,
                Some(l) if limit == step => {
                    if bland {
                        self.basis[i] < self.basis[*l]
                    } else {
                        alpha[i].abs() > alpha[*l].abs()
                    }
                }
                _ => false,
            };
            if better {
                step = limit;
                leave = Some(i);
            }
        }
        if step.is_zero() {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        if bland {
            self.bland_pivots += 1;
        }
        let signed = if up { step.clone() } else { -step.clone() };
        self.x[q] = self.x[q].clone() + signed.clone();
        for (i, ai) in alpha.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            let b = self.basis[i];
            self.x[b] = self.x[b].clone() - signed.clone() * ai.clone();
        }
        self.iterations += 1;
        match leave {
            None => {
                // bound flip
                self.place[q] = if up { Place::Upper } else { Place::Lower };
                self.x[q] = if up { self.hi[q].clone() } else { self.lo[q].clone() };
            }
            Some(r) => {
                let b = self.basis[r];
                let rate = if up { -alpha[r].clone() } else { alpha[r].clone() };
                if rate.is_negative() {
                    self.place[b] = Place::Lower;
                    self.x[b] = self.lo[b].clone();
                } else {
                    self.place[b] = Place::Upper;
                    self.x[b] = self.hi[b].clone();
                }
                self.basis[r] = q;
                self.place[q] = Place::Basic;
                self.pivot(r, &alpha);
                self.since_refactor += 1;
                if !T::EXACT && self.since_refactor >= self.opts.refactor_every {
                    self.refactor()?;
                }
            }
        }
        Ok(Step::Pivoted)
    }

    /// Rebuilds B^-1 by Gauss-Jordan elimination and recomputes the basic values.
    fn refactor(&mut self) -> Result<()> {
        let p = self.p;
        let mut m = vec![T::zero(); p * p];
        let mut col = vec![T::zero(); p];
        for (i, &b) in self.basis.iter().enumerate() {
            self.column_of(b, &mut col);
            for k in 0..p {
                m[k * p + i] = col[k].clone();
            }
        }
        let mut inv = vec![T::zero(); p * p];
        for i in 0..p {
            inv[i * p + i] = T::one();
        }
        for c in 0..p {
            let mut best = c;
            for r in c + 1..p {
                if m[r * p + c].abs() > m[best * p + c].abs() {
                    best = r;
                }
            }
            if m[best * p + c].is_zero() {
                return Err(Error::Inconsistency("singular basis during refactorization".into()));
            }
            if best != c {
                for k in 0..p {
                    m.swap(c * p + k, best * p + k);
                    inv.swap(c * p + k, best * p + k);
                }
            }
            let piv = m[c * p + c].clone();
            for k in 0..p {
                m[c * p + k] = m[c * p + k].clone() / piv.clone();
                inv[c * p + k] = inv[c * p + k].clone() / piv.clone();
            }
            // row c is already zero left of column c
            let m_row: Vec<T> = m[c * p + c..(c + 1) * p].to_vec();
            let inv_row: Vec<T> = inv[c * p..(c + 1) * p].to_vec();
            for r in 0..p {
                if r == c || m[r * p + c].is_zero() {
                    continue;
                }
                let f = m[r * p + c].clone();
                T::sub_scaled(&mut m[r * p + c..(r + 1) * p], &f, &m_row);
                T::sub_scaled(&mut inv[r * p..(r + 1) * p], &f, &inv_row);
            }
        }
        self.binv = inv;
        self.refresh_row_norms();
        // x_B = -B^-1 (N x_N); the right-hand side is zero
        let mut coeffs = vec![T::zero(); self.ncols];
        for j in 0..self.ncols {
            if self.place[j] != Place::Basic {
                coeffs[j] = self.x[j].clone();
            }
        }
        let mut rhs = vec![T::zero(); p];
        self.src.combine(&coeffs, &mut rhs);
        for i in 0..p {
            let j = self.ncols + i;
            if self.place[j] != Place::Basic {
                rhs[i] = rhs[i].clone() + self.art_sign[i].clone() * self.x[j].clone();
            }
        }
        let xb = self.ftran(&rhs);
        for (i, v) in xb.into_iter().enumerate() {
            let b = self.basis[i];
            self.x[b] = -v;
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, cost: &[T]) -> Result<bool> {
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Ok(false);
            }
            if let Step::Optimal = self.iterate(cost)? {
                return Ok(true);
            }
        }
    }

    /// Pivots zero-valued basic artificials out; rows where that is impossible
    /// are linearly dependent and keep their artificial fixed at zero.
    fn drive_out_artificials(&mut self) -> Vec<usize> {
        let tol = T::tolerance(self.opts.pivot_tol);
        let mut redundant = Vec::new();
        let mut row_prices = vec![T::zero(); self.ncols];
        for r in 0..self.p {
            if self.basis[r] < self.ncols {
                continue;
            }
            let rho = self.binv_row(r).to_vec();
            self.src.price(&rho, &mut row_prices);
            let mut pick: Option<usize> = None;
            for j in 0..self.ncols {
                if self.place[j] == Place::Basic {
                    continue;
                }
                if row_prices[j].abs() > tol {
                    let better = match pick {
                        None => true,
                        Some(k) => !T::EXACT && row_prices[j].abs() > row_prices[k].abs(),
                    };
                    if better {
                        pick = Some(j);
                        if T::EXACT {
                            break;
                        }
                    }
                }
            }
            match pick {
                Some(q) => {
                    let mut a = vec![T::zero(); self.p];
                    self.column_of(q, &mut a);
                    let alpha = self.ftran(&a);
                    let b = self.basis[r];
                    self.place[b] = Place::Lower;
                    self.x[b] = T::zero();
                    self.basis[r] = q;
                    self.place[q] = Place::Basic;
                    self.pivot(r, &alpha);
                }
                None => redundant.push(self.basis[r] - self.ncols),
            }
        }
        redundant
    }
}

impl<'a, T: Scalar, S: ColumnSource<T>> Solver<'a, T, S> {
    fn fresh_reduced_costs(&self, cost: &[T]) -> Vec<T> {
        let pi = self.multipliers(cost);
        self.reduced_costs(cost, &pi)
    }

    /// Basic row to leave: the largest steepest-edge violation, or the smallest
    /// variable index under Bland's rule. Returns (row, violation); the
    /// violation is positive above the upper bound.
    fn dual_leaving(&self, tol: &T) -> Option<(usize, T)> {
        let bland = self.use_bland();
        let mut best: Option<(usize, T)> = None;
        for (i, &b) in self.basis.iter().enumerate() {
            let delta = if self.x[b] < self.lo[b].clone() - tol.clone() {
                self.x[b].clone() - self.lo[b].clone()
            } else if self.x[b] > self.hi[b].clone() + tol.clone() {
                self.x[b].clone() - self.hi[b].clone()
            } else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((k, v)) => {
                    if bland {
                        b < self.basis[*k]
                    } else {
                        // steepest edge: largest violation^2 / ||e_i B^-1||^2
                        delta.clone() * delta.clone() * self.row_norms[*k].clone()
                            > v.clone() * v.clone() * self.row_norms[i].clone()
                    }
                }
            };
            if better {
                best = Some((i, delta));
            }
        }
        best
    }

    /// One dual iteration. Returns false when the basis is primal feasible.
    fn dual_iterate(&mut self, d: &mut [T]) -> Result<bool> {
        let ftol = T::tolerance(1e-9);
        let Some((r, delta)) = self.dual_leaving(&ftol) else {
            return Ok(false);
        };
        let above = delta.is_positive();
        let bland = self.use_bland();
        let ptol = T::tolerance(self.opts.pivot_tol);
        let rho = self.binv_row(r).to_vec();
        let mut row = vec![T::zero(); self.ncols];
        self.src.price(&rho, &mut row);
        // breakpoints t_j at which nonbasic j would lose dual feasibility
        let mut cands: Vec<(T, usize)> = Vec::new();
        for (j, a) in row.iter().enumerate() {
            if self.place[j] == Place::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let a = if above { a.clone() } else { -a.clone() };
            let ok = match self.place[j] {
                Place::Lower => a > ptol,
                Place::Upper => a < -ptol.clone(),
                Place::Basic => false,
            };
            if !ok {
                continue;
            }
            let t = d[j].clone() / a;
            cands.push((if t.is_negative() { T::zero() } else { t }, j));
        }
        if cands.is_empty() {
            return Err(Error::Inconsistency(
                "dual simplex found no entering column; the bounded problem is always feasible".into(),
            ));
        }
        let order = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    if bland {
                        a.1.cmp(&b.1)
                    } else {
                        row[b.1]
                            .abs()
                            .partial_cmp(&row[a.1].abs())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    }
                })
        };
        let mut flips = Vec::new();
        let q = if bland {
            cands.iter().min_by(|a, b| order(a, b)).unwrap().1
        } else {
            // pass breakpoints in order while the dual slope stays positive;
            // only a short prefix is ever needed, so order it block by block
            let mut slope = delta.abs();
            let mut rest: &mut [(T, usize)] = &mut cands;
            let mut chosen = None;
            'outer: while !rest.is_empty() {
                let take = BREAKPOINT_BLOCK.min(rest.len());
                if take < rest.len() {
                    rest.select_nth_unstable_by(take - 1, order);
                }
                let (head, tail) = rest.split_at_mut(take);
                head.sort_by(order);
                let last_block = tail.is_empty();
                for (k, (_, j)) in head.iter().enumerate() {
                    let next = slope.clone() - row[*j].abs() * (self.hi[*j].clone() - self.lo[*j].clone());
                    if !next.is_positive() || (last_block && k + 1 == take) {
                        chosen = Some(*j);
                        break 'outer;
                    }
                    flips.push(*j);
                    slope = next;
                }
                rest = tail;
            }
            chosen.expect("breakpoint list is nonempty")
        };
        if bland {
            self.bland_pivots += 1;
        }
        let theta = d[q].clone() / row[q].clone();
        if theta.is_zero() {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        for (j, a) in row.iter().enumerate() {
            if self.place[j] != Place::Basic && !a.is_zero() {
                d[j] = d[j].clone() - theta.clone() * a.clone();
            }
        }
        for (i, v) in rho.iter().enumerate() {
            let j = self.ncols + i;
            if self.place[j] != Place::Basic && !v.is_zero() {
                d[j] = d[j].clone() - theta.clone() * v.clone();
            }
        }
        let leaving = self.basis[r];
        d[leaving] = -theta;
        d[q] = T::zero();
        let mut a = vec![T::zero(); self.p];
        self.column_of(q, &mut a);
        let mut shift = vec![T::zero(); self.p];
        if !flips.is_empty() {
            let mut moves = vec![T::zero(); self.ncols];
            for &j in &flips {
                let (to, place) = match self.place[j] {
                    Place::Lower => (self.hi[j].clone(), Place::Upper),
                    _ => (self.lo[j].clone(), Place::Lower),
                };
                moves[j] = to.clone() - self.x[j].clone();
                self.x[j] = to;
                self.place[j] = place;
            }
            self.src.combine(&moves, &mut shift);
        }
        // B^-1 a_q and B^-1 (flip shift) in one sweep over the inverse
        let mut alpha = Vec::with_capacity(self.p);
        for i in 0..self.p {
            let (u, v) = T::dot2(self.binv_row(i), &a, &shift);
            alpha.push(u);
            if !flips.is_empty() {
                let b = self.basis[i];
                self.x[b] = self.x[b].clone() - v;
            }
        }
        if !T::EXACT {
            let drift = (alpha[r].clone() - row[q].clone()).abs();
            if drift > T::tolerance(1e-7) * (T::one() + row[q].abs()) {
                self.refactor()?;
                let fresh = self.fresh_reduced_costs(&self.dual_cost);
                d.clone_from_slice(&fresh);
                self.iterations += 1;
                return Ok(true);
            }
        }
        let (bound, place) = if above {
            (self.hi[leaving].clone(), Place::Upper)
        } else {
            (self.lo[leaving].clone(), Place::Lower)
        };
        let step = (self.x[leaving].clone() - bound.clone()) / alpha[r].clone();
        for (i, ai) in alpha.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            let b = self.basis[i];
            self.x[b] = self.x[b].clone() - step.clone() * ai.clone();
        }
        self.x[q] = self.x[q].clone() + step;
        self.x[leaving] = bound;
        self.place[leaving] = place;
        self.basis[r] = q;
        self.place[q] = Place::Basic;
        self.pivot(r, &alpha);
        self.iterations += 1;
        self.since_refactor += 1;
        if !T::EXACT && self.since_refactor >= self.opts.refactor_every.max(2 * self.p) {
            self.refactor()?;
            let fresh = self.fresh_reduced_costs(&self.dual_cost);
            d.clone_from_slice(&fresh);
        }
        Ok(true)
    }

    /// Puts every nonbasic variable on the bound its reduced cost asks for.
    /// Returns whether anything moved.
    fn align_bounds(&mut self, d: &[T]) -> bool {
        let tol = T::tolerance(self.opts.optimality_tol);
        let mut moved = false;
        for j in 0..self.ncols {
            let want = match self.place[j] {
                Place::Basic => continue,
                Place::Lower if d[j] < -tol.clone() => Place::Upper,
                Place::Upper if d[j] > tol => Place::Lower,
                _ => continue,
            };
            self.x[j] = if want == Place::Upper {
                self.hi[j].clone()
            } else {
                self.lo[j].clone()
            };
            self.place[j] = want;
            moved = true;
        }
        moved
    }

    /// Float mode: nudges each nonbasic cost away from zero reduced cost in
    /// the direction its bound already satisfies. Integer-valued data leaves
    /// thousands of exact ties that otherwise stall the dual ratio test.
    fn perturb_costs(&mut self) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for j in 0..self.ncols {
            let scale = 1.0 + self.dual_cost[j].to_f64().abs();
            let e = T::tolerance(PERTURBATION * scale * (1.0 + rng.gen::<f64>()));
            match self.place[j] {
                Place::Lower => self.dual_cost[j] = self.dual_cost[j].clone() + e,
                Place::Upper => self.dual_cost[j] = self.dual_cost[j].clone() - e,
                Place::Basic => {}
            }
        }
    }

    fn dual_run(&mut self) -> Result<bool> {
        let original = self.dual_cost.clone();
        if !T::EXACT {
            self.perturb_costs();
        }
        let mut restored = T::EXACT;
        loop {
            let cost = self.dual_cost.clone();
            let mut d = self.fresh_reduced_costs(&cost);
            while self.dual_iterate(&mut d)? {
                if self.iterations >= self.opts.max_iterations {
                    self.dual_cost = original;
                    return Ok(false);
                }
            }
            if T::EXACT {
                return Ok(true);
            }
            if !restored {
                self.dual_cost = original.clone();
                restored = true;
            }
            // drop the perturbation and float drift: re-derive everything,
            // fix any wrong-signed reduced costs by bound flips and resume
            self.refactor()?;
            let d = self.fresh_reduced_costs(&original);
            let moved = self.align_bounds(&d);
            if moved {
                self.refactor()?;
            }
            let tol = T::tolerance(1e-9);
            if !moved && self.dual_leaving(&tol).is_none() {
                return Ok(true);
            }
        }
    }
}

/// Breakpoints ordered at a time by the long-step ratio test.
const BREAKPOINT_BLOCK: usize = 64;

/// Relative size of the float-mode cost perturbation.
const PERTURBATION: f64 = 1e-7;

fn solve_dual_long_step<T: Scalar, S: ColumnSource<T>>(
    src: &S,
    labels: &[T],
    weights: &[T],
    start: Option<&[T]>,
    opts: &SimplexOptions,
) -> Result<DualSolution<T>> {
    let p = src.n_rows();
    let ncols = src.n_cols();
    let total = ncols + p;
    let mut cost = vec![T::zero(); total];
    // Artificial costs -c0 make the starting multipliers equal -c0, so the
    // initial bounds follow the residual signs of the guess c0. The
    // artificials end fixed at zero, so their costs do not change the optimum.
    let mut fitted = vec![T::zero(); ncols];
    if let Some(c0) = start {
        if c0.len() != p {
            return Err(Error::Domain(format!(
                "starting guess has length {} instead of {p}",
                c0.len()
            )));
        }
        src.price(c0, &mut fitted);
        for (i, c) in c0.iter().enumerate() {
            cost[ncols + i] = -c.clone();
        }
    }
    let mut lo = Vec::with_capacity(total);
    let mut hi = Vec::with_capacity(total);
    let mut x = Vec::with_capacity(total);
    let mut place = Vec::with_capacity(total);
    for (j, (y, w)) in labels.iter().zip(weights).enumerate() {
        cost[j] = -y.clone();
        lo.push(-w.clone());
        hi.push(w.clone());
        // the starting reduced cost is minus the residual of the guess
        if (y.clone() - fitted[j].clone()).is_positive() {
            x.push(w.clone());
            place.push(Place::Upper);
        } else {
            x.push(-w.clone());
            place.push(Place::Lower);
        }
    }
    let mut residual = vec![T::zero(); p];
    src.combine(&x, &mut residual);
    for r in residual {
        // fixed artificial e_i, basic, absorbing the initial imbalance
        lo.push(T::zero());
        hi.push(T::zero());
        x.push(-r);
        place.push(Place::Basic);
    }
    let mut binv = vec![T::zero(); p * p];
    for i in 0..p {
        binv[i * p + i] = T::one();
    }
    let mut solver = Solver {
        src,
        p,
        ncols,
        lo,
        hi,
        x,
        place,
        basis: (ncols..total).collect(),
        binv,
        art_sign: vec![T::one(); p],
        opts: *opts,
        iterations: 0,
        since_refactor: 0,
        degenerate_run: 0,
        bland_pivots: 0,
        dual_cost: cost,
        row_norms: vec![T::one(); p],
    };
    let finished = solver.dual_run()?;
    let status = if finished {
        Status::Optimal
    } else {
        Status::IterationLimit
    };
    // artificials still basic sit on dependent rows
    let redundant: Vec<usize> = solver
        .basis
        .iter()
        .filter(|&&b| b >= ncols)
        .map(|b| b - ncols)
        .collect();
    let cost = solver.dual_cost.clone();
    let pi = solver.multipliers(&cost);
    let mut sol = partial(&solver, labels, status, redundant);
    sol.coefficients = pi.into_iter().map(|v| -v).collect();
    Ok(sol)
}

/// Solves min_c sum_j w_j |y_j - <c, a_j>| through its bounded dual.
pub fn solve_weighted_l1<T: Scalar, S: ColumnSource<T>>(
    src: &S,
    labels: &[T],
    weights: &[T],
    opts: &SimplexOptions,
) -> Result<DualSolution<T>> {
    solve_weighted_l1_from(src, labels, weights, None, opts)
}

/// As `solve_weighted_l1`; the dual method starts from the coefficient guess
/// `start` when one is given. The primal method ignores it.
pub fn solve_weighted_l1_from<T: Scalar, S: ColumnSource<T>>(
    src: &S,
    labels: &[T],
    weights: &[T],
    start: Option<&[T]>,
    opts: &SimplexOptions,
) -> Result<DualSolution<T>> {
    let p = src.n_rows();
    let ncols = src.n_cols();
    if labels.len() != ncols || weights.len() != ncols {
        return Err(Error::Domain(format!(
            "expected {ncols} labels and weights, got {} and {}",
            labels.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::Domain("weights must be nonnegative".into()));
    }
    if opts.method == Method::DualLongStep {
        return solve_dual_long_step(src, labels, weights, start, opts);
    }
    let total = ncols + p;
    let mut lo = Vec::with_capacity(total);
    let mut hi = Vec::with_capacity(total);
    let mut x = Vec::with_capacity(total);
    let mut place = Vec::with_capacity(total);
    for (y, w) in labels.iter().zip(weights) {
        lo.push(-w.clone());
        hi.push(w.clone());
        if y.is_positive() {
            x.push(w.clone());
            place.push(Place::Upper);
        } else {
            x.push(-w.clone());
            place.push(Place::Lower);
        }
    }
    let mut residual = vec![T::zero(); p];
    src.combine(&x, &mut residual);
    // artificial i carries |residual_i| with column sign -sign(residual_i)
    let mut art_sign = Vec::with_capacity(p);
    for r in &residual {
        let s = if r.is_positive() { -T::one() } else { T::one() };
        art_sign.push(s);
        lo.push(T::zero());
        // the upper bound only keeps every variable boxed
        hi.push(r.abs() + T::one());
        x.push(r.abs());
        place.push(Place::Basic);
    }
    let mut binv = vec![T::zero(); p * p];
    for i in 0..p {
        binv[i * p + i] = art_sign[i].clone();
    }
    let mut solver = Solver {
        src,
        p,
        ncols,
        lo,
        hi,
        x,
        place,
        basis: (ncols..total).collect(),
        binv,
        art_sign,
        opts: *opts,
        iterations: 0,
        since_refactor: 0,
        degenerate_run: 0,
        bland_pivots: 0,
        dual_cost: Vec::new(),
        row_norms: Vec::new(),
    };
    let mut phase1 = vec![T::zero(); total];
    for c in phase1.iter_mut().skip(ncols) {
        *c = T::one();
    }
    let finished = solver.run(&phase1)?;
    let infeas: T = (ncols..total).fold(T::zero(), |a, j| a + solver.x[j].clone());
    if !finished {
        return Ok(partial(&solver, labels, Status::IterationLimit, Vec::new()));
    }
    if infeas.abs() > T::tolerance(1e-7) {
        return Ok(partial(&solver, labels, Status::Infeasible, Vec::new()));
    }
    for j in ncols..total {
        if solver.place[j] != Place::Basic {
            solver.place[j] = Place::Lower;
        }
        solver.x[j] = T::zero();
        solver.hi[j] = T::zero();
    }
    let redundant = solver.drive_out_artificials();
    if !T::EXACT {
        solver.refactor()?;
    }
    let mut phase2 = vec![T::zero(); total];
    for (j, y) in labels.iter().enumerate() {
        phase2[j] = -y.clone();
    }
    solver.degenerate_run = 0;
    let finished = solver.run(&phase2)?;
    if !T::EXACT {
        solver.refactor()?;
    }
    let status = if finished {
        Status::Optimal
    } else {
        Status::IterationLimit
    };
    let pi = solver.multipliers(&phase2);
    let mut sol = partial(&solver, labels, status, redundant);
    sol.coefficients = pi.into_iter().map(|v| -v).collect();
    Ok(sol)
}

fn partial<T: Scalar, S: ColumnSource<T>>(
    s: &Solver<'_, T, S>,
    labels: &[T],
    status: Status,
    redundant_rows: Vec<usize>,
) -> DualSolution<T> {
    let lambda = s.x[..s.ncols].to_vec();
    let dual_objective = lambda
        .iter()
        .zip(labels)
        .fold(T::zero(), |a, (l, y)| a + l.clone() * y.clone());
    DualSolution {
        status,
        coefficients: vec![T::zero(); s.p],
        lambda,
        dual_objective,
        iterations: s.iterations,
        redundant_rows,
        bland_pivots: s.bland_pivots,
    }
}

/// sum_j w_j |y_j - <c, a_j>|.
pub fn weighted_l1_objective<T: Scalar, S: ColumnSource<T>>(src: &S, labels: &[T], weights: &[T], coeffs: &[T]) -> T {
    let mut fitted = vec![T::zero(); src.n_cols()];
    src.price(coeffs, &mut fitted);
    fitted
        .iter()
        .zip(labels)
        .zip(weights)
        .fold(T::zero(), |a, ((f, y), w)| {
            a + w.clone() * (y.clone() - f.clone()).abs()
        })
}

/// Largest complementary-slackness violation w_j |r_j| - lambda_j r_j over the data.
pub fn slackness_residual<T: Scalar, S: ColumnSource<T>>(
    src: &S,
    labels: &[T],
    weights: &[T],
    sol: &DualSolution<T>,
) -> T {
    let mut fitted = vec![T::zero(); src.n_cols()];
    src.price(&sol.coefficients, &mut fitted);
    let mut worst = T::zero();
    for j in 0..src.n_cols() {
        let r = labels[j].clone() - fitted[j].clone();
        let v = weights[j].clone() * r.abs() - sol.lambda[j].clone() * r;
        if v > worst {
            worst = v;
        }
    }
    worst
}
