// SPDX-License-Identifier: Apache-2.0

//! Bounded-variable revised primal simplex with a dense basis inverse.
//!
//! Every row `i` gets a logical column `s_i` with coefficient +1 so that
//! `a_i x + s_i = b_i`; the sense of the row becomes a bound on `s_i`.
//! Rows whose logical cannot absorb the initial residual get an artificial
//! column, and phase 1 minimizes the sum of artificials. Pricing is
//! Dantzig's rule with ties to the lowest index, switching to Bland's rule
//! after a run of degenerate pivots.

use super::{LinearProgram, LpSolution, LpStatus, Sense, FEASIBILITY_TOL, OPTIMALITY_TOL};
use crate::error::{Error, Result};

/// Bound relaxation of the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Smallest pivot element accepted in the ratio test.
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// Pivots between refactorizations of the basis inverse.
    pub refactor_every: usize,
    /// Pivot budget; `None` derives one from the problem size.
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: FEASIBILITY_TOL,
            optimality_tol: OPTIMALITY_TOL,
            pivot_tol: 1e-9,
            bland_after: 50,
            refactor_every: 100,
            max_pivots: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    FreeZero,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    /// Sparse columns for structural variables.
    cols: Vec<Vec<(usize, f64)>>,
    /// Row index and sign of each artificial column.
    artificials: Vec<(usize, f64)>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    rhs: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
    max_pivots: usize,
}

/// Solves `lp`; on a numerical failure, retries from scratch with more
/// frequent refactorization before giving up.
pub(super) fn solve(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut attempt = opts.clone();
    loop {
        match solve_once(lp, &attempt) {
            Err(Error::Solver(_)) if attempt.refactor_every > 1 => {
                attempt.refactor_every = (attempt.refactor_every / 10).max(1);
            }
            r => return r,
        }
    }
}

fn solve_once(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    let mut s = Simplex::new(lp, opts);
    let n_struct = lp.num_vars();

    if !s.artificials.is_empty() {
        let first_art = s.n + s.m;
        for j in 0..s.cost.len() {
            s.cost[j] = if j >= first_art { 1.0 } else { 0.0 };
        }
        s.run()?;
        s.refactor()?;
        let infeas: f64 = (first_art..s.cost.len()).map(|j| s.x[j].max(0.0)).sum();
        let scale = 1.0 + s.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-8 * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: s.x[..n_struct].to_vec(),
                objective: f64::NAN,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                pivots: s.pivots,
            });
        }
        for j in first_art..s.cost.len() {
            s.ub[j] = 0.0;
            if s.state[j] != VarState::Basic {
                s.x[j] = 0.0;
                s.state[j] = VarState::AtLower;
            }
        }
        s.drive_out_artificials()?;
    }

    for j in 0..s.cost.len() {
        s.cost[j] = if j < n_struct { lp.objective[j] } else { 0.0 };
    }
    let outcome = s.run()?;
    if let Outcome::Unbounded = outcome {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: s.x[..n_struct].to_vec(),
            objective: f64::NEG_INFINITY,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            pivots: s.pivots,
        });
    }
    s.refactor()?;
    // Refactoring may expose drift; finish with a clean pass.
    if let Outcome::Unbounded = s.run()? {
        return Err(Error::Solver("became unbounded after refactorization".into()));
    }
    s.refactor()?;

    let viol = s.max_basic_violation();
    if viol > 1e-6 * (1.0 + s.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
        return Err(Error::Solver(format!(
            "numerical breakdown: basic variable violates its bound by {viol:e} after {} pivots",
            s.pivots
        )));
    }
    let y = s.duals();
    let primal: Vec<f64> = s.x[..n_struct].to_vec();
    let reduced_costs: Vec<f64> = (0..n_struct)
        .map(|j| if s.state[j] == VarState::Basic { 0.0 } else { s.reduced_cost(j, &y) })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&primal),
        primal,
        duals: y,
        reduced_costs,
        pivots: s.pivots,
    })
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        // Merge duplicate entries within a column.
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }

        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        for row in &lp.rows {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }

        let mut x = vec![0.0; n + m];
        let mut state = vec![VarState::AtLower; n + m];
        for j in 0..n {
            if lb[j].is_finite() {
                x[j] = lb[j];
                state[j] = VarState::AtLower;
            } else if ub[j].is_finite() {
                x[j] = ub[j];
                state[j] = VarState::AtUpper;
            } else {
                x[j] = 0.0;
                state[j] = VarState::FreeZero;
            }
        }
        let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        let mut residual = rhs.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut artificials = Vec::new();
        let mut diag = Vec::with_capacity(m);
        for i in 0..m {
            let s = n + i;
            let r = residual[i];
            if r >= lb[s] - opts.feasibility_tol && r <= ub[s] + opts.feasibility_tol {
                x[s] = r.clamp(lb[s], ub[s]);
                state[s] = VarState::Basic;
                basis.push(s);
                diag.push(1.0);
            } else {
                let v = r.clamp(lb[s], ub[s]);
                x[s] = v;
                state[s] = if v == lb[s] { VarState::AtLower } else { VarState::AtUpper };
                let sign = if r - v > 0.0 { 1.0 } else { -1.0 };
                let art = n + m + artificials.len();
                artificials.push((i, sign));
                lb.push(0.0);
                ub.push(f64::INFINITY);
                x.push((r - v).abs());
                state.push(VarState::Basic);
                basis.push(art);
                diag.push(sign);
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / diag[i];
        }
        let total = x.len();
        let max_pivots = opts.max_pivots.unwrap_or(20_000 + 50 * (m + total));
        Simplex {
            opts,
            m,
            n,
            cols,
            artificials,
            lb,
            ub,
            cost: vec![0.0; total],
            x,
            state,
            basis,
            binv,
            rhs,
            pivots: 0,
            since_refactor: 0,
            max_pivots,
        }
    }

    /// Calls `f(row, coefficient)` for every nonzero of column `j`.
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                f(i, a);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let (i, s) = self.artificials[j - self.n - self.m];
            f(i, s);
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        self.for_col(j, |i, a| d -= y[i] * a);
        d
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_col(j, |i, a| {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[k * m + i] * a;
            }
        });
        alpha
    }

    fn run(&mut self) -> Result<Outcome> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let total = self.x.len();
        loop {
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let y = self.duals();

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                let dir = match self.state[j] {
                    VarState::Basic => continue,
                    _ if self.lb[j] == self.ub[j] => continue,
                    st => {
                        let d = self.reduced_cost(j, &y);
                        let tol = self.opts.optimality_tol * (1.0 + self.cost[j].abs());
                        match st {
                            VarState::AtLower if d < -tol => (1.0, -d),
                            VarState::AtUpper if d > tol => (-1.0, d),
                            VarState::FreeZero if d.abs() > tol => (-d.signum(), d.abs()),
                            _ => continue,
                        }
                    }
                };
                if bland {
                    entering = Some((j, dir.0));
                    break;
                }
                if dir.1 > best {
                    best = dir.1;
                    entering = Some((j, dir.0));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(Outcome::Optimal);
            };

            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(Error::Solver(format!(
                    "pivot budget of {} exhausted ({} rows, {} columns); possible cycling",
                    self.max_pivots, self.m, total
                )));
            }

            let alpha = self.ftran(q);
            let (step, leave) = if bland { self.ratio_test_bland(dir, &alpha) } else { self.ratio_test_harris(dir, &alpha) };
            let flip = self.ub[q] - self.lb[q];
            if flip.is_finite() && flip <= step {
                // Bound flip of the entering variable; basis unchanged.
                self.apply_step(q, dir, flip, &alpha);
                self.state[q] = if self.state[q] == VarState::AtLower { VarState::AtUpper } else { VarState::AtLower };
                self.x[q] = if self.state[q] == VarState::AtLower { self.lb[q] } else { self.ub[q] };
                degenerate_run = 0;
                bland = false;
                continue;
            }
            let Some((r, to_upper)) = leave else {
                return Ok(Outcome::Unbounded);
            };

            self.apply_step(q, dir, step, &alpha);
            let out = self.basis[r];
            self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
            self.state[out] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
            self.state[q] = VarState::Basic;
            self.basis[r] = q;
            self.pivot_binv(r, &alpha);

            if step < 1e-12 {
                degenerate_run += 1;
                if degenerate_run > self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    /// Step limit of basic position `k` when the entering variable moves in
    /// direction `dir`, with its bounds relaxed by `slack`. `None` if unbounded
    /// or the pivot element is negligible.
    fn limit(&self, k: usize, dir: f64, a: f64, slack: f64) -> Option<(f64, bool)> {
        if a.abs() <= self.opts.pivot_tol {
            return None;
        }
        let b = self.basis[k];
        let rate = -dir * a;
        if rate < 0.0 {
            self.lb[b].is_finite().then(|| (((self.x[b] - self.lb[b] + slack) / -rate).max(0.0), false))
        } else {
            self.ub[b].is_finite().then(|| (((self.ub[b] - self.x[b] + slack) / rate).max(0.0), true))
        }
    }

    /// Textbook minimum-ratio test with ties to the lowest variable index.
    fn ratio_test_bland(&self, dir: f64, alpha: &[f64]) -> (f64, Option<(usize, bool)>) {
        let mut step = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None;
        for (k, &a) in alpha.iter().enumerate() {
            let Some((limit, to_upper)) = self.limit(k, dir, a, 0.0) else { continue };
            let better = match leave {
                None => true,
                Some((pos, _)) => limit < step - 1e-12 || (limit <= step + 1e-12 && self.basis[k] < self.basis[pos]),
            };
            if better {
                step = if leave.is_none() { limit } else { step.min(limit) };
                leave = Some((k, to_upper));
            }
        }
        (step, leave)
    }

    /// Two-pass ratio test: bound the step with tolerance-relaxed bounds,
    /// then pick the largest pivot element among the rows that block within it.
    fn ratio_test_harris(&self, dir: f64, alpha: &[f64]) -> (f64, Option<(usize, bool)>) {
        let tol = HARRIS_TOL;
        let mut bound = f64::INFINITY;
        for (k, &a) in alpha.iter().enumerate() {
            if let Some((limit, _)) = self.limit(k, dir, a, tol) {
                bound = bound.min(limit);
            }
        }
        if !bound.is_finite() {
            return (f64::INFINITY, None);
        }
        let mut leave: Option<(usize, bool)> = None;
        let mut step = f64::INFINITY;
        let mut mag = 0.0;
        for (k, &a) in alpha.iter().enumerate() {
            let Some((limit, to_upper)) = self.limit(k, dir, a, 0.0) else { continue };
            if limit > bound {
                continue;
            }
            let better = a.abs() > mag * (1.0 + 1e-12)
                || (a.abs() >= mag * (1.0 - 1e-12) && leave.is_some_and(|(pos, _)| self.basis[k] < self.basis[pos]));
            if leave.is_none() || better {
                leave = Some((k, to_upper));
                step = limit;
                mag = a.abs();
            }
        }
        (step, leave)
    }

    fn apply_step(&mut self, q: usize, dir: f64, step: f64, alpha: &[f64]) {
        if step == 0.0 {
            return;
        }
        self.x[q] += dir * step;
        for (k, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let b = self.basis[k];
                self.x[b] -= dir * a * step;
            }
        }
    }

    fn pivot_binv(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (k, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.since_refactor += 1;
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and
    /// recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (k, &b) in self.basis.iter().enumerate() {
            self.for_col(b, |i, v| a[i * m + k] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-13 {
                return Err(Error::Solver(format!("singular basis during refactorization (column {c})")));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // `inv` is the inverse of the matrix whose column k is basis[k]; rows of
        // B^-1 correspond to basis positions.
        self.binv = inv;

        let mut residual = self.rhs.clone();
        for j in 0..self.x.len() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_col(j, |i, v| residual[i] -= v * xj);
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&residual).map(|(b, r)| b * r).sum();
            self.x[self.basis[k]] = v;
        }
        Ok(())
    }

    fn max_basic_violation(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| (self.lb[b] - self.x[b]).max(self.x[b] - self.ub[b]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Replaces basic artificials (fixed at zero) with non-artificial
    /// columns where possible. Artificials left in the basis mark redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let first_art = self.n + self.m;
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let row: Vec<f64> = self.binv[r * self.m..(r + 1) * self.m].to_vec();
            let mut chosen = None;
            for j in 0..first_art {
                if self.state[j] == VarState::Basic || self.lb[j] == self.ub[j] && j >= self.n {
                    continue;
                }
                let mut v = 0.0;
                self.for_col(j, |i, a| v += row[i] * a);
                if v.abs() > 1e-7 {
                    chosen = Some(j);
                    break;
                }
            }
            if let Some(q) = chosen {
                let alpha = self.ftran(q);
                let out = self.basis[r];
                self.x[out] = 0.0;
                self.state[out] = VarState::AtLower;
                // Degenerate pivot: the entering variable keeps its value.
                self.state[q] = VarState::Basic;
                self.basis[r] = q;
                self.pivot_binv(r, &alpha);
                self.pivots += 1;
            }
        }
        self.refactor()
    }
}
