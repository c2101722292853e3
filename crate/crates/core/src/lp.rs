//! Dense bounded-variable primal simplex.
//!
//! Solves `min c^T x` subject to linear rows `a_i^T x {<=,>=,=} b_i` and
//! `l <= x <= u`. Lower bounds must be finite. Entering variables are chosen
//! by the largest reduced cost with ties broken on the lowest index; after a
//! run of degenerate pivots the solver switches to Bland's rule for the rest
//! of the phase, so results are deterministic and cycling cannot occur.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-7;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("variable {0} has an infinite or inverted lower bound")]
    BadBounds(usize),
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coefs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    /// `n_vars` variables with zero cost and bounds `[0, +inf)`.
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Adds a sparse row. Repeated indices are summed.
    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row { coefs, relation, rhs });
    }

    pub fn add_dense_row(&mut self, coefs: &[f64], relation: Relation, rhs: f64) {
        let sparse = coefs.iter().copied().enumerate().filter(|(_, a)| *a != 0.0).collect();
        self.add_row(sparse, relation, rhs);
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        for j in 0..self.n_vars() {
            if !self.lower[j].is_finite() || self.lower[j] > self.upper[j] {
                return Err(LpError::BadBounds(j));
            }
        }
        Tableau::build(self).run(self)
    }

    /// Largest violation of any row or bound at `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.coefs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.relation {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Ge => (row.rhs - lhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    /// Columns: structural, slacks, artificials, then the transformed rhs.
    width: usize,
    n_struct: usize,
    first_artificial: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    value: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Continue,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.n_vars();
        let n_slack = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let first_artificial = n + n_slack;
        let ncol = first_artificial + m;
        let width = ncol + 1;

        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        lower.extend(std::iter::repeat_n(0.0, n_slack + m));
        upper.extend(std::iter::repeat_n(f64::INFINITY, n_slack + m));

        let mut value = vec![0.0; ncol];
        value[..n].copy_from_slice(&lp.lower);
        let mut state = vec![VarState::AtLower; ncol];

        let mut cells = vec![0.0; m * width];
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        for (i, row) in lp.rows.iter().enumerate() {
            let r = &mut cells[i * width..(i + 1) * width];
            for &(j, a) in &row.coefs {
                r[j] += a;
            }
            match row.relation {
                Relation::Le => {
                    r[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    r[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            let activity: f64 = (0..n).map(|j| r[j] * value[j]).sum();
            let residual = row.rhs - activity;
            let sign = if residual < 0.0 { -1.0 } else { 1.0 };
            for c in r[..ncol].iter_mut() {
                *c *= sign;
            }
            r[first_artificial + i] = 1.0;
            r[ncol] = sign * row.rhs;
            basis.push(first_artificial + i);
            state[first_artificial + i] = VarState::Basic;
            value[first_artificial + i] = residual.abs();
        }

        Tableau {
            m,
            width,
            n_struct: n,
            first_artificial,
            cells,
            basis,
            state,
            value,
            lower,
            upper,
            iterations: 0,
        }
    }

    fn ncol(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let limit = 50 * (self.m + self.ncol()) + 1000;

        let mut phase1 = vec![0.0; self.ncol()];
        for c in phase1[self.first_artificial..].iter_mut() {
            *c = 1.0;
        }
        self.optimize(&phase1, limit)?;
        let infeasibility: f64 = self.value[self.first_artificial..].iter().sum();
        let scale = lp.rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Err(LpError::Infeasible);
        }
        self.evict_artificials();
        for j in self.first_artificial..self.ncol() {
            self.upper[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
                self.value[j] = 0.0;
            }
        }

        let mut phase2 = vec![0.0; self.ncol()];
        phase2[..self.n_struct].copy_from_slice(&lp.objective);
        self.optimize(&phase2, limit)?;
        self.refresh_basic_values();

        let x: Vec<f64> = (0..self.n_struct)
            .map(|j| self.value[j].clamp(self.lower[j], self.upper[j]))
            .collect();
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations: self.iterations,
        })
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                let row = &self.cells[i * self.width..i * self.width + self.ncol()];
                for (dj, t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64], limit: usize) -> Result<(), LpError> {
        let mut d = self.reduced_costs(cost);
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit);
            }
            match self.iterate(&mut d, bland, &mut degenerate)? {
                Step::Optimal => return Ok(()),
                Step::Continue => {}
            }
            if degenerate > DEGENERATE_STREAK {
                bland = true;
            }
        }
    }

    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncol() {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.upper[j] - self.lower[j] <= 0.0 => continue,
                VarState::AtLower if d[j] < -COST_TOL => 1.0,
                VarState::AtUpper if d[j] > COST_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| d[j].abs() > d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self, d: &mut [f64], bland: bool, degenerate: &mut usize) -> Result<Step, LpError> {
        let Some((q, dir)) = self.choose_entering(d, bland) else {
            return Ok(Step::Optimal);
        };
        self.iterations += 1;

        // ratio test
        let mut step = self.upper[q] - self.lower[q];
        let mut leave: Option<usize> = None;
        for i in 0..self.m {
            let t = dir * self.at(i, q);
            if t.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let room = if t > 0.0 {
                (self.value[b] - self.lower[b]).max(0.0) / t
            } else if self.upper[b].is_finite() {
                (self.upper[b] - self.value[b]).max(0.0) / -t
            } else {
                continue;
            };
            let better = match leave {
                None => room < step,
                Some(r) => {
                    if room < step - 1e-12 {
                        true
                    } else if room <= step + 1e-12 {
                        if bland {
                            b < self.basis[r]
                        } else {
                            self.at(i, q).abs() > self.at(r, q).abs()
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                step = room;
                leave = Some(i);
            }
        }
        if step.is_infinite() {
            return Err(LpError::Unbounded);
        }
        if step <= 1e-12 {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }

        for i in 0..self.m {
            let t = self.at(i, q);
            if t != 0.0 {
                let b = self.basis[i];
                self.value[b] -= dir * t * step;
            }
        }
        self.value[q] += dir * step;

        match leave {
            None => {
                // bound flip
                self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                self.value[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            }
            Some(r) => {
                let out = self.basis[r];
                let t = dir * self.at(r, q);
                if t > 0.0 {
                    self.state[out] = VarState::AtLower;
                    self.value[out] = self.lower[out];
                } else {
                    self.state[out] = VarState::AtUpper;
                    self.value[out] = self.upper[out];
                }
                self.pivot(r, q, d);
            }
        }
        Ok(Step::Continue)
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let w = self.width;
        let p = self.at(r, q);
        {
            let row = &mut self.cells[r * w..(r + 1) * w];
            for c in row.iter_mut() {
                *c /= p;
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.cells[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.cells[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.cells[i * w..(i + 1) * w];
            for (c, pr) in row.iter_mut().zip(&pivot_row) {
                *c -= f * pr;
            }
            row[q] = 0.0;
        }
        let f = d[q];
        if f != 0.0 {
            for (dj, pr) in d.iter_mut().zip(&pivot_row) {
                *dj -= f * pr;
            }
            d[q] = 0.0;
        }
        self.state[self.basis[r]] = match self.state[self.basis[r]] {
            VarState::Basic => VarState::AtLower,
            s => s,
        };
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
    }

    /// Pivots zero-valued artificials out of the basis where a structural or
    /// slack column can replace them; rows where none can are redundant.
    fn evict_artificials(&mut self) {
        let mut scratch = vec![0.0; self.ncol()];
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| self.state[j] != VarState::Basic)
                .find(|&j| self.at(r, j).abs() > 1e-7);
            if let Some(j) = candidate {
                let out = self.basis[r];
                self.pivot(r, j, &mut scratch);
                self.state[out] = VarState::AtLower;
                self.value[out] = 0.0;
            }
        }
        self.refresh_basic_values();
    }

    fn refresh_basic_values(&mut self) {
        let ncol = self.ncol();
        for i in 0..self.m {
            let row = &self.cells[i * self.width..(i + 1) * self.width];
            let mut v = row[ncol];
            for j in 0..ncol {
                if self.state[j] != VarState::Basic && row[j] != 0.0 {
                    v -= row[j] * self.value[j];
                }
            }
            self.value[self.basis[i]] = v;
        }
    }
}
