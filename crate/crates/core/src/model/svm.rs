//! L1-penalized hinge-loss linear SVM:
//!
//! ```text
//! min_{w,b,z}  sum_i C z_i + ||w||_1   s.t.  y_i (w.x_i + b) >= 1 - z_i,  z_i >= 0
//! ```
//!
//! Solved exactly as a linear program through its dual
//!
//! ```text
//! max sum_i a_i   s.t.  0 <= a_i <= C,  sum_i y_i a_i = 0,  |sum_i a_i y_i x_ij| <= 1
//! ```
//!
//! with a bounded dual simplex. The simplex multipliers of the dual are
//! exactly `(b, w)`, and every dual-feasible basis has objective equal to the
//! primal objective at those multipliers, so the primal objective never
//! increases from one pivot to the next. Feature constraints enter lazily:
//! the LP starts with the bias row only, and the most violated feature rows
//! are appended (warm start, still dual feasible) until none is violated.
//!
//! Each example's margin target is `1 + delta_i` with `delta_i` in
//! `[0.5e-7, 1e-7)`, a fixed perturbation against degenerate cycling. The
//! returned objective is the unperturbed one evaluated at the solution; it
//! exceeds the true optimum by at most `1e-7 * C * n`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Weights with magnitude at or below this count as zero.
pub const NONZERO_THRESHOLD: f64 = 1e-6;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
const FEATURE_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const FEATURE_BATCH: usize = 32;
const MARGIN_JITTER: f64 = 1e-7;

/// Deterministic value in [0.5, 1) from a splitmix64 round.
fn unit_hash(i: u64) -> f64 {
    let mut z = i.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    0.5 + (z >> 11) as f64 / (1u64 << 54) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub pivots: usize,
    /// Feature-row insertion rounds.
    pub rounds: usize,
    /// Primal objective after every pivot.
    pub objective_trace: Vec<f64>,
    pub active_rows: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub stats: SolveStats,
}

impl L1Solution {
    pub fn nonzero_count(&self) -> usize {
        self.w.iter().filter(|v| v.abs() > NONZERO_THRESHOLD).count()
    }
}

/// `C * sum_i max(0, 1 - y_i (w.x_i + b)) + ||w||_1`.
pub fn l1_svm_objective(x: &DMatrix<f64>, y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let wv = DVector::from_column_slice(w);
    let f = x * wv;
    let hinge: f64 = f
        .iter()
        .zip(y)
        .map(|(fi, yi)| (1.0 - yi * (fi + b)).max(0.0))
        .sum();
    c * hinge + w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Trains the binary L1 SVM on standardized features (`n x k`, rows are
/// examples) with labels in {-1, +1}.
pub fn train_l1_binary(x: &DMatrix<f64>, y: &[f64], c: f64) -> Result<L1Solution> {
    validate(x, y, c)?;
    let (n, k) = x.shape();
    let mut lp = DualLp::new(x, y, c);
    let converged = lp.solve(100 * (n + k + 10))?;
    Ok(lp.solution(converged))
}

fn validate(x: &DMatrix<f64>, y: &[f64], c: f64) -> Result<()> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", y.len())));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("penalty C must be positive, got {c}")));
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!("labels must be +1/-1, got {v}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::InvalidInput("both classes must be present".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("features must be finite".into()));
    }
    Ok(())
}

/// Solves the problem for every penalty in `cs`, warm-starting each solve
/// from the previous optimal basis. Changing C only moves the alpha bounds,
/// so the old basis stays dual feasible.
pub fn train_l1_path(x: &DMatrix<f64>, y: &[f64], cs: &[f64]) -> Result<Vec<L1Solution>> {
    let Some(&first) = cs.first() else {
        return Ok(Vec::new());
    };
    for &c in cs {
        validate(x, y, c)?;
    }
    let (n, k) = x.shape();
    let mut lp = DualLp::new(x, y, first);
    let converged = lp.solve(100 * (n + k + 10))?;
    let mut out = vec![lp.solution(converged)];
    for &c in &cs[1..] {
        lp.set_c(c)?;
        let converged = lp.solve(100 * (n + k + 10))?;
        out.push(lp.solution(converged));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Lower,
    Upper,
    Basic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Alpha(usize),
    /// Slack of LP row `r >= 1`.
    Slack(usize),
    /// Fixed-at-zero artificial of the bias row.
    Art,
}

struct DualLp<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    c: f64,
    /// Feature index of LP row `r` is `rows[r - 1]`.
    rows: Vec<usize>,
    in_rows: Vec<bool>,
    alpha: Vec<State>,
    slack: Vec<State>,
    art: State,
    basis: Vec<Var>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    /// Simplex multipliers, `(b, w_rows...)`.
    pi: Vec<f64>,
    /// Reduced costs of the alpha columns, `m_i - y_i f(x_i)`.
    d_alpha: Vec<f64>,
    /// Per-example margin targets `1 + delta_i`. The tiny deterministic
    /// offsets break the ties that otherwise stall the dual simplex when many
    /// examples sit exactly on the margin.
    margins: Vec<f64>,
    pivots: usize,
    rounds: usize,
    since_refactor: usize,
    trace: Vec<f64>,
}

impl<'a> DualLp<'a> {
    fn new(x: &'a DMatrix<f64>, y: &'a [f64], c: f64) -> Self {
        let n = x.nrows();
        // pi = 0: every alpha has reduced cost 1 and sits at its upper bound.
        let sum_y: f64 = y.iter().sum();
        let margins: Vec<f64> = (0..n).map(|i| 1.0 + MARGIN_JITTER * unit_hash(i as u64)).collect();
        DualLp {
            x,
            y,
            c,
            rows: Vec::new(),
            in_rows: vec![false; x.ncols()],
            alpha: vec![State::Upper; n],
            slack: Vec::new(),
            art: State::Basic(0),
            basis: vec![Var::Art],
            binv: vec![1.0],
            xb: vec![-c * sum_y],
            pi: vec![0.0],
            d_alpha: margins.clone(),
            margins,
            pivots: 0,
            rounds: 0,
            since_refactor: 0,
            trace: Vec::new(),
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn bounds(&self, v: Var) -> (f64, f64) {
        match v {
            Var::Alpha(_) => (0.0, self.c),
            Var::Slack(_) => (-1.0, 1.0),
            Var::Art => (0.0, 0.0),
        }
    }

    fn state(&self, v: Var) -> State {
        match v {
            Var::Alpha(i) => self.alpha[i],
            Var::Slack(r) => self.slack[r - 1],
            Var::Art => self.art,
        }
    }

    fn set_state(&mut self, v: Var, s: State) {
        match v {
            Var::Alpha(i) => self.alpha[i] = s,
            Var::Slack(r) => self.slack[r - 1] = s,
            Var::Art => self.art = s,
        }
    }

    fn nonbasic_value(&self, v: Var) -> f64 {
        let (l, u) = self.bounds(v);
        match self.state(v) {
            State::Lower => l,
            State::Upper => u,
            State::Basic(_) => unreachable!("basic variable has no bound value"),
        }
    }

    /// Constraint column of a variable (length m).
    fn column(&self, v: Var) -> Vec<f64> {
        let m = self.m();
        let mut col = vec![0.0; m];
        match v {
            Var::Alpha(i) => {
                let yi = self.y[i];
                col[0] = yi;
                for (r, &j) in self.rows.iter().enumerate() {
                    col[r + 1] = yi * self.x[(i, j)];
                }
            }
            Var::Slack(r) => col[r] = -1.0,
            Var::Art => col[0] = 1.0,
        }
        col
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|r| {
                let row = &self.binv[r * m..(r + 1) * m];
                row.iter().zip(col).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    fn cost(&self, v: Var) -> f64 {
        match v {
            Var::Alpha(i) => self.margins[i],
            _ => 0.0,
        }
    }

    /// Recomputes multipliers and alpha reduced costs.
    fn price(&mut self) {
        let m = self.m();
        let mut pi = vec![0.0; m];
        for (r, &v) in self.basis.iter().enumerate() {
            let cb = self.cost(v);
            if cb != 0.0 {
                for (p, b) in pi.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *p += cb * b;
                }
            }
        }
        // exact zeros for weights whose slack is basic
        for r in 1..m {
            if matches!(self.slack[r - 1], State::Basic(_)) {
                pi[r] = 0.0;
            }
        }
        self.pi = pi;
        let f = self.decision_values(&self.pi);
        for (i, fi) in f.iter().enumerate() {
            self.d_alpha[i] = self.margins[i] - self.y[i] * fi;
        }
    }

    /// `v_0 + sum_r v_r x_{i,rows[r-1]}` for every example.
    fn decision_values(&self, v: &[f64]) -> Vec<f64> {
        let mut f = vec![v[0]; self.x.nrows()];
        for (r, &j) in self.rows.iter().enumerate() {
            let coef = v[r + 1];
            if coef != 0.0 {
                for (fi, xij) in f.iter_mut().zip(self.x.column(j).iter()) {
                    *fi += coef * xij;
                }
            }
        }
        f
    }

    fn objective(&self) -> f64 {
        let hinge: f64 = self.d_alpha.iter().map(|d| d.max(0.0)).sum();
        self.c * hinge + self.pi[1..].iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Rebuilds the basis inverse and basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut bmat = DMatrix::zeros(m, m);
        for (r, &v) in self.basis.iter().enumerate() {
            let col = self.column(v);
            for (i, val) in col.into_iter().enumerate() {
                bmat[(i, r)] = val;
            }
        }
        let inv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Infeasible("L1-SVM basis became singular".into()))?;
        for r in 0..m {
            for j in 0..m {
                self.binv[r * m + j] = inv[(r, j)];
            }
        }
        // B x_B = -sum_{nonbasic} A_j x_j
        let mut rhs = vec![0.0; m];
        let add = |col: Vec<f64>, val: f64, rhs: &mut Vec<f64>| {
            if val != 0.0 {
                for (a, b) in rhs.iter_mut().zip(col) {
                    *a -= b * val;
                }
            }
        };
        for i in 0..self.alpha.len() {
            if !matches!(self.alpha[i], State::Basic(_)) {
                let v = Var::Alpha(i);
                add(self.column(v), self.nonbasic_value(v), &mut rhs);
            }
        }
        for r in 1..m {
            if !matches!(self.slack[r - 1], State::Basic(_)) {
                let v = Var::Slack(r);
                add(self.column(v), self.nonbasic_value(v), &mut rhs);
            }
        }
        self.xb = self.ftran(&rhs);
        self.since_refactor = 0;
        Ok(())
    }

    /// Solves to optimality over all features. Returns false if the pivot
    /// budget ran out.
    fn solve(&mut self, max_pivots: usize) -> Result<bool> {
        self.price();
        self.trace.push(self.objective());
        loop {
            if !self.dual_simplex(max_pivots)? {
                return Ok(false);
            }
            let added = self.add_violated_features();
            if added == 0 {
                self.refactor()?;
                self.price();
                return Ok(true);
            }
            self.rounds += 1;
        }
    }

    /// Appends rows for the most violated feature constraints
    /// `|sum_i a_i y_i x_ij| <= 1`, with their slacks basic.
    fn add_violated_features(&mut self) -> usize {
        let alpha_vals: Vec<f64> = (0..self.alpha.len())
            .map(|i| match self.alpha[i] {
                State::Basic(r) => self.xb[r],
                State::Lower => 0.0,
                State::Upper => self.c,
            })
            .collect();
        let ya: Vec<f64> = alpha_vals.iter().zip(self.y).map(|(a, y)| a * y).collect();
        let mut violated: Vec<(usize, f64)> = (0..self.x.ncols())
            .filter(|&j| !self.in_rows[j])
            .map(|j| {
                let g: f64 = self.x.column(j).iter().zip(&ya).map(|(x, a)| x * a).sum();
                (j, g.abs())
            })
            .filter(|&(_, g)| g > 1.0 + FEATURE_TOL)
            .collect();
        violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        violated.truncate(FEATURE_BATCH);
        if violated.is_empty() {
            return 0;
        }

        let old_m = self.m();
        let q = violated.len();
        let new_m = old_m + q;
        // [[B, 0], [R, -I]]^-1 = [[B^-1, 0], [R B^-1, -I]]
        let mut binv = vec![0.0; new_m * new_m];
        for r in 0..old_m {
            binv[r * new_m..r * new_m + old_m].copy_from_slice(&self.binv[r * old_m..(r + 1) * old_m]);
        }
        for (t, &(j, _)) in violated.iter().enumerate() {
            let row = old_m + t;
            // R row: entries of the new constraint on the old basic columns
            let rrow: Vec<f64> = self
                .basis
                .iter()
                .map(|&v| match v {
                    Var::Alpha(i) => self.y[i] * self.x[(i, j)],
                    _ => 0.0,
                })
                .collect();
            for col in 0..old_m {
                let mut s = 0.0;
                for (k, rv) in rrow.iter().enumerate() {
                    if *rv != 0.0 {
                        s += rv * self.binv[k * old_m + col];
                    }
                }
                binv[row * new_m + col] = s;
            }
            binv[row * new_m + row] = -1.0;
            let value: f64 = self.x.column(j).iter().zip(&ya).map(|(x, a)| x * a).sum();
            self.xb.push(value);
            self.rows.push(j);
            self.in_rows[j] = true;
            self.slack.push(State::Basic(row));
            self.basis.push(Var::Slack(row));
            self.pi.push(0.0);
        }
        self.binv = binv;
        q
    }

    /// Runs dual simplex pivots until the current rows are primal feasible.
    fn dual_simplex(&mut self, max_pivots: usize) -> Result<bool> {
        let mut retried = false;
        loop {
            if self.pivots >= max_pivots {
                return Ok(false);
            }
            // leaving row: dual steepest edge, violation^2 / ||row of B^-1||^2
            let m = self.m();
            let mut leave = None;
            let mut best = 0.0;
            let tol = PRIMAL_TOL * self.c.max(1.0);
            for (r, &v) in self.basis.iter().enumerate() {
                let (l, u) = self.bounds(v);
                let viol = (l - self.xb[r]).max(self.xb[r] - u);
                if viol > tol {
                    let norm: f64 = self.binv[r * m..(r + 1) * m].iter().map(|b| b * b).sum();
                    let score = viol * viol / norm;
                    if score > best {
                        best = score;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(true);
            };
            let leaving = self.basis[r];
            let (l, u) = self.bounds(leaving);
            let to_lower = self.xb[r] < l;
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();

            // pivot row over alpha columns: y_i (rho_0 + sum rho_r x_ir)
            let g = self.decision_values(&rho);
            let mut candidates: Vec<(Var, f64, f64, f64)> = Vec::new();
            let mut consider = |v: Var, state: State, a_r: f64, d: f64| {
                let eligible = match (state, to_lower) {
                    (State::Lower, true) => a_r < -PIVOT_TOL,
                    (State::Upper, true) => a_r > PIVOT_TOL,
                    (State::Lower, false) => a_r > PIVOT_TOL,
                    (State::Upper, false) => a_r < -PIVOT_TOL,
                    (State::Basic(_), _) => false,
                };
                if eligible {
                    // distance of d from zero on its feasible side; a d
                    // slightly on the wrong side counts as zero
                    let gap = if state == State::Upper { d } else { -d };
                    candidates.push((v, a_r, d, gap.max(0.0)));
                }
            };
            for i in 0..self.alpha.len() {
                let st = self.alpha[i];
                if !matches!(st, State::Basic(_)) {
                    consider(Var::Alpha(i), st, self.y[i] * g[i], self.d_alpha[i]);
                }
            }
            for rr in 1..m {
                let st = self.slack[rr - 1];
                if !matches!(st, State::Basic(_)) {
                    consider(Var::Slack(rr), st, -rho[rr], self.pi[rr]);
                }
            }
            if candidates.is_empty() {
                if retried {
                    return Err(Error::Infeasible(
                        "L1-SVM dual simplex found no entering column".into(),
                    ));
                }
                retried = true;
                self.refactor()?;
                self.price();
                continue;
            }
            retried = false;

            // Harris two-pass ratio test
            let bound = candidates
                .iter()
                .map(|&(_, a, _, gap)| (gap + DUAL_TOL) / a.abs())
                .fold(f64::INFINITY, f64::min);
            let &(entering, a_rq, d_q, _) = candidates
                .iter()
                .filter(|&&(_, a, _, gap)| gap / a.abs() <= bound)
                .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
                .expect("the minimizing candidate passes its own bound");

            let col = self.ftran(&self.column(entering));
            let target = if to_lower { l } else { u };
            let delta = (self.xb[r] - target) / a_rq;
            let entering_value = self.nonbasic_value(entering) + delta;
            for (xv, cv) in self.xb.iter_mut().zip(&col) {
                *xv -= delta * cv;
            }
            self.xb[r] = entering_value;

            // basis inverse update around pivot element col[r]
            let piv = col[r];
            for j in 0..m {
                self.binv[r * m + j] /= piv;
            }
            for i in 0..m {
                if i != r && col[i] != 0.0 {
                    let f = col[i];
                    for j in 0..m {
                        self.binv[i * m + j] -= f * self.binv[r * m + j];
                    }
                }
            }
            // reduced costs move along the pivot row: d_j -= theta * alpha_rj
            let theta = d_q / a_rq;
            for i in 0..self.alpha.len() {
                if !matches!(self.alpha[i], State::Basic(_)) {
                    self.d_alpha[i] -= theta * self.y[i] * g[i];
                }
            }
            for (p, rh) in self.pi.iter_mut().zip(&rho) {
                *p += theta * rh;
            }
            match entering {
                Var::Alpha(i) => self.d_alpha[i] = 0.0,
                Var::Slack(rr) => self.pi[rr] = 0.0,
                Var::Art => {}
            }
            if let Var::Alpha(i) = leaving {
                self.d_alpha[i] = -theta;
            }

            self.set_state(leaving, if to_lower { State::Lower } else { State::Upper });
            self.set_state(entering, State::Basic(r));
            self.basis[r] = entering;
            self.pivots += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY.max(m) {
                self.refactor()?;
                self.price();
            }
            self.trace.push(self.objective());
        }
    }

    fn set_c(&mut self, c: f64) -> Result<()> {
        self.c = c;
        self.refactor()?;
        self.trace.clear();
        self.pivots = 0;
        self.rounds = 0;
        Ok(())
    }

    fn solution(&self, converged: bool) -> L1Solution {
        let (w, b) = self.primal();
        let objective = l1_svm_objective(self.x, self.y, &w, b, self.c);
        L1Solution {
            w,
            b,
            objective,
            stats: SolveStats {
                pivots: self.pivots,
                rounds: self.rounds,
                objective_trace: self.trace.clone(),
                active_rows: self.rows.len(),
                converged,
            },
        }
    }

    fn primal(&self) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.x.ncols()];
        for (r, &j) in self.rows.iter().enumerate() {
            w[j] = self.pi[r + 1];
        }
        (w, self.pi[0])
    }
}
