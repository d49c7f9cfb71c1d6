//! Convex QP solver and branch-and-bound layer for binary variables.
//!
//! The QP engine is an operator-splitting (ADMM) method on the form
//! `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u`, where `A` stacks the structural rows
//! followed by one identity row per variable carrying its bounds. The KKT
//! system is factored once per problem structure; objective and bound
//! updates — multiplier terms, proximal centers, branching fixes, security
//! tightenings — reuse the factorization, which keeps warm-started re-solves
//! cheap across both coordination iterations and search-tree nodes.
//!
//! Convergence is declared on unscaled residuals, then an active-set polish
//! solve sharpens the iterate to equality-solve accuracy. Divergence of the
//! dual iterate produces an infeasibility certificate instead of an error.

use crate::formulations::QuadraticProgram;
use crate::linsolve::{LinsolveError, LuFactor, Mat};
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Absolute primal feasibility target.
pub const PRIMAL_TOL: f64 = 1e-6;
/// Relative stationarity target.
pub const DUAL_TOL: f64 = 1e-6;
/// Iteration cap for one QP solve.
pub const MAX_QP_ITER: usize = 200_000;
/// Integrality tolerance for binaries.
pub const INT_TOL: f64 = 1e-5;

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const CHECK_EVERY: usize = 25;
const RUIZ_ITERS: usize = 10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Build(String),
    #[error(transparent)]
    Numerical(#[from] LinsolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// Result of a QP or MIQP solve.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Multipliers of the structural rows.
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Dual-divergence score when infeasibility was certified (smaller is a
    /// sharper certificate).
    pub certificate: Option<f64>,
    /// Search statistics of a branch-and-bound solve.
    pub nodes: usize,
    /// Best proven lower bound of a branch-and-bound solve.
    pub best_bound: f64,
}

/// Tunables for a single solve.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Relative optimality gap for branch-and-bound.
    pub gap: f64,
    pub max_nodes: usize,
    pub time_limit: Option<Duration>,
    /// Penalty re-tuning (with refactorization) during the solve.
    pub adapt_rho: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iter: MAX_QP_ITER, gap: 0.0, max_nodes: 20_000, time_limit: None, adapt_rho: true }
    }
}

/// Persistent solver state for one program structure.
pub struct ZoneSolver {
    qp: QuadraticProgram,
    n: usize,
    /// structural rows + one bound row per variable
    m: usize,
    m_struct: usize,
    p: Mat,
    a: Mat,
    /// Unscaled working bounds (structural rows then variable bounds).
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Ruiz scalings: x = d ∘ x̂, row scale e, cost scale c.
    d: Vec<f64>,
    e: Vec<f64>,
    cost_scale: f64,
    rho_base: f64,
    rho: Vec<f64>,
    /// Largest structural coefficient magnitude, for certificate scaling.
    a_max: f64,
    kkt: LuFactor,
    /// Scaled iterates carried across solves (warm starts).
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
    binaries: Vec<usize>,
    /// Bounds to restore when branching fixes are undone.
    relaxed_bounds: Vec<(f64, f64)>,
}

impl ZoneSolver {
    pub fn new(qp: &QuadraticProgram) -> Result<Self, SolverError> {
        qp.validate().map_err(SolverError::Build)?;
        let n = qp.n_vars();
        if n == 0 {
            return Err(SolverError::Build("no variables".into()));
        }
        let m_struct = qp.rows.len();
        let m = m_struct + n;
        let mut p = Mat::zeros(n, n);
        for &(i, j, c) in &qp.quad {
            if i == j {
                p.add_at(i, i, 2.0 * c);
            } else {
                p.add_at(i, j, c);
                p.add_at(j, i, c);
            }
        }
        let mut a = Mat::zeros(m, n);
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for (r, row) in qp.rows.iter().enumerate() {
            for &(i, c) in &row.terms {
                a.add_at(r, i, c);
            }
            lo.push(row.lo);
            hi.push(row.hi);
        }
        for i in 0..n {
            a.set(m_struct + i, i, 1.0);
            lo.push(qp.vars[i].lb);
            hi.push(qp.vars[i].ub);
        }

        // Ruiz equilibration of the stacked [P; A] columns and A rows.
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        for _ in 0..RUIZ_ITERS {
            for j in 0..n {
                let mut nrm = 0.0_f64;
                for i in 0..n {
                    nrm = nrm.max((p.at(i, j) * d[i] * d[j]).abs());
                }
                for r in 0..m {
                    nrm = nrm.max((a.at(r, j) * e[r] * d[j]).abs());
                }
                if nrm > 0.0 {
                    d[j] /= nrm.sqrt();
                }
            }
            for r in 0..m {
                let mut nrm = 0.0_f64;
                for j in 0..n {
                    nrm = nrm.max((a.at(r, j) * e[r] * d[j]).abs());
                }
                if nrm > 0.0 {
                    e[r] /= nrm.sqrt();
                }
            }
        }
        let mut pmax = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                pmax = pmax.max((p.at(i, j) * d[i] * d[j]).abs());
            }
        }
        let qmax = qp.lin.iter().enumerate().fold(0.0_f64, |acc, (i, &q)| acc.max((q * d[i]).abs()));
        let cost_scale = 1.0 / pmax.max(qmax).max(1.0);

        let binaries = qp.binaries();
        let relaxed_bounds = binaries.iter().map(|&b| (qp.vars[b].lb, qp.vars[b].ub)).collect();
        let a_max = a.max_abs().max(1.0);

        let mut solver = ZoneSolver {
            qp: qp.clone(),
            n,
            m,
            m_struct,
            p,
            a,
            lo,
            hi,
            d,
            e,
            cost_scale,
            rho_base: 0.1,
            rho: vec![0.0; m],
            a_max,
            kkt: LuFactor::new(&Mat::identity(1))?,
            xs: vec![0.0; n],
            ys: vec![0.0; m],
            zs: vec![0.0; m],
            binaries,
            relaxed_bounds,
        };
        solver.set_rho_vector();
        solver.refactor()?;
        Ok(solver)
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn program(&self) -> &QuadraticProgram {
        &self.qp
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    fn set_rho_vector(&mut self) {
        for r in 0..self.m {
            let eq = self.lo[r].is_finite() && self.lo[r] == self.hi[r];
            self.rho[r] = if eq { self.rho_base * 1e3 } else { self.rho_base };
        }
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let dim = self.n + self.m;
        let mut k = Mat::zeros(dim, dim);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.cost_scale * self.p.at(i, j) * self.d[i] * self.d[j];
                if v != 0.0 {
                    k.set(i, j, v);
                }
            }
            k.add_at(i, i, SIGMA);
        }
        for r in 0..self.m {
            for j in 0..self.n {
                let v = self.a.at(r, j) * self.e[r] * self.d[j];
                if v != 0.0 {
                    k.set(self.n + r, j, v);
                    k.set(j, self.n + r, v);
                }
            }
            k.set(self.n + r, self.n + r, -1.0 / self.rho[r]);
        }
        self.kkt = LuFactor::new(&k)?;
        Ok(())
    }

    /// Replaces the linear objective (and constant), e.g. with multiplier and
    /// proximal-center terms folded in. The factorization is untouched.
    pub fn set_lin(&mut self, lin: &[f64], constant: f64) {
        assert_eq!(lin.len(), self.n, "linear term dimension");
        self.qp.lin.copy_from_slice(lin);
        self.qp.constant = constant;
    }

    /// Tightens or restores one variable's bounds. The factorization is
    /// untouched.
    pub fn set_var_bounds(&mut self, var: usize, lb: f64, ub: f64) {
        self.qp.vars[var].lb = lb;
        self.qp.vars[var].ub = ub;
        self.lo[self.m_struct + var] = lb;
        self.hi[self.m_struct + var] = ub;
    }

    pub fn var_bounds(&self, var: usize) -> (f64, f64) {
        (self.lo[self.m_struct + var], self.hi[self.m_struct + var])
    }

    /// Fixes every binary to the given 0/1 values.
    pub fn fix_binaries(&mut self, values: &[f64]) {
        let bins = self.binaries.clone();
        for (k, &b) in bins.iter().enumerate() {
            let v = values[k].round().clamp(0.0, 1.0);
            self.set_var_bounds(b, v, v);
        }
    }

    /// Restores every binary's original relaxation bounds.
    pub fn release_binaries(&mut self) {
        let bins = self.binaries.clone();
        let relaxed = self.relaxed_bounds.clone();
        for (&b, &(lb, ub)) in bins.iter().zip(&relaxed) {
            self.set_var_bounds(b, lb, ub);
        }
    }

    pub fn reset_warm_start(&mut self) {
        self.xs.iter_mut().for_each(|v| *v = 0.0);
        self.ys.iter_mut().for_each(|v| *v = 0.0);
        self.zs.iter_mut().for_each(|v| *v = 0.0);
    }

    fn scaled_q(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.cost_scale * self.qp.lin[i] * self.d[i]).collect()
    }

    fn unscale_x(&self, xs: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| xs[i] * self.d[i]).collect()
    }

    fn unscale_y(&self, ys: &[f64]) -> Vec<f64> {
        (0..self.m).map(|r| ys[r] * self.e[r] / self.cost_scale).collect()
    }

    fn unscale_z(&self, zs: &[f64]) -> Vec<f64> {
        (0..self.m).map(|r| zs[r] / self.e[r]).collect()
    }

    /// One operator-splitting run from the current warm start.
    pub fn solve(&mut self, opts: &SolveOptions) -> Result<QpSolution, SolverError> {
        // quick inconsistency check (branching can only produce [0,0]/[1,1],
        // but caller-set bounds may cross)
        for r in 0..self.m {
            if self.lo[r] > self.hi[r] {
                return Ok(self.infeasible_solution(0, 0.0));
            }
        }
        // domain-propagation screen: interval arithmetic over the rows, with
        // a few tightening passes so chains through equalities (a fixed
        // binary implying an indicator, the indicator breaking a window row)
        // are caught without a single iteration. Conservative margins; any
        // marginal case falls through to the certified path below.
        if self.propagation_detects_infeasible() {
            return Ok(self.infeasible_solution(0, 0.0));
        }
        let q_scaled = self.scaled_q();
        let l_scaled: Vec<f64> = (0..self.m).map(|r| self.lo[r] * self.e[r]).collect();
        let u_scaled: Vec<f64> = (0..self.m).map(|r| self.hi[r] * self.e[r]).collect();

        let mut x = self.xs.clone();
        let mut y = self.ys.clone();
        let mut z: Vec<f64> = self.zs.iter().enumerate().map(|(r, &v)| v.clamp(l_scaled[r], u_scaled[r])).collect();

        let mut rhs = vec![0.0; self.n + self.m];
        let mut y_checkpoint = y.clone();
        let mut adaptions = 0usize;
        let mut iter = 0usize;
        let max_iter = opts.max_iter.max(1);
        let mut status = SolveStatus::IterationLimit;
        let mut certificate = None;

        while iter < max_iter {
            iter += 1;
            for i in 0..self.n {
                rhs[i] = SIGMA * x[i] - q_scaled[i];
            }
            for r in 0..self.m {
                rhs[self.n + r] = z[r] - y[r] / self.rho[r];
            }
            let sol = self.kkt.solve(&rhs)?;
            let (xt, nu) = sol.split_at(self.n);
            for r in 0..self.m {
                let zt = z[r] + (nu[r] - y[r]) / self.rho[r];
                let z_relaxed = ALPHA * zt + (1.0 - ALPHA) * z[r];
                let z_new = (z_relaxed + y[r] / self.rho[r]).clamp(l_scaled[r], u_scaled[r]);
                y[r] += self.rho[r] * (z_relaxed - z_new);
                z[r] = z_new;
            }
            for i in 0..self.n {
                x[i] = ALPHA * xt[i] + (1.0 - ALPHA) * x[i];
            }

            if iter % CHECK_EVERY == 0 || iter == max_iter {
                let xu = self.unscale_x(&x);
                let yu = self.unscale_y(&y);
                let (rp, rd) = self.full_residuals(&xu, &yu);
                if rp.0 <= PRIMAL_TOL && rd.0 <= DUAL_TOL * rd.1 {
                    status = SolveStatus::Optimal;
                    break;
                }
                // infeasibility: a normalized dual direction whose range
                // support is negative with margin while Aᵀδy vanishes
                if rp.0 > PRIMAL_TOL {
                    let dy_raw: Vec<f64> = (0..self.m).map(|r| (y[r] - y_checkpoint[r]) * self.e[r]).collect();
                    let dy_inf = dy_raw.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
                    if dy_inf > 1e-10 {
                        let dy: Vec<f64> = dy_raw.iter().map(|&v| v / dy_inf).collect();
                        let at_dy = self.a.tr_matvec(&dy);
                        let at_norm = at_dy.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
                        let mut support = 0.0;
                        let mut bscale = 1.0_f64;
                        let mut unbounded = false;
                        for r in 0..self.m {
                            if self.lo[r].is_finite() {
                                bscale = bscale.max(self.lo[r].abs());
                            }
                            if self.hi[r].is_finite() {
                                bscale = bscale.max(self.hi[r].abs());
                            }
                            if dy[r] > 0.0 {
                                if self.hi[r].is_finite() {
                                    support += self.hi[r] * dy[r];
                                } else {
                                    unbounded = true;
                                }
                            } else if dy[r] < 0.0 {
                                if self.lo[r].is_finite() {
                                    support += self.lo[r] * dy[r];
                                } else {
                                    unbounded = true;
                                }
                            }
                        }
                        if !unbounded && at_norm <= 1e-6 * self.a_max && support <= -1e-6 * bscale {
                            status = SolveStatus::Infeasible;
                            certificate = Some(at_norm);
                            break;
                        }
                    }
                }
                y_checkpoint.copy_from_slice(&y);

                // penalty re-tuning with refactorization
                if opts.adapt_rho && adaptions < 10 && iter % 200 == 0 {
                    let ratio = (rp.0 / rp.1.max(1e-12)) / (rd.0 / rd.1.max(1e-12)).max(1e-12);
                    if !(0.1..=10.0).contains(&ratio) {
                        let factor = ratio.sqrt().clamp(1e-3, 1e3);
                        self.rho_base = (self.rho_base * factor).clamp(1e-6, 1e6);
                        self.set_rho_vector();
                        self.refactor()?;
                        adaptions += 1;
                    }
                }
            }
        }

        self.xs.copy_from_slice(&x);
        self.ys.copy_from_slice(&y);
        self.zs.copy_from_slice(&z);

        if status == SolveStatus::Infeasible {
            return Ok(self.infeasible_solution(iter, certificate.unwrap_or(f64::NAN)));
        }

        let mut xu = self.unscale_x(&x);
        let mut yu = self.unscale_y(&y);
        let zu = self.unscale_z(&z);
        if let Some((px, py)) = self.polish(&xu, &yu, &zu)? {
            xu = px;
            yu = py;
        }
        let (rp, rd) = self.full_residuals(&xu, &yu);
        let polished_ok = rp.0 <= PRIMAL_TOL && rd.0 <= DUAL_TOL * rd.1;
        let final_status = if polished_ok { SolveStatus::Optimal } else { status };
        Ok(QpSolution {
            objective: self.qp.objective_value(&xu),
            x: xu,
            status: final_status,
            duals: yu[..self.m_struct].to_vec(),
            primal_residual: rp.0,
            dual_residual: rd.0,
            iterations: iter,
            certificate: None,
            nodes: 0,
            best_bound: f64::NEG_INFINITY,
        })
    }

    /// Interval-arithmetic presolve over the structural rows. Starting from
    /// the current variable bounds, each pass computes every row's reachable
    /// activity interval and, where the interval pins a variable, narrows its
    /// working copy of the bounds; the narrowed bounds feed the next pass.
    /// Returns true only when a row's interval provably misses its right-hand
    /// side by more than a scaled margin, so a `true` is always safe to act
    /// on. The working bounds are a screen, never handed to the iteration.
    fn propagation_detects_infeasible(&self) -> bool {
        let mut wlb: Vec<f64> = (0..self.n).map(|j| self.lo[self.m_struct + j]).collect();
        let mut wub: Vec<f64> = (0..self.n).map(|j| self.hi[self.m_struct + j]).collect();
        // contribution of one term to the row activity interval
        let term = |coef: f64, lb: f64, ub: f64| -> (f64, f64) {
            let (a, b) = (coef * lb, coef * ub);
            (a.min(b), a.max(b))
        };
        for _pass in 0..3 {
            let mut narrowed = false;
            for (r, row) in self.qp.rows.iter().enumerate() {
                let (rlo, rhi) = (self.lo[r], self.hi[r]);
                // scale by the finite bounds only: a one-sided row must not
                // inherit an infinite margin from its open side
                let bscale = {
                    let a = if rlo.is_finite() { rlo.abs() } else { 0.0 };
                    let b = if rhi.is_finite() { rhi.abs() } else { 0.0 };
                    a.max(b)
                };
                let margin = 1e-6 * (1.0 + bscale);
                // activity interval as a finite core plus counts of infinite
                // ends, so excluding one term stays well defined
                let (mut sum_min, mut sum_max) = (0.0_f64, 0.0_f64);
                let (mut inf_min, mut inf_max) = (0_usize, 0_usize);
                for &(var, coef) in &row.terms {
                    if coef == 0.0 {
                        continue;
                    }
                    let (tmin, tmax) = term(coef, wlb[var], wub[var]);
                    if tmin == f64::NEG_INFINITY {
                        inf_min += 1;
                    } else {
                        sum_min += tmin;
                    }
                    if tmax == f64::INFINITY {
                        inf_max += 1;
                    } else {
                        sum_max += tmax;
                    }
                }
                let act_min = if inf_min > 0 { f64::NEG_INFINITY } else { sum_min };
                let act_max = if inf_max > 0 { f64::INFINITY } else { sum_max };
                if act_min > rhi + margin || act_max < rlo - margin {
                    return true;
                }
                // narrow each variable against the rest of the row
                for &(var, coef) in &row.terms {
                    if coef == 0.0 {
                        continue;
                    }
                    let (tmin, tmax) = term(coef, wlb[var], wub[var]);
                    let rest_min = if inf_min > usize::from(tmin == f64::NEG_INFINITY) {
                        f64::NEG_INFINITY
                    } else if tmin == f64::NEG_INFINITY {
                        sum_min
                    } else {
                        sum_min - tmin
                    };
                    let rest_max = if inf_max > usize::from(tmax == f64::INFINITY) {
                        f64::INFINITY
                    } else if tmax == f64::INFINITY {
                        sum_max
                    } else {
                        sum_max - tmax
                    };
                    // coef * x must land inside [rlo - rest_max, rhi - rest_min]
                    let scaled_lo = rlo - rest_max - margin;
                    let scaled_hi = rhi - rest_min + margin;
                    let (cand_lo, cand_hi) = if coef > 0.0 {
                        (scaled_lo / coef, scaled_hi / coef)
                    } else {
                        (scaled_hi / coef, scaled_lo / coef)
                    };
                    if cand_lo.is_finite() && cand_lo > wlb[var] {
                        wlb[var] = cand_lo;
                        narrowed = true;
                    }
                    if cand_hi.is_finite() && cand_hi < wub[var] {
                        wub[var] = cand_hi;
                        narrowed = true;
                    }
                    if wlb[var] > wub[var] + margin.max(1e-9) {
                        return true;
                    }
                }
            }
            if !narrowed {
                break;
            }
        }
        false
    }

    fn infeasible_solution(&self, iterations: usize, certificate: f64) -> QpSolution {
        QpSolution {
            x: vec![0.0; self.n],
            objective: f64::INFINITY,
            status: SolveStatus::Infeasible,
            duals: vec![0.0; self.m_struct],
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations,
            certificate: Some(certificate),
            nodes: 0,
            best_bound: f64::INFINITY,
        }
    }

    /// (violation, scale) pairs for primal feasibility and stationarity.
    fn full_residuals(&self, x: &[f64], y: &[f64]) -> ((f64, f64), (f64, f64)) {
        let ax = self.a.matvec(x);
        let mut viol = 0.0_f64;
        let mut pscale = 1.0_f64;
        for r in 0..self.m {
            let v = (self.lo[r] - ax[r]).max(ax[r] - self.hi[r]).max(0.0);
            viol = viol.max(v);
            pscale = pscale.max(ax[r].abs());
        }
        let px = self.p.matvec(x);
        let aty = self.a.tr_matvec(y);
        let mut stat = 0.0_f64;
        let mut dscale = 1.0_f64;
        for i in 0..self.n {
            stat = stat.max((px[i] + self.qp.lin[i] + aty[i]).abs());
            dscale = dscale.max(px[i].abs()).max(self.qp.lin[i].abs()).max(aty[i].abs());
        }
        ((viol, pscale), (stat, dscale))
    }

    /// Equality solve on the estimated active set; returns an improved
    /// (x, y) when it is feasible and sharper than the input.
    fn polish(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>)>, SolverError> {
        const REG: f64 = 1e-9;
        let mut active: Vec<(usize, f64)> = Vec::new();
        for r in 0..self.m {
            let eq = self.lo[r] == self.hi[r];
            if eq && self.lo[r].is_finite() {
                active.push((r, self.lo[r]));
            } else if y[r] < -1e-9 && self.lo[r].is_finite() {
                active.push((r, self.lo[r]));
            } else if y[r] > 1e-9 && self.hi[r].is_finite() {
                active.push((r, self.hi[r]));
            } else if self.lo[r].is_finite() && (z[r] - self.lo[r]).abs() <= 1e-7 * (1.0 + self.lo[r].abs()) {
                active.push((r, self.lo[r]));
            } else if self.hi[r].is_finite() && (z[r] - self.hi[r]).abs() <= 1e-7 * (1.0 + self.hi[r].abs()) {
                active.push((r, self.hi[r]));
            }
        }
        let na = active.len();
        let dim = self.n + na;
        let mut k = Mat::zeros(dim, dim);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.p.at(i, j);
                if v != 0.0 {
                    k.set(i, j, v);
                }
            }
            k.add_at(i, i, REG);
        }
        for (ai, &(r, _)) in active.iter().enumerate() {
            for j in 0..self.n {
                let v = self.a.at(r, j);
                if v != 0.0 {
                    k.set(self.n + ai, j, v);
                    k.set(j, self.n + ai, v);
                }
            }
            k.set(self.n + ai, self.n + ai, -REG);
        }
        let mut rhs = vec![0.0; dim];
        for i in 0..self.n {
            rhs[i] = -self.qp.lin[i];
        }
        for (ai, &(_, b)) in active.iter().enumerate() {
            rhs[self.n + ai] = b;
        }
        let factor = match LuFactor::new(&k) {
            Ok(f) => f,
            Err(_) => return Ok(None),
        };
        let sol = match factor.solve(&rhs) {
            Ok(s) => s,
            Err(_) => return Ok(None),
        };
        let xp = sol[..self.n].to_vec();
        let mut yp = vec![0.0; self.m];
        for (ai, &(r, _)) in active.iter().enumerate() {
            yp[r] = sol[self.n + ai];
        }
        let (rp_new, rd_new) = self.full_residuals(&xp, &yp);
        let (rp_old, rd_old) = self.full_residuals(x, y);
        let better = rp_new.0 <= rp_old.0.max(PRIMAL_TOL) && rd_new.0 <= rd_old.0.max(DUAL_TOL * rd_new.1);
        if better {
            Ok(Some((xp, yp)))
        } else {
            Ok(None)
        }
    }
}

/// Convex solve with binaries left at their current (relaxed or fixed)
/// bounds.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution, SolverError> {
    solve_qp_opts(qp, &SolveOptions::default())
}

pub fn solve_qp_opts(qp: &QuadraticProgram, opts: &SolveOptions) -> Result<QpSolution, SolverError> {
    let mut solver = ZoneSolver::new(qp)?;
    solver.solve(opts)
}

/// Fractional distance of the binary block from integrality.
fn most_fractional(x: &[f64], binaries: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &b in binaries {
        let frac = (x[b] - x[b].round()).abs();
        if frac > INT_TOL {
            let better = match best {
                None => true,
                Some((_, bf)) => frac > bf + 1e-12,
            };
            if better {
                best = Some((b, frac));
            }
        }
    }
    best
}

#[derive(PartialEq)]
struct NodeKey {
    bound: f64,
    id: usize,
}

impl Eq for NodeKey {}
impl Ord for NodeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap: invert for best-first (lowest bound,
        // then lowest id)
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for NodeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct BnbNode {
    fixes: Vec<(usize, f64)>,
    bound: f64,
}

/// Branch-and-bound over the binary variables: best-first on the relaxation
/// bound, most-fractional branching, down-branch first, deterministic
/// tie-breaking by node id.
pub fn solve_miqp(qp: &QuadraticProgram, gap: f64) -> Result<QpSolution, SolverError> {
    let mut solver = ZoneSolver::new(qp)?;
    let opts = SolveOptions { gap, ..SolveOptions::default() };
    solve_miqp_on(&mut solver, &opts)
}

/// Branch-and-bound on an existing solver (warm starts and bound edits are
/// preserved for the caller: binary bounds are restored on exit).
pub fn solve_miqp_on(solver: &mut ZoneSolver, opts: &SolveOptions) -> Result<QpSolution, SolverError> {
    let started = Instant::now();
    let binaries = solver.binaries().to_vec();
    if binaries.is_empty() {
        return solver.solve(opts);
    }
    let entry_bounds: Vec<(f64, f64)> = binaries.iter().map(|&b| solver.var_bounds(b)).collect();

    // nodes keep the caller's penalty-adaptation setting: a child whose
    // optimum sits far from the warm start can crawl for tens of thousands
    // of iterations under a mis-scaled penalty, and one refactorization is
    // far cheaper than that
    let node_opts = opts.clone();
    let root = solver.solve(opts)?;
    let mut nodes = 1usize;
    if root.status == SolveStatus::Infeasible {
        restore(solver, &binaries, &entry_bounds);
        return Ok(QpSolution { nodes, ..root });
    }

    // only genuinely free binaries are branchable; anything the caller fixed
    // (and anything a node fixes) sits at its bound only to solver precision,
    // and re-branching on it would stall the search without progress
    let free: Vec<usize> = binaries
        .iter()
        .zip(&entry_bounds)
        .filter(|(_, (lb, ub))| ub - lb > 0.5)
        .map(|(&b, _)| b)
        .collect();

    let mut incumbent: Option<QpSolution> = None;
    let mut best_bound = root.objective;
    if most_fractional(&root.x, &free).is_none() {
        let sol = QpSolution { nodes, best_bound, ..root };
        restore(solver, &binaries, &entry_bounds);
        return Ok(sol);
    }

    // rounding heuristic for an initial incumbent
    {
        let rounded: Vec<f64> = binaries.iter().map(|&b| root.x[b].round()).collect();
        for (k, &b) in binaries.iter().enumerate() {
            solver.set_var_bounds(b, rounded[k], rounded[k]);
        }
        let heur = solver.solve(&node_opts)?;
        nodes += 1;
        if heur.status == SolveStatus::Optimal {
            incumbent = Some(heur);
        }
        restore(solver, &binaries, &entry_bounds);
    }

    let mut heap: BinaryHeap<NodeKey> = BinaryHeap::new();
    let mut store: Vec<BnbNode> = Vec::new();
    store.push(BnbNode { fixes: Vec::new(), bound: root.objective });
    heap.push(NodeKey { bound: root.objective, id: 0 });
    let mut budget_hit = false;
    let mut dropped_unconverged = false;

    while let Some(key) = heap.pop() {
        best_bound = key.bound;
        let rel_gap = |inc: f64| (inc - best_bound) / inc.abs().max(1.0);
        if let Some(inc) = &incumbent {
            if rel_gap(inc.objective) <= opts.gap + 1e-9 {
                break;
            }
        }
        if nodes >= opts.max_nodes || opts.time_limit.is_some_and(|t| started.elapsed() > t) {
            budget_hit = true;
            break;
        }
        let node_ix = key.id;
        let fixes = store[node_ix].fixes.clone();
        restore(solver, &binaries, &entry_bounds);
        for &(var, val) in &fixes {
            solver.set_var_bounds(var, val, val);
        }
        let sol = solver.solve(&node_opts)?;
        nodes += 1;
        if sol.status == SolveStatus::Infeasible {
            continue;
        }
        // a node that ran out of iterations has no trustworthy objective:
        // it neither tightens the bound nor qualifies as an incumbent
        let converged = sol.status == SolveStatus::Optimal;
        let bound = if converged { sol.objective.max(store[node_ix].bound) } else { store[node_ix].bound };
        if let Some(inc) = &incumbent {
            if bound >= inc.objective - opts.gap * inc.objective.abs().max(1.0) - 1e-9 {
                continue;
            }
        }
        let free_here: Vec<usize> = free
            .iter()
            .copied()
            .filter(|b| !fixes.iter().any(|(v, _)| v == b))
            .collect();
        match most_fractional(&sol.x, &free_here) {
            None if converged => {
                let better = incumbent.as_ref().map_or(true, |inc| sol.objective < inc.objective - 1e-12);
                if better {
                    incumbent = Some(sol);
                }
            }
            None => {
                // integral point from an unconverged solve: discarding it may
                // hide the region's optimum, so the final answer loses its
                // proven-optimal claim
                dropped_unconverged = true;
            }
            Some((var, _)) => {
                for val in [0.0, 1.0] {
                    let mut child = fixes.clone();
                    child.push((var, val));
                    let id = store.len();
                    store.push(BnbNode { fixes: child, bound });
                    heap.push(NodeKey { bound, id });
                }
            }
        }
    }
    if heap.is_empty() && !dropped_unconverged {
        // tree exhausted: the incumbent is proven optimal
        if let Some(inc) = &incumbent {
            best_bound = inc.objective;
        }
    }
    restore(solver, &binaries, &entry_bounds);

    match incumbent {
        Some(mut sol) => {
            sol.nodes = nodes;
            sol.best_bound = best_bound.min(sol.objective);
            if budget_hit || dropped_unconverged {
                let inc_gap = (sol.objective - best_bound) / sol.objective.abs().max(1.0);
                if inc_gap > opts.gap + 1e-9 {
                    sol.status = SolveStatus::IterationLimit;
                }
            }
            Ok(sol)
        }
        None => {
            let mut sol = solver.infeasible_solution(0, f64::NAN);
            if budget_hit || dropped_unconverged {
                sol.status = SolveStatus::IterationLimit;
            }
            sol.nodes = nodes;
            sol.best_bound = best_bound;
            Ok(sol)
        }
    }
}

fn restore(solver: &mut ZoneSolver, binaries: &[usize], bounds: &[(f64, f64)]) {
    for (&b, &(lb, ub)) in binaries.iter().zip(bounds) {
        solver.set_var_bounds(b, lb, ub);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casefile::{BusRecord, GenRecord, LineRecord, RawCase};
    use crate::fixtures;
    use crate::formulations::{build_phase_angle_central, VarKind};
    use crate::network::Network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simplex_qp(n: usize) -> QuadraticProgram {
        let mut qp = QuadraticProgram::default();
        let vars: Vec<usize> = (0..n)
            .map(|i| qp.add_var(format!("x{i}"), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY))
            .collect();
        for &v in &vars {
            qp.add_quad(v, v, 1.0);
        }
        qp.add_eq("sum", vars.iter().map(|&v| (v, 1.0)).collect(), 1.0);
        qp
    }

    #[test]
    fn uniform_split_on_the_simplex() {
        let sol = solve_qp(&simplex_qp(3)).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        for i in 0..3 {
            assert!((sol.x[i] - 1.0 / 3.0).abs() <= 1e-6, "x{i} = {}", sol.x[i]);
        }
        assert!((sol.objective - 1.0 / 3.0).abs() <= 1e-6);
    }

    #[test]
    fn two_bus_dispatch_equalizes_marginal_cost() {
        // both gens at distinct buses, no binding line limit: marginal costs
        // 0.02·p1 + 10 = 0.04·p2 + 10 with p1 + p2 = 30 gives (20, 10)
        let case = RawCase {
            name: "ed2".into(),
            base_mva: 100.0,
            horizon: 1,
            load_profile: vec![1.0],
            buses: vec![BusRecord { id: 1, load: 0.0 }, BusRecord { id: 2, load: 30.0 }],
            lines: vec![LineRecord { from: 1, to: 2, x: 1.0, rating: 0.0, status: 1 }],
            generators: vec![
                GenRecord { bus: 1, pmin: 0.0, pmax: 100.0, c2: 0.01, c1: 10.0, c0: 0.0, ramp: None, min_up: None, min_down: None, startup: None },
                GenRecord { bus: 2, pmin: 0.0, pmax: 100.0, c2: 0.02, c1: 10.0, c0: 0.0, ramp: None, min_up: None, min_down: None, startup: None },
            ],
        };
        let net = Network::from_case(&case).unwrap();
        let qp = build_phase_angle_central(&net, 0, 0, &[]).unwrap();
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 20.0).abs() <= 1e-4, "p1 = {}", sol.x[0]);
        assert!((sol.x[1] - 10.0).abs() <= 1e-4, "p2 = {}", sol.x[1]);
    }

    #[test]
    fn bound_clipped_dispatch_hits_the_cheap_limit() {
        let net = Network::from_case(&fixtures::fig1_case()).unwrap();
        let qp = build_phase_angle_central(&net, 0, 0, &[]).unwrap();
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        // unconstrained marginal equality would ask the cheap unit for 61.25,
        // above its 60 MW limit: it clips there and the rest is 40
        assert!((sol.x[0] - 60.0).abs() <= 1e-3, "p1 = {}", sol.x[0]);
        assert!((sol.x[1] - 40.0).abs() <= 1e-3, "p2 = {}", sol.x[1]);
    }

    /// Brute-force oracle: try every subset of inequality rows as the active
    /// set, solve the equality-constrained system, keep the best feasible
    /// candidate.
    fn enumeration_oracle(qp: &QuadraticProgram) -> Option<f64> {
        let n = qp.n_vars();
        let mut p = Mat::zeros(n, n);
        for &(i, j, c) in &qp.quad {
            if i == j {
                p.add_at(i, i, 2.0 * c);
            } else {
                p.add_at(i, j, c);
                p.add_at(j, i, c);
            }
        }
        // constraint list: structural rows + bounds, each as (terms, lo, hi)
        let mut cons: Vec<(Vec<(usize, f64)>, f64, f64)> = Vec::new();
        for row in &qp.rows {
            cons.push((row.terms.clone(), row.lo, row.hi));
        }
        for (i, v) in qp.vars.iter().enumerate() {
            cons.push((vec![(i, 1.0)], v.lb, v.ub));
        }
        let feasible = |x: &[f64]| {
            cons.iter().all(|(terms, lo, hi)| {
                let v: f64 = terms.iter().map(|&(i, c)| c * x[i]).sum();
                v >= lo - 1e-7 && v <= hi + 1e-7
            })
        };
        let mut best: Option<f64> = None;
        let total = cons.len();
        for mask in 0u32..(1 << (2 * total)) {
            // each constraint: 0 inactive, 1 at lower, 2 at upper
            let mut sides = Vec::with_capacity(total);
            let mut m = mask;
            let mut valid = true;
            for k in 0..total {
                let s = m % 4;
                m /= 4;
                if s == 3 {
                    valid = false;
                    break;
                }
                let (_, lo, hi) = &cons[k];
                if s == 1 && !lo.is_finite() || s == 2 && !hi.is_finite() {
                    valid = false;
                    break;
                }
                sides.push(s);
            }
            if !valid || m > 0 {
                continue;
            }
            let act: Vec<(usize, f64)> = sides
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 0)
                .map(|(k, &s)| (k, if s == 1 { cons[k].1 } else { cons[k].2 }))
                .collect();
            let na = act.len();
            if na > n {
                continue;
            }
            let dim = n + na;
            let mut kk = Mat::zeros(dim, dim);
            for i in 0..n {
                for j in 0..n {
                    kk.set(i, j, p.at(i, j));
                }
                kk.add_at(i, i, 1e-10);
            }
            for (ai, &(k, _)) in act.iter().enumerate() {
                for &(i, c) in &cons[k].0 {
                    kk.add_at(n + ai, i, c);
                    kk.add_at(i, n + ai, c);
                }
                kk.add_at(n + ai, n + ai, -1e-10);
            }
            let mut rhs = vec![0.0; dim];
            for i in 0..n {
                rhs[i] = -qp.lin[i];
            }
            for (ai, &(_, b)) in act.iter().enumerate() {
                rhs[n + ai] = b;
            }
            let Ok(f) = LuFactor::new(&kk) else { continue };
            let Ok(sol) = f.solve(&rhs) else { continue };
            let x = &sol[..n];
            if feasible(x) {
                let obj = qp.objective_value(x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        best
    }

    #[test]
    fn random_qps_match_active_set_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..12 {
            let n = 2 + case % 3;
            let mut qp = QuadraticProgram::default();
            for i in 0..n {
                let lb = rng.gen_range(-2.0..0.0);
                let ub = rng.gen_range(0.5..2.5);
                qp.add_var(format!("x{i}"), VarKind::Continuous, lb, ub);
            }
            for i in 0..n {
                qp.add_quad(i, i, rng.gen_range(0.2..2.0));
                qp.add_lin(i, rng.gen_range(-2.0..2.0));
            }
            let terms: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.gen_range(-1.0..1.5))).collect();
            qp.add_row("r0", terms, -0.5, rng.gen_range(0.5..1.5));
            let sol = solve_qp(&qp).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
            let oracle = enumeration_oracle(&qp).expect("oracle found a feasible point");
            assert!(
                (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                "case {case}: solver {} vs oracle {}",
                sol.objective,
                oracle
            );
        }
    }

    #[test]
    fn crossed_bounds_and_tight_line_are_infeasible() {
        let mut qp = QuadraticProgram::default();
        let x = qp.add_var("x", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        qp.add_quad(x, x, 1.0);
        qp.add_row("ge2", vec![(x, 1.0)], 2.0, f64::INFINITY);
        qp.add_row("le1", vec![(x, 1.0)], f64::NEG_INFINITY, 1.0);
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.certificate.is_some());

        // 10 MW of load behind a 5 MW line
        let net = Network::from_case(&fixtures::two_bus_case(10.0, 0.5, 5.0)).unwrap();
        let qp2 = build_phase_angle_central(&net, 0, 0, &[0]).unwrap();
        let sol2 = solve_qp(&qp2).unwrap();
        assert_eq!(sol2.status, SolveStatus::Infeasible);
    }

    #[test]
    fn fixed_gate_chain_is_screened_without_iterating() {
        // the shortfall is only visible after the one-sided gate row has
        // pinned p to zero, so it takes a propagation pass, not a single
        // solver iteration, to prove there is no point in starting
        let build = |u_fix: f64, w_cap: f64| {
            let mut qp = QuadraticProgram::default();
            let u = qp.add_var("u", VarKind::Continuous, u_fix, u_fix);
            let p = qp.add_var("p", VarKind::Continuous, 0.0, 40.0);
            let w = qp.add_var("w", VarKind::Continuous, 0.0, w_cap);
            qp.add_quad(p, p, 1.0);
            qp.add_quad(w, w, 1.0);
            qp.add_quad(u, u, 1.0);
            qp.add_row("gate", vec![(p, 1.0), (u, -40.0)], f64::NEG_INFINITY, 0.0);
            qp.add_eq("serve", vec![(p, 1.0), (w, 1.0)], 42.0);
            qp
        };
        let off = solve_qp(&build(0.0, 4.0)).unwrap();
        assert_eq!(off.status, SolveStatus::Infeasible);
        assert_eq!(off.iterations, 0);

        let on = solve_qp(&build(1.0, 4.0)).unwrap();
        assert_eq!(on.status, SolveStatus::Optimal);
        assert!((on.x[1] + on.x[2] - 42.0).abs() <= 1e-6);
    }

    #[test]
    fn iteration_cap_is_honored() {
        let opts = SolveOptions { max_iter: 3, adapt_rho: false, ..SolveOptions::default() };
        let sol = solve_qp_opts(&simplex_qp(3), &opts).unwrap();
        assert!(sol.iterations <= 3);
        assert_ne!(sol.status, SolveStatus::Infeasible);
        assert_eq!(sol.x.len(), 3);
    }

    fn toy_uc_qp(demand: [f64; 2]) -> QuadraticProgram {
        // three units, two periods; commitment decided per period
        let pmin = [10.0, 5.0, 2.0];
        let pmax = [50.0, 30.0, 15.0];
        let c1 = [10.0, 14.0, 20.0];
        let c0 = [40.0, 15.0, 5.0];
        let mut qp = QuadraticProgram::default();
        for t in 0..2 {
            let mut bal = Vec::new();
            for g in 0..3 {
                let u = qp.add_var(format!("u[g{g}][t{t}]"), VarKind::Binary, 0.0, 1.0);
                let p = qp.add_var(format!("p[g{g}][t{t}]"), VarKind::Continuous, 0.0, pmax[g]);
                qp.add_quad(p, p, 0.01);
                qp.add_lin(p, c1[g]);
                qp.add_lin(u, c0[g]);
                qp.add_row(format!("pmin[g{g}][t{t}]"), vec![(p, 1.0), (u, -pmin[g])], 0.0, f64::INFINITY);
                qp.add_row(format!("pmax[g{g}][t{t}]"), vec![(p, 1.0), (u, -pmax[g])], f64::NEG_INFINITY, 0.0);
                bal.push((p, 1.0));
            }
            qp.add_eq(format!("demand[t{t}]"), bal, demand[t]);
        }
        qp
    }

    fn toy_uc_enumeration(qp: &QuadraticProgram) -> f64 {
        let binaries = qp.binaries();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << binaries.len()) {
            let mut fixed = qp.clone();
            for (k, &b) in binaries.iter().enumerate() {
                let v = ((mask >> k) & 1) as f64;
                fixed.vars[b].lb = v;
                fixed.vars[b].ub = v;
            }
            let sol = solve_qp(&fixed).unwrap();
            if sol.status == SolveStatus::Optimal {
                best = best.min(sol.objective);
            }
        }
        best
    }

    #[test]
    fn toy_commitment_matches_exhaustive_enumeration() {
        let qp = toy_uc_qp([60.0, 25.0]);
        let oracle = toy_uc_enumeration(&qp);
        let sol = solve_miqp(&qp, 0.0).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "search {} vs enumeration {}",
            sol.objective,
            oracle
        );
        // weak duality
        assert!(sol.best_bound <= sol.objective + 1e-9);
        // commitment values are integral
        for b in qp.binaries() {
            assert!((sol.x[b] - sol.x[b].round()).abs() <= INT_TOL);
        }
    }

    #[test]
    fn fixed_binaries_reduce_to_a_convex_solve() {
        let mut qp = toy_uc_qp([60.0, 25.0]);
        for b in qp.binaries() {
            qp.vars[b].lb = 1.0;
            qp.vars[b].ub = 1.0;
        }
        let miqp = solve_miqp(&qp, 0.0).unwrap();
        let qp_sol = solve_qp(&qp).unwrap();
        assert_eq!(miqp.status, SolveStatus::Optimal);
        assert!((miqp.objective - qp_sol.objective).abs() <= 1e-6);
    }

    #[test]
    fn contradictory_commitment_rows_are_infeasible() {
        let mut qp = QuadraticProgram::default();
        let u = qp.add_var("u", VarKind::Binary, 0.0, 1.0);
        let p = qp.add_var("p", VarKind::Continuous, 0.0, 10.0);
        qp.add_lin(p, 1.0);
        qp.add_eq("must_run", vec![(u, 1.0)], 1.0);
        qp.add_eq("must_stop", vec![(u, 1.0)], 0.0);
        let sol = solve_miqp(&qp, 0.0).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn repeat_solves_are_bitwise_identical() {
        let qp = toy_uc_qp([55.0, 40.0]);
        let a = solve_miqp(&qp, 0.0).unwrap();
        let b = solve_miqp(&qp, 0.0).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.iterations, b.iterations);
        for (xa, xb) in a.x.iter().zip(&b.x) {
            assert_eq!(xa.to_bits(), xb.to_bits());
        }
    }

    #[test]
    fn warm_restarts_track_objective_updates() {
        let mut solver = ZoneSolver::new(&simplex_qp(4)).unwrap();
        let opts = SolveOptions::default();
        let first = solver.solve(&opts).unwrap();
        assert_eq!(first.status, SolveStatus::Optimal);
        // push the optimum toward x0 with a linear reward
        let mut lin = vec![0.0; 4];
        lin[0] = -1.0;
        solver.set_lin(&lin, 0.0);
        let second = solver.solve(&opts).unwrap();
        assert_eq!(second.status, SolveStatus::Optimal);
        // KKT: x0 = (1 + 3/4)/... direct check: xi = ν/2 for i>0, x0 = (ν+1)/2,
        // Σ = 1 → ν = 1/4 → x0 = 5/8, xi = 1/8
        assert!((second.x[0] - 0.625).abs() <= 1e-6);
        for i in 1..4 {
            assert!((second.x[i] - 0.125).abs() <= 1e-6);
        }
    }

    #[test]
    fn variable_bound_updates_apply_without_refactor() {
        let mut solver = ZoneSolver::new(&simplex_qp(3)).unwrap();
        let opts = SolveOptions::default();
        solver.set_var_bounds(0, 0.5, 0.5);
        let sol = solver.solve(&opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() <= 1e-6);
        assert!((sol.x[1] - 0.25).abs() <= 1e-6);
        solver.set_var_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        let back = solver.solve(&opts).unwrap();
        assert!((back.x[0] - 1.0 / 3.0).abs() <= 1e-6);
    }
}
