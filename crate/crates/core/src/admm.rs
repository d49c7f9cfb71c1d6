//! Dual-decomposition coordination between two zone subproblems.
//!
//! Each iteration the coordinator sends every zone the shared multipliers,
//! the current consensus imbalance, the solve mode, and any contingency
//! corrections relayed from the other zone; every zone replies with its
//! exchange contribution, a status, its objective value, and the corrections
//! it produces for the neighbor. All cross-zone traffic goes through these
//! two message types, so no internal dispatch, commitment, or network data
//! leaves a zone.
//!
//! The commitment schedule is handled by a release-and-fix outer loop: the
//! search cycle runs mixed-binary zone solves until the objective stalls,
//! then binaries are frozen at their current values (a bound update, no
//! refactorization) and a continuous cycle drives the frozen schedule to
//! balance; if it cannot — a zone turns infeasible or the imbalance stops
//! shrinking — the binaries are released and the search cycle resumes with
//! the accumulated prices. Either cycle stops the moment the solution is
//! globally feasible.

use crate::formulations::{exchange_values, Wiring, ZoneSubproblem};
use crate::gamma::GammaFactors;
use crate::isf::{ContingencySet, IsfMatrix, LodfMatrix};
use crate::linsolve::Mat;
use crate::network::{Network, Partition};
use crate::solver::{solve_miqp_on, QpSolution, SolveOptions, SolveStatus, ZoneSolver};
use crate::{gamma, isf};
use serde::{Deserialize, Serialize};
use std::io::Write as IoWrite;
use std::time::Instant;
use thiserror::Error;

/// Post-contingency overload tolerance in MW.
pub const SCREEN_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Isf(#[from] isf::IsfError),
    #[error(transparent)]
    Gamma(#[from] gamma::GammaError),
    #[error("exchange dimensions differ between zones: {0} vs {1}")]
    ExchangeMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecurityMode {
    None,
    Internal,
    Full,
}

impl std::str::FromStr for SecurityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(SecurityMode::None),
            "internal" => Ok(SecurityMode::Internal),
            "full" => Ok(SecurityMode::Full),
            other => Err(format!("unknown security mode '{other}' (expected none, internal, or full)")),
        }
    }
}

impl std::fmt::Display for SecurityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SecurityMode::None => "none",
            SecurityMode::Internal => "internal",
            SecurityMode::Full => "full",
        })
    }
}

#[derive(Debug, Clone)]
pub struct AdmmConfig {
    /// Consensus penalty (and multiplier step).
    pub rho: f64,
    /// Stop threshold on the exchange imbalance ∞-norm.
    pub eps: f64,
    /// Total iteration budget across all cycles.
    pub max_iter: usize,
    /// Optimality gap for zone mixed-binary solves.
    pub miqp_gap: f64,
    /// Objective stall: relative change below this across the stall window
    /// (default: versus the previous iteration) freezes the binaries.
    pub obj_stall_tol: f64,
    pub obj_stall_window: usize,
    /// Residual stall in the fixed cycle: less than this fractional decrease
    /// across the stall window triggers a release.
    pub resid_stall_ratio: f64,
    pub resid_stall_window: usize,
    pub time_limit_s: Option<f64>,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho: 100.0,
            eps: 1e-4,
            max_iter: 500,
            miqp_gap: 1e-3,
            obj_stall_tol: 1e-4,
            obj_stall_window: 1,
            resid_stall_ratio: 0.99,
            resid_stall_window: 10,
            time_limit_s: None,
        }
    }
}

/// Zone solve mode carried in the coordinator message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    /// Binaries decided inside the zone solve.
    Search,
    /// Binaries frozen at the values of the last search solve.
    Fixed,
}

/// Boundary correction a zone reports for one of its own eligible outages:
/// the change of the export profile the neighbor consumes, per period and
/// boundary position (period-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionShare {
    pub outage: usize,
    pub e: Vec<f64>,
}

/// Everything the coordinator sends a zone for one iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinatorMsg {
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    pub mode: SolveMode,
    pub external_corrections: Vec<CorrectionShare>,
}

/// Everything a zone sends back: exchange contributions and scalars only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneReply {
    pub xbar: Vec<f64>,
    pub status: SolveStatus,
    pub objective: f64,
    pub e_shares: Vec<CorrectionShare>,
    pub max_screening_violation: f64,
}

/// Per-iteration trace record.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub cycle: SolveMode,
    pub tau_inf: f64,
    pub objective: f64,
    pub zone_status: [SolveStatus; 2],
    pub max_screening: f64,
    pub tau: Vec<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub converged: bool,
    pub globally_feasible: bool,
    pub iterations: usize,
    pub objective: f64,
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub zone_x: [Vec<f64>; 2],
    pub zone_status: [SolveStatus; 2],
    pub wallclock_s: f64,
}

/// Writes the convergence trace as CSV.
pub fn write_trace(out: &mut impl IoWrite, outcome: &AdmmOutcome) -> std::io::Result<()> {
    writeln!(out, "iteration,wallclock_s,cycle,primal_residual_inf,global_objective,zone1_status,zone2_status,max_screening")?;
    for r in &outcome.history {
        writeln!(
            out,
            "{},{:.3},{},{:.9e},{:.9},{:?},{:?},{:.3e}",
            r.iter,
            r.elapsed_s,
            match r.cycle {
                SolveMode::Search => "search",
                SolveMode::Fixed => "fixed",
            },
            r.tau_inf,
            r.objective,
            r.zone_status[0],
            r.zone_status[1],
            r.max_screening
        )?;
    }
    Ok(())
}

/// Security data one zone holds: its own eligible outages with aggregation
/// differences (to produce corrections), and base shift factors over its own
/// monitored lines (to consume the neighbor's corrections).
pub struct SecurityContext {
    pub mode: SecurityMode,
    horizon: usize,
    /// (outage line, aggregation difference over own interior columns)
    own_diffs: Vec<(usize, Mat)>,
    /// Base shift factors of the full network.
    delta: IsfMatrix,
    /// Interior buses in aggregation column order.
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

impl SecurityContext {
    /// Builds the context for one zone from the base factors and the
    /// eligible contingency set.
    pub fn build(
        net: &Network,
        part: &Partition,
        zone: u8,
        delta: &IsfMatrix,
        base_gamma: &GammaFactors,
        set: &ContingencySet,
        mode: SecurityMode,
    ) -> Result<Self, AdmmError> {
        let mut own_diffs = Vec::new();
        if mode == SecurityMode::Full {
            for c in set.contingencies.iter().filter(|c| c.zone == zone) {
                let gt = gamma::compute_gamma_contingency(net, part, base_gamma, c.line)?;
                let base = base_gamma.of_zone(zone);
                let tau = gt.of_zone(zone);
                let mut diff = Mat::zeros(base.rows(), base.cols());
                for b in 0..base.rows() {
                    for c2 in 0..base.cols() {
                        diff.set(b, c2, tau.at(b, c2) - base.at(b, c2));
                    }
                }
                own_diffs.push((c.line, diff));
            }
        }
        Ok(SecurityContext {
            mode,
            horizon: net.horizon,
            own_diffs,
            delta: delta.clone(),
            interior: base_gamma.cols_of(zone).to_vec(),
            boundary: part.boundary.clone(),
        })
    }
}

/// One zone's stateful solve agent.
pub struct AdmmWorker {
    sub: ZoneSubproblem,
    solver: ZoneSolver,
    net: Network,
    rho: f64,
    miqp_gap: f64,
    xbar_prev: Vec<f64>,
    x_last: Vec<f64>,
    mode: SolveMode,
    binaries_fixed: bool,
    security: Option<SecurityContext>,
}

impl AdmmWorker {
    pub fn new(
        sub: ZoneSubproblem,
        net: &Network,
        cfg: &AdmmConfig,
        security: Option<SecurityContext>,
    ) -> Result<Self, AdmmError> {
        let mut augmented = sub.qp.clone();
        for &(var, _) in &sub.exchange {
            augmented.add_quad(var, var, cfg.rho / 2.0);
        }
        let solver = ZoneSolver::new(&augmented)?;
        let dim = sub.exchange_dim();
        Ok(AdmmWorker {
            x_last: vec![0.0; sub.qp.n_vars()],
            sub,
            solver,
            net: net.clone(),
            rho: cfg.rho,
            miqp_gap: cfg.miqp_gap,
            xbar_prev: vec![0.0; dim],
            mode: SolveMode::Search,
            binaries_fixed: false,
            security,
        })
    }

    pub fn subproblem(&self) -> &ZoneSubproblem {
        &self.sub
    }

    pub fn last_x(&self) -> &[f64] {
        &self.x_last
    }

    /// Net injection at an interior bus for a period, from the last solution.
    fn injection(&self, bus: usize, t: usize) -> f64 {
        let mut inj = -self.net.load(bus, t);
        for (local, &g) in self.sub.wiring.gens.iter().enumerate() {
            if self.net.gens[g].bus == bus {
                inj += self.x_last[self.sub.wiring.p[local][t]];
            }
        }
        inj
    }

    fn apply_mode(&mut self, mode: SolveMode) {
        match mode {
            SolveMode::Fixed if !self.binaries_fixed => {
                let values: Vec<f64> =
                    self.solver.binaries().iter().map(|&b| self.x_last[b].round()).collect();
                self.solver.fix_binaries(&values);
                self.binaries_fixed = true;
            }
            SolveMode::Search if self.binaries_fixed => {
                self.solver.release_binaries();
                self.binaries_fixed = false;
            }
            _ => {}
        }
        self.mode = mode;
    }

    /// Robust flow bounds from the neighbor's corrections: every monitored
    /// line keeps |f + g̃| within its limit for every reported outage.
    fn tighten_flow_bounds(&mut self, corrections: &[CorrectionShare]) {
        let Some(sec) = &self.security else { return };
        if sec.mode == SecurityMode::None {
            return;
        }
        let nb = sec.boundary.len();
        let keys: Vec<(usize, usize, usize)> =
            self.sub.wiring.f.iter().map(|(&(l, t), &var)| (l, t, var)).collect();
        for (l, t, var) in keys {
            let limit = self.net.lines[l].limit;
            if !limit.is_finite() {
                continue;
            }
            let mut g_min = 0.0_f64;
            let mut g_max = 0.0_f64;
            for corr in corrections {
                let mut g = 0.0;
                for (bi, &b) in sec.boundary.iter().enumerate() {
                    g += sec.delta.entry(l, b) * corr.e[t * nb + bi];
                }
                g_min = g_min.min(g);
                g_max = g_max.max(g);
            }
            self.solver.set_var_bounds(var, -limit - g_min, limit - g_max);
        }
    }

    /// Worst post-contingency overload estimate of the current solution
    /// against the received corrections, in MW.
    fn screening(&self, corrections: &[CorrectionShare]) -> f64 {
        let Some(sec) = &self.security else { return 0.0 };
        if sec.mode == SecurityMode::None {
            return 0.0;
        }
        let nb = sec.boundary.len();
        let mut worst = 0.0_f64;
        for (&(l, t), &var) in &self.sub.wiring.f {
            let limit = self.net.lines[l].limit;
            if !limit.is_finite() {
                continue;
            }
            let f = self.x_last[var];
            for corr in corrections {
                let mut g = 0.0;
                for (bi, &b) in sec.boundary.iter().enumerate() {
                    g += sec.delta.entry(l, b) * corr.e[t * nb + bi];
                }
                worst = worst.max((f + g).abs() - limit);
            }
        }
        worst
    }

    /// Correction shares for the neighbor: the change of the produced export
    /// profile under each of this zone's own outages, at the current
    /// injections.
    fn produce_shares(&self) -> Vec<CorrectionShare> {
        let Some(sec) = &self.security else { return Vec::new() };
        let mut shares = Vec::new();
        for (outage, diff) in &sec.own_diffs {
            let nb = sec.boundary.len();
            let mut e = vec![0.0; sec.horizon * nb];
            for t in 0..sec.horizon {
                for (ci, &c) in sec.interior.iter().enumerate() {
                    let inj = self.injection(c, t);
                    if inj != 0.0 {
                        for bi in 0..nb {
                            e[t * nb + bi] += diff.at(bi, ci) * inj;
                        }
                    }
                }
            }
            shares.push(CorrectionShare { outage: *outage, e });
        }
        shares
    }

    /// One coordination step: apply the message, solve, reply.
    pub fn step(&mut self, msg: &CoordinatorMsg) -> Result<ZoneReply, AdmmError> {
        self.apply_mode(msg.mode);
        self.tighten_flow_bounds(&msg.external_corrections);

        // objective: base + λᵀx̄ + (ρ/2)‖x̄ − x̄_prev + τ‖² (quadratic part
        // is baked into the factorization; only the linear part moves)
        let mut lin = self.sub.qp.lin.clone();
        let mut constant = self.sub.qp.constant;
        for (s, &(var, sign)) in self.sub.exchange.iter().enumerate() {
            let center = self.xbar_prev[s] - msg.tau[s];
            lin[var] += msg.lambda[s] * sign - self.rho * center * sign;
            constant += self.rho / 2.0 * center * center;
        }
        self.solver.set_lin(&lin, constant);

        let opts = SolveOptions { gap: self.miqp_gap, ..SolveOptions::default() };
        let sol: QpSolution = if self.mode == SolveMode::Search {
            solve_miqp_on(&mut self.solver, &opts)?
        } else {
            self.solver.solve(&opts)?
        };
        if sol.status != SolveStatus::Infeasible {
            self.x_last.copy_from_slice(&sol.x);
        }
        let xbar = exchange_values(&self.sub, &self.x_last);
        self.xbar_prev.copy_from_slice(&xbar);
        Ok(ZoneReply {
            xbar,
            status: sol.status,
            objective: self.sub.qp.objective_value(&self.x_last),
            e_shares: self.produce_shares(),
            max_screening_violation: self.screening(&msg.external_corrections),
        })
    }
}

/// Sum gap of an import profile across an outage: the aggregate import is
/// invariant, so the base and post-contingency profiles must sum equally.
pub fn proposition1_gap(w: &[f64], w_tau: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let st: f64 = w_tau.iter().sum();
    (s - st).abs()
}

/// Appends post-contingency flow rows `f_m + φ_mq f_q ∈ [−F_m, F_m]` for
/// every monitored pair with a finite limit, skipping outages that would
/// island the network. Returns the outages skipped as bridges.
pub fn internal_contingency_rows(
    qp: &mut crate::formulations::QuadraticProgram,
    wiring: &Wiring,
    net: &Network,
    lodf: &LodfMatrix,
    outages: &[usize],
    horizon: usize,
) -> Vec<usize> {
    let mut skipped = Vec::new();
    for &q in outages {
        if lodf.is_bridge(q) {
            skipped.push(q);
            continue;
        }
        for t in 0..horizon {
            let Some(&fq) = wiring.f.get(&(q, t)) else { continue };
            for (&(m, tm), &fm) in &wiring.f {
                if tm != t || m == q || !net.lines[m].limit.is_finite() {
                    continue;
                }
                let phi = lodf.at(m, q);
                let limit = net.lines[m].limit;
                qp.add_row(
                    format!("sec[l{m}][q{q}][t{t}]"),
                    vec![(fm, 1.0), (fq, phi)],
                    -limit,
                    limit,
                );
            }
        }
    }
    skipped
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Strategy {
    Static,
    ReleaseFix,
}

/// Flat coordination: a fixed solve mode for the whole run, stopping when
/// the exchange balances.
pub fn optimal_exchange(workers: &mut [AdmmWorker; 2], cfg: &AdmmConfig) -> Result<AdmmOutcome, AdmmError> {
    run_engine(workers, cfg, Strategy::Static)
}

/// Release-and-fix coordination for problems with binaries: search cycles
/// decide the commitment, fixed cycles polish it, releases recover from an
/// unworkable freeze.
pub fn release_and_fix(workers: &mut [AdmmWorker; 2], cfg: &AdmmConfig) -> Result<AdmmOutcome, AdmmError> {
    run_engine(workers, cfg, Strategy::ReleaseFix)
}

fn run_engine(
    workers: &mut [AdmmWorker; 2],
    cfg: &AdmmConfig,
    strategy: Strategy,
) -> Result<AdmmOutcome, AdmmError> {
    let started = Instant::now();
    let dim = workers[0].sub.exchange_dim();
    if dim != workers[1].sub.exchange_dim() {
        return Err(AdmmError::ExchangeMismatch(dim, workers[1].sub.exchange_dim()));
    }
    let has_binaries = !workers[0].solver.binaries().is_empty() || !workers[1].solver.binaries().is_empty();
    let resumes_frozen = workers.iter().any(|w| w.binaries_fixed);
    let mut cycle = match strategy {
        Strategy::Static => SolveMode::Search,
        // resume from a frozen schedule when the caller hands one over
        Strategy::ReleaseFix if resumes_frozen => SolveMode::Fixed,
        Strategy::ReleaseFix => SolveMode::Search,
    };

    let mut lambda = vec![0.0_f64; dim];
    let mut tau = vec![0.0_f64; dim];
    let mut pending: [Vec<CorrectionShare>; 2] = [Vec::new(), Vec::new()];
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut feasible = false;
    let mut obj_window: Vec<f64> = Vec::new();
    let mut resid_window: Vec<f64> = Vec::new();
    let mut last_replies: Option<(ZoneReply, ZoneReply)> = None;

    for iter in 1..=cfg.max_iter {
        if cfg.time_limit_s.is_some_and(|t| started.elapsed().as_secs_f64() > t) {
            break;
        }
        let msg1 = CoordinatorMsg {
            lambda: lambda.clone(),
            tau: tau.clone(),
            mode: cycle,
            external_corrections: std::mem::take(&mut pending[0]),
        };
        let msg2 = CoordinatorMsg { external_corrections: std::mem::take(&mut pending[1]), ..msg1.clone() };
        let [ref mut w1, ref mut w2] = *workers;
        let (r1, r2) = rayon::join(|| w1.step(&msg1), || w2.step(&msg2));
        let (r1, r2) = (r1?, r2?);

        for s in 0..dim {
            tau[s] = 0.5 * (r1.xbar[s] + r2.xbar[s]);
        }
        let tau_inf = tau.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        let objective = r1.objective + r2.objective;
        let screening = r1.max_screening_violation.max(r2.max_screening_violation);
        let statuses = [r1.status, r2.status];
        let feasible_now = tau_inf < cfg.eps
            && statuses.iter().all(|&s| s == SolveStatus::Optimal)
            && screening <= SCREEN_TOL;
        history.push(IterationRecord {
            iter,
            cycle,
            tau_inf,
            objective,
            zone_status: statuses,
            max_screening: screening,
            tau: tau.clone(),
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        pending[0] = r2.e_shares.clone();
        pending[1] = r1.e_shares.clone();
        last_replies = Some((r1, r2));

        // a balanced, individually optimal, screening-clean state stops the
        // run from either cycle
        if feasible_now {
            converged = true;
            feasible = true;
            break;
        }

        let mut switched = false;
        if strategy == Strategy::ReleaseFix && has_binaries {
            match cycle {
                SolveMode::Search => {
                    // objective stagnation across the stall window hands the
                    // current commitment to the fixed cycle
                    obj_window.push(objective);
                    let w = cfg.obj_stall_window;
                    let stalled = obj_window.len() > w && {
                        let now = *obj_window.last().unwrap();
                        let then = obj_window[obj_window.len() - 1 - w];
                        (now - then).abs() <= cfg.obj_stall_tol * now.abs().max(1.0)
                    };
                    if stalled {
                        cycle = SolveMode::Fixed;
                        switched = true;
                    }
                }
                SolveMode::Fixed => {
                    // a zone that cannot solve its frozen problem, or an
                    // imbalance that stopped shrinking, releases the binaries
                    resid_window.push(tau_inf);
                    let infeasible_zone = statuses.iter().any(|&s| s == SolveStatus::Infeasible);
                    let w = cfg.resid_stall_window;
                    let stalled = resid_window.len() > w && {
                        let now = *resid_window.last().unwrap();
                        let then = resid_window[resid_window.len() - 1 - w];
                        now > cfg.resid_stall_ratio * then
                    };
                    if infeasible_zone || stalled {
                        cycle = SolveMode::Search;
                        switched = true;
                    }
                }
            }
        }
        if switched {
            obj_window.clear();
            resid_window.clear();
        } else {
            // multipliers move only on iterations that stay in their cycle
            for s in 0..dim {
                lambda[s] += cfg.rho * tau[s];
            }
        }
    }

    let (r1, r2) = match last_replies {
        Some(pair) => pair,
        None => {
            // budget of zero iterations: report the initial state
            let empty = ZoneReply {
                xbar: vec![0.0; dim],
                status: SolveStatus::IterationLimit,
                objective: f64::NAN,
                e_shares: Vec::new(),
                max_screening_violation: 0.0,
            };
            (empty.clone(), empty)
        }
    };
    Ok(AdmmOutcome {
        converged,
        globally_feasible: feasible,
        iterations: history.len(),
        objective: r1.objective + r2.objective,
        lambda,
        tau,
        history,
        zone_x: [workers[0].x_last.clone(), workers[1].x_last.clone()],
        zone_status: [r1.status, r2.status],
        wallclock_s: started.elapsed().as_secs_f64(),
    })
}
