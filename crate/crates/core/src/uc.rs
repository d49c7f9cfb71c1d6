//! Multi-period unit commitment layered on the dispatch formulations.
//!
//! Commitment adds three row families per flexible generator — output limits
//! gated by an on/off binary, ramping with a start/stop exemption, and
//! minimum up/down times — plus a startup indicator pinned to the commitment
//! transitions. The network side (angles or shift factors, whole-network or
//! per-zone) is reused unchanged, so a commitment program differs from its
//! dispatch counterpart only in the fleet block. The module also carries the
//! schedule type and an independent feasibility/cost evaluator that
//! re-simulates a schedule against the full centralized constraint set.

use std::io::{self, Write};

use thiserror::Error;

use crate::formulations::{
    add_central_network, add_decisf_network, add_zone_network, check_clean_boundary,
    check_monitored, decisf_exchange, zone_gens, zones_exchange, FormulationError,
    QuadraticProgram, VarKind, Wiring, ZoneSubproblem,
};
use crate::gamma::{certify, GammaFactors};
use crate::isf::{centralized_without, isf_centralized, IsfError, IsfMatrix};
use crate::network::{build_matrices, Gen, Network, Partition};

/// Absolute MW tolerance applied by the schedule evaluator.
pub const FEAS_TOL_MW: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum UcError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Isf(#[from] IsfError),
    #[error("schedule does not match the network: {0}")]
    ShapeMismatch(String),
}

/// Whether a generator participates in commitment decisions. A unit with no
/// minimum output, no fixed or startup cost, and single-period up/down times
/// behaves identically on and off at zero output, so it stays dispatch-only.
pub fn is_committable(gen: &Gen) -> bool {
    gen.pmin > 0.0 || gen.c0 > 0.0 || gen.startup > 0.0 || gen.min_up > 1 || gen.min_down > 1
}

/// Adds the commitment block for `gens` over `horizon` periods: output `p`,
/// on/off `u` and startup `v` per period, with gated limits, the two-binary
/// startup logic, ramping (starts and stops exempt up to capacity), and
/// minimum run/rest windows. Units rejected by [`is_committable`] get the
/// plain dispatch treatment with box bounds and, when binding, plain ramps.
///
/// Initial conditions are cold: committable units are offline with zero
/// output before the first period and carry no prior up/down obligation.
/// Always-on units have no pre-horizon output on record, so their ramp rows
/// start at the second period.
pub fn add_commitment_fleet(
    qp: &mut QuadraticProgram,
    net: &Network,
    gens: &[usize],
    horizon: usize,
) -> Wiring {
    let mut w = Wiring { gens: gens.to_vec(), ..Wiring::default() };
    for &g in gens {
        let gen = &net.gens[g];
        if !is_committable(gen) {
            let mut ps: Vec<usize> = Vec::with_capacity(horizon);
            for t in 0..horizon {
                let p =
                    qp.add_var(format!("p[g{g}][t{t}]"), VarKind::Continuous, gen.pmin, gen.pmax);
                qp.add_quad(p, p, gen.c2);
                qp.add_lin(p, gen.c1);
                qp.constant += gen.c0;
                if gen.ramp < gen.pmax && t > 0 {
                    qp.add_row(
                        format!("ramp[g{g}][t{t}]"),
                        vec![(p, 1.0), (ps[t - 1], -1.0)],
                        -gen.ramp,
                        gen.ramp,
                    );
                }
                ps.push(p);
            }
            w.p.push(ps);
            w.u.push(Vec::new());
            w.v.push(Vec::new());
            continue;
        }

        let mut ps: Vec<usize> = Vec::with_capacity(horizon);
        let mut us: Vec<usize> = Vec::with_capacity(horizon);
        let mut vs: Vec<usize> = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let p = qp.add_var(format!("p[g{g}][t{t}]"), VarKind::Continuous, 0.0, gen.pmax);
            let u = qp.add_var(format!("u[g{g}][t{t}]"), VarKind::Binary, 0.0, 1.0);
            let v = qp.add_var(format!("v[g{g}][t{t}]"), VarKind::Continuous, 0.0, 1.0);
            ps.push(p);
            us.push(u);
            vs.push(v);
            qp.add_quad(p, p, gen.c2);
            qp.add_lin(p, gen.c1);
            // commitment costs ride on the diagonal: u² = u for a binary,
            // and the logic rows pin v to the transition whenever u is
            // integral, so every schedule is priced identically while the
            // objective stays strongly convex (the splitting iteration is
            // an order of magnitude faster than with a linear-only u block)
            qp.add_quad(u, u, gen.c0);
            qp.add_quad(v, v, gen.startup);

            // output only while committed
            qp.add_row(
                format!("pmin[g{g}][t{t}]"),
                vec![(p, 1.0), (u, -gen.pmin)],
                0.0,
                f64::INFINITY,
            );
            qp.add_row(
                format!("pmax[g{g}][t{t}]"),
                vec![(p, 1.0), (u, -gen.pmax)],
                f64::NEG_INFINITY,
                0.0,
            );

            // the startup indicator brackets the commitment transition; with
            // a cold start the first period collapses to v = u
            if t == 0 {
                qp.add_eq(format!("start[g{g}][t0]"), vec![(v, 1.0), (u, -1.0)], 0.0);
            } else {
                let u_prev = us[t - 1];
                qp.add_row(
                    format!("start[g{g}][t{t}]"),
                    vec![(v, 1.0), (u, -1.0), (u_prev, 1.0)],
                    0.0,
                    f64::INFINITY,
                );
                qp.add_row(
                    format!("start_on[g{g}][t{t}]"),
                    vec![(v, 1.0), (u, -1.0)],
                    f64::NEG_INFINITY,
                    0.0,
                );
                qp.add_row(
                    format!("start_off[g{g}][t{t}]"),
                    vec![(v, 1.0), (u_prev, 1.0)],
                    f64::NEG_INFINITY,
                    1.0,
                );
            }

            // ramping; a start or stop relaxes the row up to capacity (the
            // shutdown indicator is expanded in place as v − u_t + u_{t−1})
            if gen.ramp < gen.pmax && t > 0 {
                let (p_prev, u_prev) = (ps[t - 1], us[t - 1]);
                qp.add_row(
                    format!("rampup[g{g}][t{t}]"),
                    vec![(p, 1.0), (p_prev, -1.0), (v, -gen.pmax)],
                    f64::NEG_INFINITY,
                    gen.ramp,
                );
                qp.add_row(
                    format!("rampdn[g{g}][t{t}]"),
                    vec![
                        (p_prev, 1.0),
                        (p, -1.0),
                        (v, -gen.pmax),
                        (u, gen.pmax),
                        (u_prev, -gen.pmax),
                    ],
                    f64::NEG_INFINITY,
                    gen.ramp,
                );
            }

            // a start inside the trailing window keeps the unit on
            if gen.min_up > 1 {
                let a = (t + 1).saturating_sub(gen.min_up);
                let mut terms: Vec<(usize, f64)> = (a..=t).map(|s| (vs[s], 1.0)).collect();
                terms.push((u, -1.0));
                qp.add_row(format!("minup[g{g}][t{t}]"), terms, f64::NEG_INFINITY, 0.0);
            }

            // a stop inside the trailing window keeps the unit off; the stop
            // indicators Σ(v_s − u_s + u_{s−1}) telescope to Σv_s + u_{a−1} − u_t
            if gen.min_down > 1 {
                let a = (t + 1).saturating_sub(gen.min_down);
                let mut terms: Vec<(usize, f64)> = (a..=t).map(|s| (vs[s], 1.0)).collect();
                if a > 0 {
                    terms.push((us[a - 1], 1.0));
                }
                qp.add_row(format!("mindown[g{g}][t{t}]"), terms, f64::NEG_INFINITY, 1.0);
            }
        }
        w.p.push(ps);
        w.u.push(us);
        w.v.push(vs);
    }
    w
}

/// Whole-network commitment over the full case horizon in the angle form.
pub fn build_uc_central(
    net: &Network,
    slack: usize,
    monitored: &[usize],
) -> Result<(QuadraticProgram, Wiring), UcError> {
    check_monitored(net, monitored)?;
    let mut qp = QuadraticProgram::default();
    let all: Vec<usize> = (0..net.gens.len()).collect();
    let mut wiring = add_commitment_fleet(&mut qp, net, &all, net.horizon);
    add_central_network(&mut qp, net, slack, net.horizon, &mut wiring, monitored);
    debug_assert!(qp.validate().is_ok());
    Ok((qp, wiring))
}

/// Two-zone commitment over the full case horizon in the per-zone angle form.
pub fn build_uc_zones(
    net: &Network,
    part: &Partition,
    monitored: &[usize],
) -> Result<[ZoneSubproblem; 2], UcError> {
    check_clean_boundary(net, part)?;
    check_monitored(net, monitored)?;
    let build = |zone: u8| {
        let mut qp = QuadraticProgram::default();
        let gens = zone_gens(net, part, zone);
        let mut wiring = add_commitment_fleet(&mut qp, net, &gens, net.horizon);
        add_zone_network(&mut qp, net, part, zone, net.horizon, &mut wiring, monitored);
        let mut sub =
            ZoneSubproblem { zone, qp, exchange: Vec::new(), slot_labels: Vec::new(), wiring };
        zones_exchange(&mut sub, part, net, net.horizon);
        debug_assert!(sub.qp.validate().is_ok());
        sub
    };
    Ok([build(1), build(2)])
}

/// Two-zone commitment over the full case horizon in the shift-factor form.
/// The aggregation factors must certify against the shift factors first.
pub fn build_uc_decisf(
    net: &Network,
    part: &Partition,
    isf: &IsfMatrix,
    gamma: &GammaFactors,
    monitored: &[usize],
) -> Result<[ZoneSubproblem; 2], UcError> {
    check_clean_boundary(net, part)?;
    check_monitored(net, monitored)?;
    let report = certify(gamma, isf, net, part);
    if !report.pass {
        return Err(FormulationError::UncertifiedGamma { max_residual: report.max_residual }.into());
    }
    let build = |zone: u8| {
        let mut qp = QuadraticProgram::default();
        let gens = zone_gens(net, part, zone);
        let mut wiring = add_commitment_fleet(&mut qp, net, &gens, net.horizon);
        add_decisf_network(&mut qp, net, part, zone, isf, gamma, net.horizon, &mut wiring, monitored);
        let mut sub =
            ZoneSubproblem { zone, qp, exchange: Vec::new(), slot_labels: Vec::new(), wiring };
        decisf_exchange(&mut sub, part, net, net.horizon);
        debug_assert!(sub.qp.validate().is_ok());
        sub
    };
    Ok([build(1), build(2)])
}

/// A committed operating plan: on/off pattern and output per generator and
/// period. Always-on units carry an all-true pattern.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub horizon: usize,
    /// Network generator index per entry.
    pub gens: Vec<usize>,
    pub on: Vec<Vec<bool>>,
    /// Output in MW per entry per period.
    pub power: Vec<Vec<f64>>,
}

impl Schedule {
    /// Reads the schedule out of a solved program through its wiring.
    pub fn from_solution(wiring: &Wiring, x: &[f64], horizon: usize) -> Schedule {
        let mut on = Vec::with_capacity(wiring.p.len());
        let mut power = Vec::with_capacity(wiring.p.len());
        for (local, ps) in wiring.p.iter().enumerate() {
            let us = wiring.u.get(local).filter(|us| !us.is_empty());
            on.push(match us {
                Some(us) => us.iter().map(|&u| x[u] > 0.5).collect(),
                None => vec![true; horizon],
            });
            power.push(ps.iter().map(|&p| x[p]).collect());
        }
        Schedule { horizon, gens: wiring.gens.clone(), on, power }
    }

    /// Stitches zone schedules into one fleet-wide schedule ordered by
    /// generator index.
    pub fn merged(parts: &[Schedule]) -> Schedule {
        let horizon = parts.first().map_or(0, |s| s.horizon);
        let mut rows: Vec<(usize, Vec<bool>, Vec<f64>)> = Vec::new();
        for part in parts {
            assert_eq!(part.horizon, horizon, "schedules cover different horizons");
            for (i, &g) in part.gens.iter().enumerate() {
                rows.push((g, part.on[i].clone(), part.power[i].clone()));
            }
        }
        rows.sort_by_key(|r| r.0);
        let mut merged = Schedule {
            horizon,
            gens: Vec::with_capacity(rows.len()),
            on: Vec::with_capacity(rows.len()),
            power: Vec::with_capacity(rows.len()),
        };
        for (g, on, power) in rows {
            merged.gens.push(g);
            merged.on.push(on);
            merged.power.push(power);
        }
        merged
    }

    /// Total output in a period, MW.
    pub fn total_power(&self, t: usize) -> f64 {
        self.power.iter().map(|row| row[t]).sum()
    }
}

/// Writes a schedule as CSV with columns `generator,period,u,p`.
pub fn write_schedule(out: &mut dyn Write, sched: &Schedule) -> io::Result<()> {
    writeln!(out, "generator,period,u,p")?;
    for (row, &g) in sched.gens.iter().enumerate() {
        for t in 0..sched.horizon {
            let u = u8::from(sched.on[row][t]);
            writeln!(out, "{g},{t},{u},{:.6}", sched.power[row][t])?;
        }
    }
    Ok(())
}

/// One broken constraint found while re-simulating a schedule.
#[derive(Debug, Clone)]
pub struct Violation {
    pub label: String,
    pub period: usize,
    /// Overshoot size: MW for continuous families, 1 for logical ones.
    pub amount: f64,
}

/// Feasibility and cost report for a schedule.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Production, commitment, and startup cost of the schedule as given.
    pub cost: f64,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.amount).fold(0.0, f64::max)
    }

    /// Renders the report as text: total cost, violation count, and the
    /// worst offender followed by the full list.
    pub fn report(&self) -> String {
        let mut s = format!("cost {:.4}\nviolations {}\n", self.cost, self.violations.len());
        if let Some(worst) =
            self.violations.iter().max_by(|a, b| a.amount.total_cmp(&b.amount))
        {
            s.push_str(&format!(
                "max violation {:.6} ({} in period {})\n",
                worst.amount, worst.label, worst.period
            ));
        }
        for v in &self.violations {
            s.push_str(&format!("  {} t{}: {:.6}\n", v.label, v.period, v.amount));
        }
        s
    }
}

/// Relative cost gap in percent against a reference objective.
pub fn gap_percent(cost: f64, reference: f64) -> f64 {
    100.0 * (cost - reference) / reference.abs().max(f64::EPSILON)
}

/// Re-simulates a schedule against the full centralized constraint set:
/// unit limits, ramps, run/rest windows, system balance, base-network line
/// flows, and post-contingency flows for every listed outage. Returns the
/// recomputed cost together with every violation beyond [`FEAS_TOL_MW`]
/// (logical families report amount 1). The check is independent of how the
/// schedule was produced — flows come from freshly computed shift factors.
pub fn evaluate_schedule(
    net: &Network,
    slack: usize,
    sched: &Schedule,
    outages: &[usize],
) -> Result<Evaluation, UcError> {
    if sched.horizon != net.horizon {
        return Err(UcError::ShapeMismatch(format!(
            "schedule covers {} periods, case has {}",
            sched.horizon, net.horizon
        )));
    }
    let mut row_of: Vec<Option<usize>> = vec![None; net.gens.len()];
    for (row, &g) in sched.gens.iter().enumerate() {
        match row_of.get(g) {
            Some(None) => row_of[g] = Some(row),
            Some(Some(_)) => {
                return Err(UcError::ShapeMismatch(format!("generator {g} listed twice")))
            }
            None => return Err(UcError::ShapeMismatch(format!("unknown generator {g}"))),
        }
    }
    if let Some(g) = row_of.iter().position(Option::is_none) {
        return Err(UcError::ShapeMismatch(format!("generator {g} missing from the schedule")));
    }
    if let Some(&q) = outages.iter().find(|&&q| q >= net.n_lines()) {
        return Err(UcError::ShapeMismatch(format!("outage {q} is not a line")));
    }

    let mut cost = 0.0;
    let mut violations: Vec<Violation> = Vec::new();
    let mut flag = |label: String, period: usize, amount: f64| {
        violations.push(Violation { label, period, amount });
    };

    for (g, gen) in net.gens.iter().enumerate() {
        let row = row_of[g].expect("checked above");
        let on = &sched.on[row];
        let p = &sched.power[row];
        let committable = is_committable(gen);
        for t in 0..net.horizon {
            // cost of the schedule as given
            cost += gen.c2 * p[t] * p[t] + gen.c1 * p[t];
            if on[t] {
                cost += gen.c0;
            }
            let was_on = if t == 0 { !committable } else { on[t - 1] };
            let started = on[t] && !was_on;
            let stopped = !on[t] && was_on;
            if started {
                cost += gen.startup;
            }

            // output limits, gated for committable units
            if on[t] {
                if p[t] < gen.pmin - FEAS_TOL_MW {
                    flag(format!("pmin[g{g}]"), t, gen.pmin - p[t]);
                }
                if p[t] > gen.pmax + FEAS_TOL_MW {
                    flag(format!("pmax[g{g}]"), t, p[t] - gen.pmax);
                }
            } else if p[t].abs() > FEAS_TOL_MW {
                flag(format!("off_output[g{g}]"), t, p[t].abs());
            }
            if !committable && !on[t] {
                flag(format!("always_on[g{g}]"), t, 1.0);
            }

            // ramping; a start or stop lifts the allowance to capacity
            if gen.ramp < gen.pmax && (t > 0 || committable) {
                let p_prev = if t == 0 { 0.0 } else { p[t - 1] };
                let allowance =
                    if started || stopped { gen.ramp + gen.pmax } else { gen.ramp };
                let up = p[t] - p_prev - allowance;
                if up > FEAS_TOL_MW {
                    flag(format!("ramp_up[g{g}]"), t, up);
                }
                let down = p_prev - p[t] - allowance;
                if down > FEAS_TOL_MW {
                    flag(format!("ramp_down[g{g}]"), t, down);
                }
            }

            // run/rest windows: a recent start forbids being off, a recent
            // stop forbids being on
            if committable {
                let mut start_window = (t + 1).saturating_sub(gen.min_up)..t;
                let recently_started = start_window
                    .any(|s| sched.on[row][s] && (s == 0 || !sched.on[row][s - 1]));
                if recently_started && !on[t] {
                    flag(format!("min_up[g{g}]"), t, 1.0);
                }
                let mut stop_window = (t + 1).saturating_sub(gen.min_down)..t;
                let recently_stopped =
                    stop_window.any(|s| s > 0 && !sched.on[row][s] && sched.on[row][s - 1]);
                if recently_stopped && on[t] {
                    flag(format!("min_down[g{g}]"), t, 1.0);
                }
            }
        }
    }

    // system balance per period
    for t in 0..net.horizon {
        let mismatch = sched.total_power(t) - net.total_load(t);
        if mismatch.abs() > FEAS_TOL_MW {
            flag("balance".into(), t, mismatch.abs());
        }
    }

    // line flows, base network and every listed outage
    let any_limit = net.lines.iter().any(|l| l.limit.is_finite());
    if any_limit || !outages.is_empty() {
        let base = isf_centralized(&build_matrices(net, slack))?;
        let mut factor_sets: Vec<(Option<usize>, IsfMatrix)> = vec![(None, base)];
        for &q in outages {
            factor_sets.push((Some(q), centralized_without(net, slack, q)?));
        }
        for t in 0..net.horizon {
            let mut inj = vec![0.0; net.n_buses()];
            for (g, gen) in net.gens.iter().enumerate() {
                inj[gen.bus] += sched.power[row_of[g].expect("checked above")][t];
            }
            for (b, slot) in inj.iter_mut().enumerate() {
                *slot -= net.load(b, t);
            }
            for (outage, factors) in &factor_sets {
                let flows = factors.flows(&inj);
                for (l, line) in net.lines.iter().enumerate() {
                    if Some(l) == *outage || !line.limit.is_finite() {
                        continue;
                    }
                    let over = flows[l].abs() - line.limit;
                    if over > FEAS_TOL_MW {
                        let label = match outage {
                            None => format!("flow[l{l}]"),
                            Some(q) => format!("flow[l{l}][q{q}]"),
                        };
                        flag(label, t, over);
                    }
                }
            }
        }
    }

    Ok(Evaluation { cost, violations })
}
