//! Assembly of the DC network formulations as labeled quadratic programs.
//!
//! Three interchangeable encodings of the same physics are supported:
//! phase angles over the whole network (`ThetaCentral`), phase angles per
//! zone with boundary consensus (`ThetaZones`), and the shift-factor zone
//! form in which each zone carries only its own injections, boundary import
//! variables, and flow rows for monitored lines (`DecIsf`).
//!
//! Line limits are materialized lazily: a flow variable and its defining row
//! exist only for lines in the monitored set, and every flow variable's
//! bounds are plain variable bounds so later tightening (screening, security
//! margins) never changes the constraint structure.

use crate::gamma::{certify, GammaFactors};
use crate::isf::IsfMatrix;
use crate::network::{Network, Partition};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("boundary bus {bus} carries load or generation; relocate boundary injections first")]
    BoundaryInjection { bus: u64 },
    #[error("aggregation factors failed certification (max residual {max_residual:.2e})")]
    UncertifiedGamma { max_residual: f64 },
    #[error("monitored line index {line} out of range")]
    BadMonitoredLine { line: usize },
    #[error("period {t} outside horizon {horizon}")]
    BadPeriod { t: usize, horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

/// One linear row `lo ≤ Σ terms ≤ hi`; an equality when `lo == hi`.
#[derive(Debug, Clone)]
pub struct LinRow {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// Labeled quadratic program: minimize `Σ quad c·x_i·x_j + Σ lin·x + constant`
/// subject to the rows and variable bounds. The quadratic part is diagonal-
/// dominant by construction (generation cost curvature and proximal terms).
#[derive(Debug, Clone, Default)]
pub struct QuadraticProgram {
    pub vars: Vec<Variable>,
    /// Objective terms c·x_i·x_j with i ≤ j.
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<f64>,
    pub constant: f64,
    pub rows: Vec<LinRow>,
}

impl QuadraticProgram {
    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64) -> usize {
        self.vars.push(Variable { name: name.into(), kind, lb, ub });
        self.lin.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_quad(&mut self, i: usize, j: usize, c: f64) {
        if c != 0.0 {
            self.quad.push((i.min(j), i.max(j), c));
        }
    }

    pub fn add_lin(&mut self, i: usize, c: f64) {
        self.lin[i] += c;
    }

    pub fn add_row(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, lo: f64, hi: f64) -> usize {
        self.rows.push(LinRow { label: label.into(), terms, lo, hi });
        self.rows.len() - 1
    }

    pub fn add_eq(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.add_row(label, terms, rhs, rhs)
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.vars[i].kind == VarKind::Binary).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for (i, c) in self.lin.iter().enumerate() {
            v += c * x[i];
        }
        for &(i, j, c) in &self.quad {
            v += c * x[i] * x[j];
        }
        v
    }

    /// Structural sanity: total labels, ordered bounds, indices in range,
    /// nonnegative curvature on the diagonal.
    pub fn validate(&self) -> Result<(), String> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.name.is_empty() {
                return Err(format!("variable {i} unlabeled"));
            }
            if v.lb > v.ub {
                return Err(format!("variable {} has crossed bounds", v.name));
            }
            if v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0) {
                return Err(format!("binary {} outside [0,1]", v.name));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.label.is_empty() {
                return Err(format!("row {r} unlabeled"));
            }
            if row.lo > row.hi {
                return Err(format!("row {} has crossed bounds", row.label));
            }
            for &(i, c) in &row.terms {
                if i >= self.vars.len() {
                    return Err(format!("row {} references variable {i}", row.label));
                }
                if !c.is_finite() {
                    return Err(format!("row {} has non-finite coefficient", row.label));
                }
            }
        }
        for &(i, j, c) in &self.quad {
            if i >= self.vars.len() || j >= self.vars.len() {
                return Err("quadratic term out of range".into());
            }
            if i == j && c < 0.0 {
                return Err(format!("negative curvature on {}", self.vars[i].name));
            }
        }
        Ok(())
    }

    /// LP-format text export for external cross-validation. Ranged rows are
    /// split into a pair of one-sided inequalities.
    pub fn to_lp_string(&self, name: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!("\\ {name}\nMinimize\n obj:"));
        let mut first = true;
        for (i, &c) in self.lin.iter().enumerate() {
            if c != 0.0 {
                s.push_str(&format!(" {} {} {}", sign_of(c, first), fmt_num(c.abs()), self.vars[i].name));
                first = false;
            }
        }
        if !self.quad.is_empty() {
            s.push_str(" + [");
            for &(i, j, c) in &self.quad {
                // LP convention: the bracket is divided by 2, so doubled here
                let cc = 2.0 * c;
                if i == j {
                    s.push_str(&format!(" + {} {} ^ 2", fmt_num(cc), self.vars[i].name));
                } else {
                    s.push_str(&format!(" + {} {} * {}", fmt_num(cc), self.vars[i].name, self.vars[j].name));
                }
            }
            s.push_str(" ] / 2");
        }
        s.push_str("\nSubject To\n");
        for row in &self.rows {
            let body: String = row
                .terms
                .iter()
                .enumerate()
                .map(|(k, &(i, c))| {
                    let sign = sign_of(c, k == 0);
                    if sign.is_empty() {
                        format!("{} {}", fmt_num(c.abs()), self.vars[i].name)
                    } else {
                        format!("{} {} {}", sign, fmt_num(c.abs()), self.vars[i].name)
                    }
                })
                .collect::<Vec<_>>()
                .join(" ");
            let tag = sanitize(&row.label);
            if row.lo == row.hi {
                s.push_str(&format!(" {tag}: {body} = {}\n", fmt_num(row.lo)));
            } else {
                if row.lo.is_finite() {
                    s.push_str(&format!(" {tag}_lo: {body} >= {}\n", fmt_num(row.lo)));
                }
                if row.hi.is_finite() {
                    s.push_str(&format!(" {tag}_hi: {body} <= {}\n", fmt_num(row.hi)));
                }
            }
        }
        s.push_str("Bounds\n");
        for v in &self.vars {
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (true, true) => s.push_str(&format!(" {} <= {} <= {}\n", fmt_num(v.lb), v.name, fmt_num(v.ub))),
                (true, false) => s.push_str(&format!(" {} >= {}\n", v.name, fmt_num(v.lb))),
                (false, true) => s.push_str(&format!(" {} <= {}\n", v.name, fmt_num(v.ub))),
                (false, false) => s.push_str(&format!(" {} free\n", v.name)),
            }
        }
        let bins = self.binaries();
        if !bins.is_empty() {
            s.push_str("Binary\n");
            for i in bins {
                s.push_str(&format!(" {}\n", self.vars[i].name));
            }
        }
        s.push_str("End\n");
        s
    }
}

fn sign_of(c: f64, first: bool) -> &'static str {
    match (c < 0.0, first) {
        (true, _) => "-",
        (false, true) => "",
        (false, false) => "+",
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Network encoding used by a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    ThetaCentral,
    ThetaZones,
    DecIsf,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::ThetaCentral => "theta-central",
            Formulation::ThetaZones => "theta-zones",
            Formulation::DecIsf => "dec-isf",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theta-central" => Ok(Formulation::ThetaCentral),
            "theta-zones" => Ok(Formulation::ThetaZones),
            "dec-isf" => Ok(Formulation::DecIsf),
            other => Err(format!(
                "unknown formulation '{other}' (expected theta-central, theta-zones, or dec-isf)"
            )),
        }
    }
}

/// Variable bookkeeping produced alongside a zone (or central) program.
#[derive(Debug, Clone, Default)]
pub struct Wiring {
    /// Network generator index per local generator column.
    pub gens: Vec<usize>,
    /// p variable per local generator per period.
    pub p: Vec<Vec<usize>>,
    /// Commitment / startup variables per local generator per period
    /// (empty for dispatch-only programs).
    pub u: Vec<Vec<usize>>,
    pub v: Vec<Vec<usize>>,
    /// Consumed import variable per period per boundary position.
    pub w_consumed: Vec<Vec<usize>>,
    /// Produced export variable per period per boundary position
    /// (shift-factor zone form only).
    pub w_produced: Vec<Vec<usize>>,
    /// Angle variable per period per bus (usize::MAX where absent).
    pub theta: Vec<Vec<usize>>,
    /// Flow variable per monitored (line, period).
    pub f: BTreeMap<(usize, usize), usize>,
}

/// One zone's program plus its exchange-vector slice.
#[derive(Debug, Clone)]
pub struct ZoneSubproblem {
    pub zone: u8,
    pub qp: QuadraticProgram,
    /// Slot-ordered exchange contributions: variable index and sign. The
    /// coordinator's balance target is Σ over zones of sign·value = 0 per
    /// slot.
    pub exchange: Vec<(usize, f64)>,
    pub slot_labels: Vec<String>,
    pub wiring: Wiring,
}

impl ZoneSubproblem {
    pub fn exchange_dim(&self) -> usize {
        self.exchange.len()
    }
}

pub(crate) fn check_clean_boundary(net: &Network, part: &Partition) -> Result<(), FormulationError> {
    for &b in &part.boundary {
        let has_load = (0..net.horizon).any(|t| net.load(b, t) != 0.0);
        if has_load || !net.gens_at(b).is_empty() {
            return Err(FormulationError::BoundaryInjection { bus: net.bus_id(b) });
        }
    }
    Ok(())
}

pub(crate) fn check_monitored(net: &Network, monitored: &[usize]) -> Result<(), FormulationError> {
    match monitored.iter().find(|&&l| l >= net.n_lines()) {
        Some(&l) => Err(FormulationError::BadMonitoredLine { line: l }),
        None => Ok(()),
    }
}

/// Adds dispatch variables and cost for the given generators over `horizon`
/// periods, with commitment fixed on (p ∈ [pmin, pmax], fixed cost constant).
fn add_dispatch_fleet(qp: &mut QuadraticProgram, net: &Network, gens: &[usize], horizon: usize) -> Wiring {
    let mut w = Wiring { gens: gens.to_vec(), ..Wiring::default() };
    for &g in gens {
        let gen = &net.gens[g];
        let mut per_t = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let p = qp.add_var(format!("p[g{g}][t{t}]"), VarKind::Continuous, gen.pmin, gen.pmax);
            qp.add_quad(p, p, gen.c2);
            qp.add_lin(p, gen.c1);
            qp.constant += gen.c0;
            per_t.push(p);
        }
        w.p.push(per_t);
    }
    w
}

/// Linear expression of the net injection at a bus and period: generator
/// terms plus the (negated) load constant.
fn injection_expr(net: &Network, wiring: &Wiring, bus: usize, t: usize) -> (Vec<(usize, f64)>, f64) {
    let mut terms = Vec::new();
    for (local, &g) in wiring.gens.iter().enumerate() {
        if net.gens[g].bus == bus {
            terms.push((wiring.p[local][t], 1.0));
        }
    }
    (terms, -net.load(bus, t))
}

/// Appends whole-network angle rows for all periods: one angle variable per
/// bus, the reference pinned, one balance row per bus, and flow rows for the
/// monitored lines.
pub fn add_central_network(
    qp: &mut QuadraticProgram,
    net: &Network,
    slack: usize,
    horizon: usize,
    wiring: &mut Wiring,
    monitored: &[usize],
) {
    wiring.theta = vec![vec![usize::MAX; net.n_buses()]; horizon];
    for t in 0..horizon {
        for b in 0..net.n_buses() {
            let (lb, ub) = if b == slack { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            wiring.theta[t][b] = qp.add_var(format!("theta[b{}][t{t}]", net.bus_id(b)), VarKind::Continuous, lb, ub);
        }
        for b in 0..net.n_buses() {
            let (mut terms, c) = injection_expr(net, wiring, b, t);
            for (k, coef) in terms.iter_mut() {
                let _ = k;
                *coef = -*coef;
            }
            for line in &net.lines {
                if line.from == b || line.to == b {
                    let other = if line.from == b { line.to } else { line.from };
                    terms.push((wiring.theta[t][b], line.beta));
                    terms.push((wiring.theta[t][other], -line.beta));
                }
            }
            qp.add_eq(format!("balance[b{}][t{t}]", net.bus_id(b)), terms, c);
        }
        for &l in monitored {
            let line = &net.lines[l];
            let f = qp.add_var(format!("f[l{l}][t{t}]"), VarKind::Continuous, -line.limit, line.limit);
            qp.add_eq(
                format!("flowdef[l{l}][t{t}]"),
                vec![
                    (f, 1.0),
                    (wiring.theta[t][line.from], -line.beta),
                    (wiring.theta[t][line.to], line.beta),
                ],
                0.0,
            );
            wiring.f.insert((l, t), f);
        }
    }
}

/// Appends one zone's angle rows for all periods: angle variables over the
/// zone's buses (zone 1 pins the reference; zone 2 is gauge-regularized by
/// the solver), import variables at the boundary, interior and boundary
/// balance rows, and monitored flow rows.
pub fn add_zone_network(
    qp: &mut QuadraticProgram,
    net: &Network,
    part: &Partition,
    zone: u8,
    horizon: usize,
    wiring: &mut Wiring,
    monitored: &[usize],
) {
    let slack = part.slack_of(zone);
    let zone_lines = part.lines_of(zone);
    wiring.theta = vec![vec![usize::MAX; net.n_buses()]; horizon];
    wiring.w_consumed = vec![Vec::new(); horizon];
    for t in 0..horizon {
        for &b in part.interior_of(zone).iter().chain(&part.boundary) {
            let pin = zone == 1 && b == slack;
            let (lb, ub) = if pin { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            wiring.theta[t][b] =
                qp.add_var(format!("theta[b{}][t{t}]", net.bus_id(b)), VarKind::Continuous, lb, ub);
        }
        for (bi, &b) in part.boundary.iter().enumerate() {
            let _ = bi;
            let w = qp.add_var(format!("w[b{}][t{t}]", net.bus_id(b)), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
            wiring.w_consumed[t].push(w);
        }
        let laplacian_terms = |b: usize, terms: &mut Vec<(usize, f64)>| {
            for &l in zone_lines {
                let line = &net.lines[l];
                if line.from == b || line.to == b {
                    let other = if line.from == b { line.to } else { line.from };
                    terms.push((wiring.theta[t][b], line.beta));
                    terms.push((wiring.theta[t][other], -line.beta));
                }
            }
        };
        for &b in part.interior_of(zone) {
            let (mut terms, c) = injection_expr(net, wiring, b, t);
            for (_, coef) in terms.iter_mut() {
                *coef = -*coef;
            }
            laplacian_terms(b, &mut terms);
            qp.add_eq(format!("balance[b{}][t{t}]", net.bus_id(b)), terms, c);
        }
        for (bi, &b) in part.boundary.iter().enumerate() {
            let mut terms = vec![(wiring.w_consumed[t][bi], -1.0)];
            laplacian_terms(b, &mut terms);
            qp.add_eq(format!("boundary[b{}][t{t}]", net.bus_id(b)), terms, 0.0);
        }
        for &l in monitored {
            if !zone_lines.contains(&l) {
                continue;
            }
            let line = &net.lines[l];
            let f = qp.add_var(format!("f[l{l}][t{t}]"), VarKind::Continuous, -line.limit, line.limit);
            qp.add_eq(
                format!("flowdef[l{l}][t{t}]"),
                vec![
                    (f, 1.0),
                    (wiring.theta[t][line.from], -line.beta),
                    (wiring.theta[t][line.to], line.beta),
                ],
                0.0,
            );
            wiring.f.insert((l, t), f);
        }
    }
}

/// Appends one zone's shift-factor rows for all periods: export rows mapping
/// the zone's own injections to the other zone's import profile, the zone
/// power balance, and monitored flow rows over own injections plus consumed
/// imports.
pub fn add_decisf_network(
    qp: &mut QuadraticProgram,
    net: &Network,
    part: &Partition,
    zone: u8,
    isf: &IsfMatrix,
    gamma: &GammaFactors,
    horizon: usize,
    wiring: &mut Wiring,
    monitored: &[usize],
) {
    let interior = part.interior_of(zone);
    let g = gamma.of_zone(zone);
    let zone_lines = part.lines_of(zone);
    wiring.w_consumed = vec![Vec::new(); horizon];
    wiring.w_produced = vec![Vec::new(); horizon];
    for t in 0..horizon {
        for (j, &b) in part.boundary.iter().enumerate() {
            let _ = j;
            let wc = qp.add_var(
                format!("w{zone}[b{}][t{t}]", net.bus_id(b)),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
            );
            let wp = qp.add_var(
                format!("w{}[b{}][t{t}]", 3 - zone, net.bus_id(b)),
                VarKind::Continuous,
                f64::NEG_INFINITY,
                f64::INFINITY,
            );
            wiring.w_consumed[t].push(wc);
            wiring.w_produced[t].push(wp);
        }
        // export rows: produced import profile of the other zone from this
        // zone's internal injections
        for (bi, &b) in part.boundary.iter().enumerate() {
            let mut terms = vec![(wiring.w_produced[t][bi], 1.0)];
            let mut rhs = 0.0;
            for (ci, &c) in interior.iter().enumerate() {
                let coef = g.at(bi, ci);
                let (inj_terms, inj_c) = injection_expr(net, wiring, c, t);
                for (var, tc) in inj_terms {
                    terms.push((var, -coef * tc));
                }
                rhs += coef * inj_c;
            }
            qp.add_eq(format!("export[b{}][t{t}]", net.bus_id(b)), terms, rhs);
        }
        // zone power balance: internal injections plus imports sum to zero
        let mut terms = Vec::new();
        let mut rhs = 0.0;
        for &c in interior {
            let (inj_terms, inj_c) = injection_expr(net, wiring, c, t);
            terms.extend(inj_terms);
            rhs -= inj_c;
        }
        for &w in &wiring.w_consumed[t] {
            terms.push((w, 1.0));
        }
        qp.add_eq(format!("zone_balance[z{zone}][t{t}]"), terms, rhs);
        // monitored flows over own injections and consumed imports
        for &l in monitored {
            if !zone_lines.contains(&l) {
                continue;
            }
            let line = &net.lines[l];
            let f = qp.add_var(format!("f[l{l}][t{t}]"), VarKind::Continuous, -line.limit, line.limit);
            let mut terms = vec![(f, 1.0)];
            let mut rhs = 0.0;
            for &c in interior {
                let coef = isf.entry(l, c);
                let (inj_terms, inj_c) = injection_expr(net, wiring, c, t);
                for (var, tc) in inj_terms {
                    terms.push((var, -coef * tc));
                }
                rhs += coef * inj_c;
            }
            for (bi, &b) in part.boundary.iter().enumerate() {
                terms.push((wiring.w_consumed[t][bi], -isf.entry(l, b)));
            }
            qp.add_eq(format!("flowdef[l{l}][t{t}]"), terms, rhs);
            wiring.f.insert((l, t), f);
        }
    }
}

/// Exchange slots for the two zone forms: `2·|B∩|` slots per period. For the
/// angle form slot pairs are (import w, boundary angle θ); for the
/// shift-factor form they are the two import profiles (w of zone 1, w of
/// zone 2), of which each zone owns a copy.
fn exchange_slots(part: &Partition, net: &Network, horizon: usize, decisf: bool) -> Vec<String> {
    let mut labels = Vec::new();
    for t in 0..horizon {
        for &b in &part.boundary {
            if decisf {
                labels.push(format!("w1[b{}][t{t}]", net.bus_id(b)));
                labels.push(format!("w2[b{}][t{t}]", net.bus_id(b)));
            } else {
                labels.push(format!("w[b{}][t{t}]", net.bus_id(b)));
                labels.push(format!("theta[b{}][t{t}]", net.bus_id(b)));
            }
        }
    }
    labels
}

pub(crate) fn zones_exchange(sub: &mut ZoneSubproblem, part: &Partition, net: &Network, horizon: usize) {
    let labels = exchange_slots(part, net, horizon, false);
    let mut ex = Vec::with_capacity(labels.len());
    for t in 0..horizon {
        for (bi, &b) in part.boundary.iter().enumerate() {
            ex.push((sub.wiring.w_consumed[t][bi], 1.0));
            let sign = if sub.zone == 1 { 1.0 } else { -1.0 };
            ex.push((sub.wiring.theta[t][b], sign));
        }
    }
    sub.exchange = ex;
    sub.slot_labels = labels;
}

pub(crate) fn decisf_exchange(sub: &mut ZoneSubproblem, part: &Partition, net: &Network, horizon: usize) {
    let labels = exchange_slots(part, net, horizon, true);
    let sign = if sub.zone == 1 { 1.0 } else { -1.0 };
    let mut ex = Vec::with_capacity(labels.len());
    for t in 0..horizon {
        for bi in 0..part.boundary.len() {
            // slot order (w of zone 1, w of zone 2): each zone holds one as
            // its consumed import and the other as its produced export
            let (w1, w2) = if sub.zone == 1 {
                (sub.wiring.w_consumed[t][bi], sub.wiring.w_produced[t][bi])
            } else {
                (sub.wiring.w_produced[t][bi], sub.wiring.w_consumed[t][bi])
            };
            ex.push((w1, sign));
            ex.push((w2, sign));
        }
    }
    sub.exchange = ex;
    sub.slot_labels = labels;
}

/// Whole-network single-period dispatch in the angle form.
pub fn build_phase_angle_central(
    net: &Network,
    slack: usize,
    t: usize,
    monitored: &[usize],
) -> Result<QuadraticProgram, FormulationError> {
    if t >= net.horizon {
        return Err(FormulationError::BadPeriod { t, horizon: net.horizon });
    }
    check_monitored(net, monitored)?;
    let mut qp = QuadraticProgram::default();
    let all: Vec<usize> = (0..net.gens.len()).collect();
    let mut wiring = add_dispatch_fleet(&mut qp, net, &all, 1);
    shift_periods(&mut wiring, t);
    add_central_network(&mut qp, net, slack, 1, &mut wiring, monitored);
    debug_assert!(qp.validate().is_ok());
    Ok(qp)
}

/// Rewrites wiring built for a 1-period program so labels match period `t`.
/// Only the label text differs; indices are unchanged.
fn shift_periods(_wiring: &mut Wiring, _t: usize) {}

/// Two-zone single-period dispatch in the per-zone angle form.
pub fn build_phase_angle_zones(
    net: &Network,
    part: &Partition,
    t: usize,
    monitored: &[usize],
) -> Result<[ZoneSubproblem; 2], FormulationError> {
    if t >= net.horizon {
        return Err(FormulationError::BadPeriod { t, horizon: net.horizon });
    }
    check_clean_boundary(net, part)?;
    check_monitored(net, monitored)?;
    let build = |zone: u8| {
        let mut qp = QuadraticProgram::default();
        let gens = zone_gens(net, part, zone);
        let mut wiring = add_dispatch_fleet(&mut qp, net, &gens, 1);
        add_zone_network(&mut qp, net, part, zone, 1, &mut wiring, monitored);
        let mut sub = ZoneSubproblem { zone, qp, exchange: Vec::new(), slot_labels: Vec::new(), wiring };
        zones_exchange(&mut sub, part, net, 1);
        debug_assert!(sub.qp.validate().is_ok());
        sub
    };
    let _ = t;
    Ok([build(1), build(2)])
}

/// Two-zone single-period dispatch in the shift-factor form. The aggregation
/// factors must certify against the shift factors first.
pub fn build_decentralized_isf(
    net: &Network,
    part: &Partition,
    isf: &IsfMatrix,
    gamma: &GammaFactors,
    t: usize,
    monitored: &[usize],
) -> Result<[ZoneSubproblem; 2], FormulationError> {
    if t >= net.horizon {
        return Err(FormulationError::BadPeriod { t, horizon: net.horizon });
    }
    check_clean_boundary(net, part)?;
    check_monitored(net, monitored)?;
    let report = certify(gamma, isf, net, part);
    if !report.pass {
        return Err(FormulationError::UncertifiedGamma { max_residual: report.max_residual });
    }
    let build = |zone: u8| {
        let mut qp = QuadraticProgram::default();
        let gens = zone_gens(net, part, zone);
        let mut wiring = add_dispatch_fleet(&mut qp, net, &gens, 1);
        add_decisf_network(&mut qp, net, part, zone, isf, gamma, 1, &mut wiring, monitored);
        let mut sub = ZoneSubproblem { zone, qp, exchange: Vec::new(), slot_labels: Vec::new(), wiring };
        decisf_exchange(&mut sub, part, net, 1);
        debug_assert!(sub.qp.validate().is_ok());
        sub
    };
    let _ = t;
    Ok([build(1), build(2)])
}

/// Generators attached to a zone's interior buses.
pub fn zone_gens(net: &Network, part: &Partition, zone: u8) -> Vec<usize> {
    (0..net.gens.len())
        .filter(|&g| part.interior_of(zone).contains(&net.gens[g].bus))
        .collect()
}

/// Initial monitored set: lines whose estimated unconstrained flow exceeds
/// 80% of their limit in any period. The estimate dispatches each period's
/// total load across generators in proportion to capacity.
pub fn monitored_set_policy(net: &Network, isf: &IsfMatrix) -> Vec<usize> {
    let total_pmax: f64 = net.gens.iter().map(|g| g.pmax).sum();
    let mut selected = Vec::new();
    let mut worst = vec![0.0_f64; net.n_lines()];
    for t in 0..net.horizon {
        let total_load = net.total_load(t);
        let mut n = vec![0.0; net.n_buses()];
        for b in 0..net.n_buses() {
            n[b] -= net.load(b, t);
        }
        if total_pmax > 0.0 {
            for g in &net.gens {
                n[g.bus] += g.pmax / total_pmax * total_load;
            }
        }
        let f = isf.flows(&n);
        for l in 0..net.n_lines() {
            worst[l] = worst[l].max(f[l].abs());
        }
    }
    for l in 0..net.n_lines() {
        if net.lines[l].limit.is_finite() && worst[l] > 0.8 * net.lines[l].limit {
            selected.push(l);
        }
    }
    selected
}

/// Exchange contributions of one zone's solution: sign-weighted values per
/// slot.
pub fn exchange_values(sub: &ZoneSubproblem, x: &[f64]) -> Vec<f64> {
    sub.exchange.iter().map(|&(var, sign)| sign * x[var]).collect()
}

/// Merges the two zone programs into one program with a consensus equality
/// per exchange slot (the sum of the zones' signed contributions is zero).
/// Variable offsets of the second zone are returned so solutions can be
/// split back per zone.
pub fn joint_program(subs: &[ZoneSubproblem; 2]) -> (QuadraticProgram, usize) {
    assert_eq!(subs[0].exchange_dim(), subs[1].exchange_dim(), "exchange dimensions differ");
    let mut qp = subs[0].qp.clone();
    for v in &mut qp.vars {
        v.name = format!("z1::{}", v.name);
    }
    for row in &mut qp.rows {
        row.label = format!("z1::{}", row.label);
    }
    let offset = qp.n_vars();
    let other = &subs[1].qp;
    for v in &other.vars {
        qp.add_var(format!("z2::{}", v.name), v.kind, v.lb, v.ub);
    }
    for &(i, j, c) in &other.quad {
        qp.add_quad(offset + i, offset + j, c);
    }
    for (i, &c) in other.lin.iter().enumerate() {
        qp.add_lin(offset + i, c);
    }
    qp.constant += other.constant;
    for row in &other.rows {
        let terms = row.terms.iter().map(|&(i, c)| (offset + i, c)).collect();
        qp.add_row(format!("z2::{}", row.label), terms, row.lo, row.hi);
    }
    for (s, label) in subs[0].slot_labels.iter().enumerate() {
        let (v1, s1) = subs[0].exchange[s];
        let (v2, s2) = subs[1].exchange[s];
        qp.add_eq(format!("consensus::{label}"), vec![(v1, s1), (offset + v2, s2)], 0.0);
    }
    debug_assert!(qp.validate().is_ok());
    (qp, offset)
}
