//! Injection shift factors, outage distribution factors, and contingency
//! topologies.
//!
//! Shift factors are stored as a dense |L| × |B| matrix with an explicit zero
//! slack column. Rows carry the slack convention they were computed against:
//! the centralized path uses one slack for every row, while the two-zone path
//! computes zone-1 rows against the zone-1 slack and zone-2 rows against the
//! zone-2 slack. Flows reconstructed as `f = Δ n` agree between the two
//! conventions for any balanced injection vector.

use crate::linsolve::{LinsolveError, LuFactor, Mat, SpdFactor};
use crate::network::{build_matrices, Network, NetworkMatrices, Partition};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IsfError {
    #[error(transparent)]
    Linsolve(#[from] LinsolveError),
    #[error("outage of line {line} islands zone {zone}")]
    OutageIslands { line: usize, zone: u8 },
    #[error("line {line} is a tie line; tie-line outages are not supported")]
    TieLineOutage { line: usize },
    #[error("line index {line} out of range")]
    BadLine { line: usize },
}

/// Which bus-set block of columns to extract from a shift-factor matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusBlock {
    Zone1Interior,
    Boundary,
    Zone2Interior,
}

/// Dense shift-factor matrix with per-row slack annotations.
#[derive(Debug, Clone)]
pub struct IsfMatrix {
    /// |L| × |B|; entry (l, b) is the MW flow on line l per MW injected at
    /// bus b and withdrawn at the row's slack.
    pub mat: Mat,
    /// Slack bus index each row was computed against.
    pub row_slack: Vec<usize>,
    /// For a contingency matrix, the removed line (its row is zero).
    pub outage: Option<usize>,
}

impl IsfMatrix {
    pub fn entry(&self, line: usize, bus: usize) -> f64 {
        self.mat.at(line, bus)
    }

    /// Flows for a balanced injection vector (Σn = 0).
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        self.mat.matvec(injections)
    }

    /// Extracts the block of rows belonging to one zone's lines and columns
    /// belonging to one bus set of the partition.
    pub fn block(&self, part: &Partition, row_zone: u8, cols: BusBlock) -> Mat {
        let rows = part.lines_of(row_zone);
        let col_ix: &[usize] = match cols {
            BusBlock::Zone1Interior => &part.zone1_buses,
            BusBlock::Boundary => &part.boundary,
            BusBlock::Zone2Interior => &part.zone2_buses,
        };
        self.mat.submatrix(rows, col_ix)
    }
}

/// Centralized path: `Δ = D M G⁻¹` computed column-by-column against a single
/// slack, columns solved in parallel over the shared factorization.
pub fn isf_centralized(m: &NetworkMatrices) -> Result<IsfMatrix, IsfError> {
    let nl = m.m.rows();
    let nb = m.keep.len() + 1;
    let factor = SpdFactor::new(&m.g)?;
    let cols: Vec<(usize, Vec<f64>)> = m
        .keep
        .par_iter()
        .enumerate()
        .map(|(c, &bus)| {
            let mut e = vec![0.0; m.keep.len()];
            e[c] = 1.0;
            let theta = factor.solve(&e)?;
            let mut flows = m.m.matvec(&theta);
            for (f, d) in flows.iter_mut().zip(&m.d) {
                *f *= d;
            }
            Ok((bus, flows))
        })
        .collect::<Result<_, LinsolveError>>()?;
    let mut mat = Mat::zeros(nl, nb);
    for (bus, flows) in cols {
        for (l, f) in flows.into_iter().enumerate() {
            mat.set(l, bus, f);
        }
    }
    Ok(IsfMatrix { mat, row_slack: vec![m.slack; nl], outage: None })
}

/// Index bookkeeping for the coupled two-zone angle system under one slack
/// convention.
struct CoupledSystem {
    factor: LuFactor,
    /// Variable index of zone-1 / zone-2 angle per bus (None = pinned slack
    /// or bus not in that zone).
    th1: Vec<Option<usize>>,
    th2: Vec<Option<usize>>,
    /// Balance-row index per bus for each zone (boundary buses have one in
    /// each zone).
    row1: Vec<Option<usize>>,
    row2: Vec<Option<usize>>,
    dim: usize,
}

/// Assembles the coupled system for slack convention `k`: per-zone angle
/// variables, boundary import variables w (w¹ = w, w² = −w), per-zone balance
/// rows, and boundary consensus rows. The convention's slack angle is pinned
/// to zero and its balance row dropped.
fn assemble_coupled(
    net: &Network,
    part: &Partition,
    k: u8,
    skip_line: Option<usize>,
) -> Result<CoupledSystem, IsfError> {
    let nb = net.n_buses();
    let pinned = part.slack_of(k);

    let mut th1 = vec![None; nb];
    let mut th2 = vec![None; nb];
    let mut next = 0usize;
    for &b in part.zone1_buses.iter().chain(&part.boundary) {
        if !(k == 1 && b == pinned) {
            th1[b] = Some(next);
            next += 1;
        }
    }
    for &b in part.zone2_buses.iter().chain(&part.boundary) {
        if !(k == 2 && b == pinned) {
            th2[b] = Some(next);
            next += 1;
        }
    }
    let w_of: Vec<usize> = (0..part.boundary.len()).map(|i| next + i).collect();
    next += part.boundary.len();
    let dim = next;

    let mut a = Mat::zeros(dim, dim);
    let mut row1 = vec![None; nb];
    let mut row2 = vec![None; nb];
    let mut row = 0usize;

    // zone-k' Laplacian stencil into row `r` for bus `b` over that zone's lines
    let stencil = |a: &mut Mat, r: usize, b: usize, zone_lines: &[usize], th: &[Option<usize>]| {
        for &l in zone_lines {
            if Some(l) == skip_line {
                continue;
            }
            let line = &net.lines[l];
            if line.from == b || line.to == b {
                let other = if line.from == b { line.to } else { line.from };
                if let Some(v) = th[b] {
                    a.add_at(r, v, line.beta);
                }
                if let Some(v) = th[other] {
                    a.add_at(r, v, -line.beta);
                }
            }
        }
    };

    for &b in &part.zone1_buses {
        if k == 1 && b == pinned {
            continue;
        }
        stencil(&mut a, row, b, &part.zone1_lines, &th1);
        row1[b] = Some(row);
        row += 1;
    }
    for (i, &b) in part.boundary.iter().enumerate() {
        stencil(&mut a, row, b, &part.zone1_lines, &th1);
        a.add_at(row, w_of[i], -1.0);
        row1[b] = Some(row);
        row += 1;
    }
    for &b in &part.zone2_buses {
        if k == 2 && b == pinned {
            continue;
        }
        stencil(&mut a, row, b, &part.zone2_lines, &th2);
        row2[b] = Some(row);
        row += 1;
    }
    for (i, &b) in part.boundary.iter().enumerate() {
        stencil(&mut a, row, b, &part.zone2_lines, &th2);
        a.add_at(row, w_of[i], 1.0);
        row2[b] = Some(row);
        row += 1;
    }
    for &b in &part.boundary {
        a.add_at(row, th1[b].expect("boundary angle in zone 1"), 1.0);
        a.add_at(row, th2[b].expect("boundary angle in zone 2"), -1.0);
        row += 1;
    }
    debug_assert_eq!(row, dim);

    let factor = LuFactor::new(&a).map_err(|e| match e {
        LinsolveError::Singular { .. } => IsfError::OutageIslands {
            line: skip_line.unwrap_or(usize::MAX),
            zone: k,
        },
        other => IsfError::Linsolve(other),
    })?;
    Ok(CoupledSystem { factor, th1, th2, row1, row2, dim })
}

impl CoupledSystem {
    /// Unit injection at `bus` (withdrawal lands at the pinned slack via its
    /// dropped balance row); returns both zones' angle solutions.
    fn solve_column(&self, bus: usize) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>), IsfError> {
        let mut rhs = vec![0.0; self.dim];
        // A boundary bus carries its injection on the zone-1 copy of its
        // balance; either zone's copy yields the same solution since only
        // the sum w¹ + w² is pinned.
        let r = self.row1[bus].or(self.row2[bus]).expect("bus has a balance row");
        rhs[r] = 1.0;
        let x = self.factor.solve(&rhs)?;
        let lift = |th: &[Option<usize>]| th.iter().map(|v| v.map(|i| x[i])).collect::<Vec<_>>();
        Ok((lift(&self.th1), lift(&self.th2)))
    }
}

fn decentralized_with_skip(
    net: &Network,
    part: &Partition,
    skip_line: Option<usize>,
) -> Result<IsfMatrix, IsfError> {
    let nl = net.n_lines();
    let nb = net.n_buses();
    let mut mat = Mat::zeros(nl, nb);
    let mut row_slack = vec![0usize; nl];
    for k in [1u8, 2u8] {
        let sys = assemble_coupled(net, part, k, skip_line)?;
        let slack = part.slack_of(k);
        let zone_lines = part.lines_of(k);
        for &l in zone_lines {
            row_slack[l] = slack;
        }
        let cols: Vec<(usize, Vec<(usize, f64)>)> = (0..nb)
            .into_par_iter()
            .filter(|&b| b != slack)
            .map(|b| {
                let (th1, th2) = sys.solve_column(b)?;
                let mut entries = Vec::with_capacity(zone_lines.len());
                for &l in zone_lines {
                    if Some(l) == skip_line {
                        continue;
                    }
                    let line = &net.lines[l];
                    let th = if k == 1 { &th1 } else { &th2 };
                    let tu = th[line.from].unwrap_or(0.0);
                    let tv = th[line.to].unwrap_or(0.0);
                    entries.push((l, line.beta * (tu - tv)));
                }
                Ok((b, entries))
            })
            .collect::<Result<_, IsfError>>()?;
        for (b, entries) in cols {
            for (l, f) in entries {
                mat.set(l, b, f);
            }
        }
    }
    Ok(IsfMatrix { mat, row_slack, outage: skip_line })
}

/// Two-zone path: every column is a unit-injection solve of the coupled
/// zone-1/zone-2 angle system; zone-k rows are read from the convention whose
/// slack lies in zone k.
pub fn isf_decentralized(net: &Network, part: &Partition) -> Result<IsfMatrix, IsfError> {
    decentralized_with_skip(net, part, None)
}

/// Shift factors of the topology with one internal line removed, same
/// per-zone slacks. The removed line's row is zero.
pub fn contingency_isf(
    net: &Network,
    part: &Partition,
    outage: usize,
) -> Result<IsfMatrix, IsfError> {
    if outage >= net.n_lines() {
        return Err(IsfError::BadLine { line: outage });
    }
    if part.tie_lines(net).contains(&outage) {
        return Err(IsfError::TieLineOutage { line: outage });
    }
    let zone = part.zone_of_line(outage);
    if !zone_connected_without(net, part, zone, outage) {
        return Err(IsfError::OutageIslands { line: outage, zone });
    }
    decentralized_with_skip(net, part, Some(outage))
}

/// Connectivity of one zone's subnetwork with a line removed.
pub(crate) fn zone_connected_without(
    net: &Network,
    part: &Partition,
    zone: u8,
    outage: usize,
) -> bool {
    let lines = part.lines_of(zone);
    let mut verts: Vec<usize> = part.interior_of(zone).to_vec();
    verts.extend_from_slice(&part.boundary);
    verts.sort_unstable();
    let pos = |b: usize| verts.binary_search(&b).expect("zone vertex");
    let mut parent: Vec<usize> = (0..verts.len()).collect();
    fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &l in lines {
        if l == outage {
            continue;
        }
        let (u, v) = (pos(net.lines[l].from), pos(net.lines[l].to));
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let r0 = find(&mut parent, 0);
    (0..verts.len()).all(|v| find(&mut parent, v) == r0)
}

/// Sentinel stored for (m, q) pairs where line q is a bridge.
pub const LODF_BRIDGE: f64 = f64::NAN;

/// Bridge-detection threshold on the LODF denominator.
pub const BRIDGE_TOL: f64 = 1e-9;

/// Line outage distribution factors φ_mq: the fraction of line q's pre-outage
/// flow that shifts onto line m when q is removed.
#[derive(Debug, Clone)]
pub struct LodfMatrix {
    /// |L| × |L|, row m, column q. `NaN` marks a bridge outage.
    pub phi: Mat,
    /// Lines whose removal islands the network.
    pub bridges: Vec<usize>,
}

impl LodfMatrix {
    pub fn at(&self, m: usize, q: usize) -> f64 {
        self.phi.at(m, q)
    }

    pub fn is_bridge(&self, q: usize) -> bool {
        self.bridges.binary_search(&q).is_ok()
    }
}

/// Computes φ from the shift-factor matrix:
/// φ_mq = (δ_{m,u(q)} − δ_{m,v(q)}) / (1 − (δ_{q,u(q)} − δ_{q,v(q)})).
/// Both numerator and denominator are balanced column differences, so the
/// formula is valid under mixed per-zone slack conventions. φ_qq = −1 by
/// convention; bridge columns hold the sentinel.
pub fn lodf(isf: &IsfMatrix, net: &Network) -> LodfMatrix {
    let nl = net.n_lines();
    let mut phi = Mat::zeros(nl, nl);
    let mut bridges = Vec::new();
    for q in 0..nl {
        let (u, v) = (net.lines[q].from, net.lines[q].to);
        let self_transfer = isf.entry(q, u) - isf.entry(q, v);
        let denom = 1.0 - self_transfer;
        if denom.abs() < BRIDGE_TOL {
            bridges.push(q);
            for m in 0..nl {
                phi.set(m, q, LODF_BRIDGE);
            }
            continue;
        }
        for m in 0..nl {
            if m == q {
                phi.set(m, q, -1.0);
            } else {
                phi.set(m, q, (isf.entry(m, u) - isf.entry(m, v)) / denom);
            }
        }
    }
    LodfMatrix { phi, bridges }
}

/// One contingency: the base network minus one internal line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub line: usize,
    pub zone: u8,
}

/// The monitored outage set T: every internal (non-tie) line whose removal
/// keeps its zone connected.
#[derive(Debug, Clone, Default)]
pub struct ContingencySet {
    pub contingencies: Vec<Contingency>,
    /// Lines excluded because they are tie lines.
    pub excluded_ties: Vec<usize>,
    /// Lines excluded because removal would island part of a zone.
    pub excluded_bridges: Vec<usize>,
}

impl ContingencySet {
    /// Enumerates eligible single-line outages. `include_ties` is accepted as
    /// a flag for forward compatibility but unsupported: changing the
    /// boundary region under an outage is not modelled.
    pub fn build(
        net: &Network,
        part: &Partition,
        include_ties: bool,
    ) -> Result<ContingencySet, IsfError> {
        if include_ties {
            return Err(IsfError::TieLineOutage {
                line: part.tie_lines(net).first().copied().unwrap_or(0),
            });
        }
        let ties = part.tie_lines(net);
        let mut set = ContingencySet::default();
        for l in 0..net.n_lines() {
            if ties.binary_search(&l).is_ok() {
                set.excluded_ties.push(l);
                continue;
            }
            let zone = part.zone_of_line(l);
            if !zone_connected_without(net, part, zone, l) {
                set.excluded_bridges.push(l);
                continue;
            }
            set.contingencies.push(Contingency { line: l, zone });
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.contingencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contingencies.is_empty()
    }
}

/// Centralized shift factors for a network with one line removed, same single
/// slack; rows keep base-network line indexing with the outaged row zeroed.
/// (Oracle-grade helper used by tests and schedule evaluation.)
pub fn centralized_without(
    net: &Network,
    slack: usize,
    outage: usize,
) -> Result<IsfMatrix, IsfError> {
    let mut reduced = net.clone();
    reduced.lines[outage].beta = 0.0;
    // A zero-susceptance line contributes nothing to G or to flows; drop it
    // from the incidence by rebuilding with the line filtered out.
    let kept: Vec<crate::network::Line> = reduced
        .lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != outage)
        .map(|(_, l)| l.clone())
        .collect();
    reduced.lines = kept;
    let m = build_matrices(&reduced, slack);
    let r = isf_centralized(&m)?;
    let nl = net.n_lines();
    let nb = net.n_buses();
    let mut mat = Mat::zeros(nl, nb);
    let mut src = 0usize;
    for l in 0..nl {
        if l == outage {
            continue;
        }
        for b in 0..nb {
            mat.set(l, b, r.mat.at(src, b));
        }
        src += 1;
    }
    Ok(IsfMatrix { mat, row_slack: vec![slack; nl], outage: Some(outage) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casefile::{BusRecord, LineRecord, RawCase};
    use crate::fixtures;
    use crate::network::derive_partition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Published shift factors of the eight-bus system, zone-1 rows against
    /// slack 1, zone-2 rows against slack 8, printed to two decimals.
    pub(crate) const FIG1_EXPECTED: [[f64; 8]; 10] = [
        [0.00, -0.65, -0.06, -0.29, -0.12, -0.23, -0.19, -0.21],
        [0.00, -0.06, -0.81, -0.12, -0.62, -0.31, -0.44, -0.38],
        [0.00, -0.29, -0.12, -0.58, -0.25, -0.46, -0.38, -0.42],
        [0.00, 0.35, -0.06, -0.29, -0.12, -0.23, -0.19, -0.21],
        [0.00, -0.06, 0.19, -0.12, -0.62, -0.31, -0.44, -0.38],
        [0.62, 0.69, 0.44, 0.75, 0.25, -0.06, 0.06, 0.00],
        [0.38, 0.31, 0.56, 0.25, 0.75, 0.06, -0.06, 0.00],
        [0.08, 0.12, -0.04, 0.17, -0.17, 0.29, -0.29, 0.00],
        [0.54, 0.56, 0.48, 0.58, 0.42, 0.65, 0.35, 0.00],
        [0.46, 0.44, 0.52, 0.42, 0.58, 0.35, 0.65, 0.00],
    ];

    fn max_diff_vs_expected(m: &IsfMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for l in 0..10 {
            for b in 0..8 {
                worst = worst.max((m.entry(l, b) - FIG1_EXPECTED[l][b]).abs());
            }
        }
        worst
    }

    #[test]
    fn centralized_matches_published_zone1_block() {
        let net = fixtures::fig1_network();
        let m = build_matrices(&net, net.bus_index(1).unwrap());
        let isf = isf_centralized(&m).unwrap();
        // zone-1 rows of the published matrix use slack 1
        let mut worst = 0.0_f64;
        for l in 0..5 {
            for b in 0..8 {
                worst = worst.max((isf.entry(l, b) - FIG1_EXPECTED[l][b]).abs());
            }
        }
        assert!(worst <= 0.005 + 1e-12, "max deviation {worst}");
    }

    #[test]
    fn decentralized_matches_full_published_matrix() {
        let net = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&net);
        let isf = isf_decentralized(&net, &part).unwrap();
        let worst = max_diff_vs_expected(&isf);
        assert!(worst <= 0.005 + 1e-12, "max deviation {worst}");
        // slack columns of each block are zero
        for l in 0..5 {
            assert_eq!(isf.entry(l, 0), 0.0);
        }
        for l in 5..10 {
            assert_eq!(isf.entry(l, 7), 0.0);
        }
    }

    #[test]
    fn decentralized_equals_centralized_per_zone_block() {
        for seed in 0..8u64 {
            let (case, z1) = fixtures::random_two_zone_case(seed, 6, 7, 2);
            let net = crate::network::Network::from_case(&case).unwrap();
            let part = derive_partition(&net, &z1).unwrap();
            let dec = isf_decentralized(&net, &part).unwrap();
            for zone in [1u8, 2] {
                let slack = part.slack_of(zone);
                let cen = isf_centralized(&build_matrices(&net, slack)).unwrap();
                for &l in part.lines_of(zone) {
                    for b in 0..net.n_buses() {
                        let d = (dec.entry(l, b) - cen.entry(l, b)).abs();
                        assert!(
                            d <= 1e-9,
                            "seed {seed} zone {zone} line {l} bus {b}: diff {d:.2e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn two_bus_single_line_carries_injection() {
        // line oriented non-slack -> slack gives +1
        let case = RawCase {
            name: "two_bus_rev".into(),
            base_mva: 100.0,
            horizon: 1,
            load_profile: vec![1.0],
            buses: vec![BusRecord { id: 1, load: 0.0 }, BusRecord { id: 2, load: 5.0 }],
            lines: vec![LineRecord { from: 2, to: 1, x: 0.5, rating: 0.0, status: 1 }],
            generators: vec![],
        };
        let net = crate::network::Network::from_case(&case).unwrap();
        let isf = isf_centralized(&build_matrices(&net, 0)).unwrap();
        assert_eq!(isf.entry(0, 0), 0.0);
        assert!((isf.entry(0, 1) - 1.0).abs() < 1e-12);
        // with the conventional orientation slack -> load the sign flips
        let fwd = crate::network::Network::from_case(&fixtures::two_bus_case(5.0, 0.5, 0.0)).unwrap();
        let isf2 = isf_centralized(&build_matrices(&fwd, 0)).unwrap();
        assert!((isf2.entry(0, 1) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_path_gives_prefix_sum_pattern() {
        // path 4-3-2-1 with lines oriented toward the slack at bus 1
        let case = RawCase {
            name: "path4".into(),
            base_mva: 100.0,
            horizon: 1,
            load_profile: vec![1.0],
            buses: (1..=4).map(|id| BusRecord { id, load: 0.0 }).collect(),
            lines: vec![
                LineRecord { from: 2, to: 1, x: 1.0, rating: 0.0, status: 1 },
                LineRecord { from: 3, to: 2, x: 1.0, rating: 0.0, status: 1 },
                LineRecord { from: 4, to: 3, x: 1.0, rating: 0.0, status: 1 },
            ],
            generators: vec![],
        };
        let net = crate::network::Network::from_case(&case).unwrap();
        let isf = isf_centralized(&build_matrices(&net, 0)).unwrap();
        let expected = [
            [0.0, 1.0, 1.0, 1.0], // line (2,1) carries everything injected past it
            [0.0, 0.0, 1.0, 1.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for l in 0..3 {
            for b in 0..4 {
                assert!(
                    (isf.entry(l, b) - expected[l][b]).abs() < 1e-12,
                    "line {l} bus {b}"
                );
            }
        }
    }

    #[test]
    fn flow_reconstruction_matches_angle_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (case, z1) = fixtures::random_two_zone_case(99, 8, 8, 3);
        let net = crate::network::Network::from_case(&case).unwrap();
        let part = derive_partition(&net, &z1).unwrap();
        let isf = isf_decentralized(&net, &part).unwrap();
        let m = build_matrices(&net, part.slack1);
        let factor = SpdFactor::new(&m.g).unwrap();
        for _ in 0..100 {
            // balanced injections, zero on the boundary
            let mut n = vec![0.0; net.n_buses()];
            for b in 0..net.n_buses() {
                if !part.is_boundary(b) {
                    n[b] = rng.gen_range(-10.0..10.0);
                }
            }
            let total: f64 = n.iter().sum();
            // dump the imbalance on a non-boundary bus
            let fix = (0..net.n_buses()).find(|&b| !part.is_boundary(b)).unwrap();
            n[fix] -= total;
            let f_isf = isf.flows(&n);
            let reduced: Vec<f64> = m.keep.iter().map(|&b| n[b]).collect();
            let theta = factor.solve(&reduced).unwrap();
            let mut f_direct = m.m.matvec(&theta);
            for (f, d) in f_direct.iter_mut().zip(&m.d) {
                *f *= d;
            }
            let scale = 1.0 + f_direct.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            for l in 0..net.n_lines() {
                assert!(
                    (f_isf[l] - f_direct[l]).abs() <= 1e-8 * scale,
                    "line {l}: {} vs {}",
                    f_isf[l],
                    f_direct[l]
                );
            }
        }
    }

    #[test]
    fn slack_choice_does_not_change_balanced_flows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (case, _) = fixtures::random_two_zone_case(3, 6, 6, 2);
        let net = crate::network::Network::from_case(&case).unwrap();
        let a = isf_centralized(&build_matrices(&net, 0)).unwrap();
        let b = isf_centralized(&build_matrices(&net, net.n_buses() - 1)).unwrap();
        for _ in 0..20 {
            let mut n: Vec<f64> = (0..net.n_buses()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let total: f64 = n.iter().sum();
            n[0] -= total;
            let fa = a.flows(&n);
            let fb = b.flows(&n);
            for l in 0..net.n_lines() {
                assert!((fa[l] - fb[l]).abs() <= 1e-8, "line {l}");
            }
        }
    }

    #[test]
    fn lodf_matches_resolve_oracle_on_fig1() {
        let net = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&net);
        let isf = isf_decentralized(&net, &part).unwrap();
        let phi = lodf(&isf, &net);
        // balanced injection: generation at buses 1 and 8 covering the loads
        let mut n = vec![0.0; 8];
        n[net.bus_index(2).unwrap()] = -20.0;
        n[net.bus_index(3).unwrap()] = -30.0;
        n[net.bus_index(6).unwrap()] = -25.0;
        n[net.bus_index(7).unwrap()] = -25.0;
        n[net.bus_index(1).unwrap()] = 55.0;
        n[net.bus_index(8).unwrap()] = 45.0;
        let f0 = isf.flows(&n);
        for q in 0..net.n_lines() {
            if phi.is_bridge(q) {
                continue;
            }
            let resolved = centralized_without(&net, part.slack1, q).unwrap();
            let fq = resolved.flows(&n);
            for m in 0..net.n_lines() {
                if m == q {
                    continue;
                }
                let predicted = f0[m] + phi.at(m, q) * f0[q];
                assert!(
                    (predicted - fq[m]).abs() <= 1e-8,
                    "m={m} q={q}: predicted {predicted}, oracle {}",
                    fq[m]
                );
            }
        }
    }

    #[test]
    fn lodf_bridge_and_self_outage_conventions() {
        let net = crate::network::Network::from_case(&fixtures::two_bus_case(5.0, 1.0, 0.0)).unwrap();
        let isf = isf_centralized(&build_matrices(&net, 0)).unwrap();
        let phi = lodf(&isf, &net);
        assert!(phi.is_bridge(0));
        assert!(phi.at(0, 0).is_nan());

        let fig1 = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&fig1);
        let isf1 = isf_decentralized(&fig1, &part).unwrap();
        let phi1 = lodf(&isf1, &fig1);
        assert!(phi1.bridges.is_empty());
        for q in 0..fig1.n_lines() {
            assert_eq!(phi1.at(q, q), -1.0);
        }
    }

    #[test]
    fn contingency_isf_matches_centralized_recompute() {
        let net = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&net);
        // line (6,7) has index 7 and is internal to zone 2
        let tau = contingency_isf(&net, &part, 7).unwrap();
        assert_eq!(tau.outage, Some(7));
        for zone in [1u8, 2] {
            let cen = centralized_without(&net, part.slack_of(zone), 7).unwrap();
            for &l in part.lines_of(zone) {
                for b in 0..net.n_buses() {
                    assert!(
                        (tau.entry(l, b) - cen.entry(l, b)).abs() <= 1e-9,
                        "zone {zone} line {l} bus {b}"
                    );
                }
            }
        }
        // the removed row is zeroed
        for b in 0..net.n_buses() {
            assert_eq!(tau.entry(7, b), 0.0);
        }
    }

    #[test]
    fn contingency_isf_finite_with_parallel_line() {
        let mut case = fixtures::fig1_case();
        // duplicate line (6,7) so removing one copy leaves the other
        case.lines.push(LineRecord { from: 6, to: 7, x: 1.0, rating: 100.0, status: 1 });
        let net = crate::network::Network::from_case(&case).unwrap();
        let part = fixtures::fig1_partition(&net);
        let tau = contingency_isf(&net, &part, 7).unwrap();
        for l in 0..net.n_lines() {
            for b in 0..net.n_buses() {
                assert!(tau.entry(l, b).is_finite());
            }
        }
    }

    #[test]
    fn contingency_isf_rejects_islanding_outage() {
        let mut case = fixtures::fig1_case();
        // bus 9 hangs off bus 7 by a single line; removing it islands bus 9
        case.buses.push(BusRecord { id: 9, load: 0.0 });
        case.lines.push(LineRecord { from: 7, to: 9, x: 1.0, rating: 100.0, status: 1 });
        let net = crate::network::Network::from_case(&case).unwrap();
        let part = fixtures::fig1_partition(&net);
        let leaf = net.n_lines() - 1;
        match contingency_isf(&net, &part, leaf) {
            Err(IsfError::OutageIslands { line, zone: 2 }) => assert_eq!(line, leaf),
            other => panic!("expected OutageIslands, got {other:?}"),
        }
    }

    #[test]
    fn contingency_isf_rejects_tie_line() {
        let net = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&net);
        // line (4,6) touches boundary bus 4
        match contingency_isf(&net, &part, 5) {
            Err(IsfError::TieLineOutage { line: 5 }) => {}
            other => panic!("expected TieLineOutage, got {other:?}"),
        }
    }

    #[test]
    fn contingency_set_excludes_ties_and_bridges() {
        let mut case = fixtures::fig1_case();
        case.buses.push(BusRecord { id: 9, load: 0.0 });
        case.lines.push(LineRecord { from: 7, to: 9, x: 1.0, rating: 100.0, status: 1 });
        let net = crate::network::Network::from_case(&case).unwrap();
        let part = fixtures::fig1_partition(&net);
        let set = ContingencySet::build(&net, &part, false).unwrap();
        let lines: Vec<usize> = set.contingencies.iter().map(|c| c.line).collect();
        // ties: 2,3,4 (zone 1, touch buses 4/5) and 5,6 (zone 2); removing
        // (1,3) strands {3,5} within zone 1, so line 1 counts as a bridge
        // even though the whole network would stay connected
        assert_eq!(set.excluded_ties, vec![2, 3, 4, 5, 6]);
        assert_eq!(set.excluded_bridges, vec![1, 10]);
        assert_eq!(lines, vec![0, 7, 8, 9]);
        assert!(ContingencySet::build(&net, &part, true).is_err());
    }

    #[test]
    fn block_accessors_slice_the_partition() {
        let net = fixtures::fig1_network();
        let part = fixtures::fig1_partition(&net);
        let isf = isf_decentralized(&net, &part).unwrap();
        let b = isf.block(&part, 1, BusBlock::Boundary);
        assert_eq!((b.rows(), b.cols()), (5, 2));
        assert_eq!(b.at(0, 0), isf.entry(0, net.bus_index(4).unwrap()));
        let z2 = isf.block(&part, 2, BusBlock::Zone2Interior);
        assert_eq!((z2.rows(), z2.cols()), (5, 3));
    }
}
