//! Splits a network into two balanced zones with as few boundary buses as
//! possible, as a small mixed-binary program: a binary per bus marks it as
//! boundary, a binary per line assigns it to zone 1, pair rows force any two
//! lines meeting at a non-boundary bus into the same zone, and a band row
//! keeps the zone line counts balanced. Zone connectivity is not expressible
//! in those rows, so assignments that island a zone are rejected after the
//! fact and cut off before the next solve.

use thiserror::Error;

use crate::formulations::{QuadraticProgram, VarKind};
use crate::network::{derive_partition, Network, NetworkError, Partition};
use crate::solver::{solve_miqp, SolveStatus, SolverError};

#[derive(Debug, Error)]
pub enum PartitionMilpError {
    #[error("unbalance tolerance must lie in [0, 0.5), got {0}")]
    BadEta(f64),
    #[error("cannot split a network with {0} line(s) into two zones")]
    TooFewLines(usize),
    #[error(
        "no integer line count fits the balance band for {lines} lines at eta = {eta}; \
         the smallest workable tolerance is eta = {min_eta}"
    )]
    NoBalancedSplit { lines: usize, eta: f64, min_eta: f64 },
    #[error("every balanced assignment islands a zone at eta = {eta}; try a larger tolerance")]
    NoConnectedSplit { eta: f64 },
    #[error("splitting search stopped without an answer ({0:?})")]
    Unresolved(SolveStatus),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// The splitting program for one network: `x[b]` marks bus `b` as a boundary
/// bus, `y[l]` puts line `l` in zone 1.
pub struct PartitionModel {
    pub qp: QuadraticProgram,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub eta: f64,
}

/// Widest zone-1 line count the balance band admits, with a hair of slack so
/// exact rational band edges survive the float arithmetic.
fn band(n_lines: usize, eta: f64) -> (f64, f64) {
    let cap = n_lines as f64 * (0.5 + eta) + 1e-9;
    (n_lines as f64 - cap, cap)
}

pub fn build_partition_model(net: &Network, eta: f64) -> Result<PartitionModel, PartitionMilpError> {
    if !(0.0..0.5).contains(&eta) {
        return Err(PartitionMilpError::BadEta(eta));
    }
    let nl = net.n_lines();
    if nl < 2 {
        return Err(PartitionMilpError::TooFewLines(nl));
    }
    let (lo, hi) = band(nl, eta);
    if lo.ceil() > hi.floor() {
        // e.g. an odd line count at eta = 0: the band halves do not meet on
        // an integer, so no assignment can ever satisfy both sides
        let min_eta = (nl as f64 / 2.0).ceil() / nl as f64 - 0.5;
        return Err(PartitionMilpError::NoBalancedSplit { lines: nl, eta, min_eta });
    }

    let mut qp = QuadraticProgram::default();
    // boundary count carried as x² — identical to counting at integer
    // points, and it keeps the relaxations strongly convex
    let x: Vec<usize> = net
        .buses
        .iter()
        .map(|bus| {
            let v = qp.add_var(format!("x[b{}]", bus.id), VarKind::Binary, 0.0, 1.0);
            qp.add_quad(v, v, 1.0);
            v
        })
        .collect();
    let y: Vec<usize> =
        (0..nl).map(|l| qp.add_var(format!("y[l{l}]"), VarKind::Binary, 0.0, 1.0)).collect();

    // two lines meeting at an interior bus must share a zone, in both
    // directions; a boundary mark lifts the restriction
    let mut incident = vec![Vec::new(); net.n_buses()];
    for (l, line) in net.lines.iter().enumerate() {
        incident[line.from].push(l);
        incident[line.to].push(l);
    }
    for (b, lines) in incident.iter().enumerate() {
        let id = net.buses[b].id;
        for (i, &q) in lines.iter().enumerate() {
            for &l in &lines[i + 1..] {
                qp.add_row(
                    format!("same_zone[b{id}][l{q}|l{l}]"),
                    vec![(y[q], 1.0), (y[l], -1.0), (x[b], -1.0)],
                    f64::NEG_INFINITY,
                    0.0,
                );
                qp.add_row(
                    format!("same_zone[b{id}][l{l}|l{q}]"),
                    vec![(y[l], 1.0), (y[q], -1.0), (x[b], -1.0)],
                    f64::NEG_INFINITY,
                    0.0,
                );
            }
        }
    }

    qp.add_row("balance", y.iter().map(|&v| (v, 1.0)).collect(), lo, hi);
    Ok(PartitionModel { qp, x, y, eta })
}

/// Solves the splitting program at the given relative gap and returns the
/// induced partition. Assignments the program likes but that island a zone
/// (its rows cannot see connectivity) are excluded one by one until a valid
/// split appears or the program runs dry.
pub fn split_network(net: &Network, eta: f64, gap: f64) -> Result<Partition, PartitionMilpError> {
    let model = build_partition_model(net, eta)?;
    let nl = net.n_lines();
    let mut rejected: Vec<Vec<usize>> = Vec::new();
    loop {
        let mut qp = model.qp.clone();
        for (k, z1) in rejected.iter().enumerate() {
            // at least one line must change sides relative to the rejected
            // assignment
            let terms: Vec<(usize, f64)> = (0..nl)
                .map(|l| (model.y[l], if z1.binary_search(&l).is_ok() { -1.0 } else { 1.0 }))
                .collect();
            qp.add_row(format!("not_again[{k}]"), terms, 1.0 - z1.len() as f64, f64::INFINITY);
        }
        let sol = solve_miqp(&qp, gap)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(PartitionMilpError::NoConnectedSplit { eta }),
            other => return Err(PartitionMilpError::Unresolved(other)),
        }
        let z1: Vec<usize> = (0..nl).filter(|&l| sol.x[model.y[l]] > 0.5).collect();
        match derive_partition(net, &z1) {
            Ok(part) => return Ok(part),
            Err(
                NetworkError::ZoneDisconnected { .. }
                | NetworkError::EmptyZone { .. }
                | NetworkError::NoSlackCandidate { .. },
            ) => rejected.push(z1),
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casefile::{BusRecord, LineRecord, RawCase};
    use crate::solver::solve_miqp;

    fn graph(name: &str, n_buses: u64, edges: &[(u64, u64)]) -> Network {
        let case = RawCase {
            name: name.into(),
            base_mva: 100.0,
            horizon: 1,
            load_profile: vec![1.0],
            buses: (1..=n_buses).map(|id| BusRecord { id, load: 0.0 }).collect(),
            lines: edges
                .iter()
                .map(|&(from, to)| LineRecord { from, to, x: 1.0, rating: 0.0, status: 1 })
                .collect(),
            generators: vec![],
        };
        Network::from_case(&case).unwrap()
    }

    /// Smallest boundary-bus count over every balanced assignment that
    /// induces a valid partition, by trying all of them.
    fn brute_force_minimum(net: &Network, eta: f64) -> Option<usize> {
        let nl = net.n_lines();
        let (lo, hi) = band(nl, eta);
        let mut best: Option<usize> = None;
        for mask in 0u32..1 << nl {
            let count = mask.count_ones() as f64;
            if count < lo || count > hi {
                continue;
            }
            let z1: Vec<usize> = (0..nl).filter(|&l| mask >> l & 1 == 1).collect();
            if let Ok(part) = derive_partition(net, &z1) {
                let n = part.boundary.len();
                best = Some(best.map_or(n, |b: usize| b.min(n)));
            }
        }
        best
    }

    #[test]
    fn path_of_five_splits_at_the_middle_bus() {
        let net = graph("path5", 5, &[(1, 2), (2, 3), (3, 4), (4, 5)]);
        let part = split_network(&net, 0.1, 0.0).unwrap();
        assert_eq!(part.boundary, vec![2], "seam away from the middle: {part:?}");
        assert_eq!(part.zone1_lines.len(), 2);
        assert_eq!(part.zone2_lines.len(), 2);
        let ends = [part.zone1_lines.clone(), part.zone2_lines.clone()];
        assert!(ends.contains(&vec![0, 1]) && ends.contains(&vec![2, 3]));
        assert_eq!(brute_force_minimum(&net, 0.1), Some(1));
    }

    #[test]
    fn complete_four_islands_every_balanced_assignment() {
        // any three-plus-three split of the six lines leaves one side with no
        // interior bus, so cut after cut the program runs dry — and trying
        // every assignment agrees there is nothing to find
        let net = graph("k4", 4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(brute_force_minimum(&net, 0.2), None);
        match split_network(&net, 0.2, 0.0) {
            Err(PartitionMilpError::NoConnectedSplit { .. }) => {}
            other => panic!("expected the search to run dry, got {other:?}"),
        }
    }

    #[test]
    fn barbell_puts_the_seam_on_the_bridge() {
        let net = graph(
            "barbell",
            6,
            &[(1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6), (5, 6)],
        );
        let model = build_partition_model(&net, 0.1).unwrap();
        let sol = solve_miqp(&model.qp, 0.0).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let z1: Vec<usize> =
            (0..net.n_lines()).filter(|&l| sol.x[model.y[l]] > 0.5).collect();
        let part = derive_partition(&net, &z1).unwrap();
        let marked: usize = model.x.iter().map(|&v| sol.x[v].round() as usize).sum();
        assert_eq!(part.boundary.len(), marked, "boundary marks out of step with the split");
        assert_eq!(part.boundary.len(), brute_force_minimum(&net, 0.1).unwrap());
        assert_eq!(part.boundary.len(), 1);
        // one triangle per side, the bridge with one of them
        let sizes = [part.zone1_lines.len(), part.zone2_lines.len()];
        assert!(sizes == [3, 4] || sizes == [4, 3]);
        assert!(part.is_boundary(part.boundary[0]));
        assert!(!part.zone1_buses.contains(&part.boundary[0]));

        let via_search = split_network(&net, 0.1, 0.0).unwrap();
        assert_eq!(via_search.boundary.len(), 1);
    }

    #[test]
    fn odd_line_count_needs_balance_slack() {
        let net = graph("path4", 4, &[(1, 2), (2, 3), (3, 4)]);
        match split_network(&net, 0.0, 0.0) {
            Err(PartitionMilpError::NoBalancedSplit { lines, min_eta, .. }) => {
                assert_eq!(lines, 3);
                assert!((min_eta - 1.0 / 6.0).abs() <= 1e-12, "suggested eta {min_eta}");
            }
            other => panic!("expected the balance band to be empty, got {other:?}"),
        }
        // the suggested tolerance (plus a hair) makes the same network work
        let part = split_network(&net, 1.0 / 6.0 + 1e-9, 0.0).unwrap();
        assert_eq!(part.boundary.len(), 1);
        assert_eq!(part.zone1_lines.len() + part.zone2_lines.len(), 3);
    }

    #[test]
    fn arguments_are_checked_before_any_work() {
        let net = graph("pair", 2, &[(1, 2)]);
        assert!(matches!(split_network(&net, 0.5, 0.0), Err(PartitionMilpError::BadEta(_))));
        assert!(matches!(
            split_network(&net, 0.1, 0.0),
            Err(PartitionMilpError::TooFewLines(1))
        ));
    }
}
