//! Internal network model, incidence/Laplacian assembly, and two-zone
//! partitions.
//!
//! A [`Network`] is built from a validated [`RawCase`]: out-of-service lines
//! are dropped, susceptance is derived as β = 1/x, a zero rating becomes an
//! unlimited line, and generator defaults are applied (and recorded). Buses,
//! lines, and generators are addressed by dense internal indices from here on.

use crate::casefile::{CaseError, RawCase};
use crate::linsolve::Mat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("network is not connected: {components} components (bus {sample} is isolated from bus {reference})")]
    NotConnected { components: usize, sample: u64, reference: u64 },
    #[error("zone {zone} line set is empty")]
    EmptyZone { zone: u8 },
    #[error("zone {zone} subnetwork is not connected")]
    ZoneDisconnected { zone: u8 },
    #[error("zone {zone} has no interior bus to act as slack")]
    NoSlackCandidate { zone: u8 },
    #[error("bus {bus} is not an interior bus of zone {zone}, cannot be its slack")]
    SlackNotInZone { bus: u64, zone: u8 },
    #[error("invalid zone-1 line list: {0}")]
    BadLineSet(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External id from the case file.
    pub id: u64,
    /// Base load, MW.
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Susceptance, 1/x.
    pub beta: f64,
    /// Flow limit in MW; `f64::INFINITY` when unlimited.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gen {
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub ramp: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub startup: f64,
}

/// In-memory network over dense indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub gens: Vec<Gen>,
    pub horizon: usize,
    pub load_profile: Vec<f64>,
    /// Record of defaults filled while completing the case.
    pub defaults_applied: Vec<String>,
    id_to_index: BTreeMap<u64, usize>,
}

impl Network {
    pub fn from_case(case: &RawCase) -> Result<Self, NetworkError> {
        case.validate()?;
        let mut case = case.clone();
        let defaults_applied = case.apply_defaults();

        let mut id_to_index = BTreeMap::new();
        let mut buses = Vec::with_capacity(case.buses.len());
        for b in &case.buses {
            id_to_index.insert(b.id, buses.len());
            buses.push(Bus { id: b.id, load: b.load });
        }
        let lines: Vec<Line> = case
            .lines
            .iter()
            .filter(|l| l.status == 1)
            .map(|l| Line {
                from: id_to_index[&l.from],
                to: id_to_index[&l.to],
                beta: 1.0 / l.x,
                limit: if l.rating > 0.0 { l.rating } else { f64::INFINITY },
            })
            .collect();
        let gens: Vec<Gen> = case
            .generators
            .iter()
            .map(|g| Gen {
                bus: id_to_index[&g.bus],
                pmin: g.pmin,
                pmax: g.pmax,
                ramp: g.ramp.expect("defaults applied"),
                min_up: g.min_up.expect("defaults applied"),
                min_down: g.min_down.expect("defaults applied"),
                c2: g.c2,
                c1: g.c1,
                c0: g.c0,
                startup: g.startup.expect("defaults applied"),
            })
            .collect();

        let net = Network {
            name: case.name.clone(),
            buses,
            lines,
            gens,
            horizon: case.horizon,
            load_profile: case.load_profile.clone(),
            defaults_applied,
            id_to_index,
        };
        net.check_connected()?;
        Ok(net)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_index(&self, id: u64) -> Option<usize> {
        self.id_to_index.get(&id).copied()
    }

    pub fn bus_id(&self, ix: usize) -> u64 {
        self.buses[ix].id
    }

    /// Load at a bus in a given period, MW.
    pub fn load(&self, bus: usize, t: usize) -> f64 {
        self.buses[bus].load * self.load_profile[t]
    }

    /// Total system load per period, MW.
    pub fn total_load(&self, t: usize) -> f64 {
        self.load_profile[t] * self.buses.iter().map(|b| b.load).sum::<f64>()
    }

    /// Generators attached to a bus.
    pub fn gens_at(&self, bus: usize) -> Vec<usize> {
        (0..self.gens.len()).filter(|&g| self.gens[g].bus == bus).collect()
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let comp = components(self.n_buses(), self.lines.iter().map(|l| (l.from, l.to)));
        let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
        if n_comp > 1 {
            let sample = comp.iter().position(|&c| c != comp[0]).expect(">1 components");
            return Err(NetworkError::NotConnected {
                components: n_comp,
                sample: self.buses[sample].id,
                reference: self.buses[0].id,
            });
        }
        Ok(())
    }

    /// Connectivity of the network with one line removed. Used for
    /// contingency screening.
    pub fn connected_without(&self, line: usize) -> bool {
        let it = self
            .lines
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != line)
            .map(|(_, l)| (l.from, l.to));
        let comp = components(self.n_buses(), it);
        comp.iter().all(|&c| c == 0)
    }
}

/// Union-find style component labelling; returns a component id per vertex,
/// with ids renumbered so that vertex 0's component is 0.
fn components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (u, v) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let mut label = BTreeMap::new();
    (0..n)
        .map(|v| {
            let r = find(&mut parent, v);
            let next = label.len();
            *label.entry(r).or_insert(next)
        })
        .collect()
}

/// Reduced incidence and Laplacian matrices for a choice of slack bus.
#[derive(Debug, Clone)]
pub struct NetworkMatrices {
    pub slack: usize,
    /// Bus index represented by each matrix column.
    pub keep: Vec<usize>,
    /// Column of each bus index (`None` for the slack).
    pub col_of: Vec<Option<usize>>,
    /// Reduced incidence, |L| x (|B|-1): +1 at `from`, -1 at `to`.
    pub m: Mat,
    /// Line susceptances (diagonal of D).
    pub d: Vec<f64>,
    /// Reduced weighted Laplacian `M^T D M`; SPD when the network is connected.
    pub g: Mat,
}

/// Builds the reduced incidence matrix, susceptance diagonal, and reduced
/// Laplacian for the given slack bus.
pub fn build_matrices(net: &Network, slack: usize) -> NetworkMatrices {
    let nb = net.n_buses();
    let nl = net.n_lines();
    let keep: Vec<usize> = (0..nb).filter(|&b| b != slack).collect();
    let mut col_of = vec![None; nb];
    for (c, &b) in keep.iter().enumerate() {
        col_of[b] = Some(c);
    }
    let mut m = Mat::zeros(nl, nb - 1);
    let mut d = Vec::with_capacity(nl);
    for (i, l) in net.lines.iter().enumerate() {
        if let Some(c) = col_of[l.from] {
            m.set(i, c, 1.0);
        }
        if let Some(c) = col_of[l.to] {
            m.set(i, c, -1.0);
        }
        d.push(l.beta);
    }
    let mut g = Mat::zeros(nb - 1, nb - 1);
    for (i, l) in net.lines.iter().enumerate() {
        let b = d[i];
        match (col_of[l.from], col_of[l.to]) {
            (Some(cu), Some(cv)) => {
                g.add_at(cu, cu, b);
                g.add_at(cv, cv, b);
                g.add_at(cu, cv, -b);
                g.add_at(cv, cu, -b);
            }
            (Some(cu), None) => g.add_at(cu, cu, b),
            (None, Some(cv)) => g.add_at(cv, cv, b),
            (None, None) => unreachable!("self-loop at slack"),
        }
    }
    NetworkMatrices { slack, keep, col_of, m, d, g }
}

/// A two-zone partition of the line set, with derived bus regions and
/// per-zone slack buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Line indices of zone 1 / zone 2 (sorted).
    pub zone1_lines: Vec<usize>,
    pub zone2_lines: Vec<usize>,
    /// Interior buses of each zone and the boundary (sorted bus indices).
    pub zone1_buses: Vec<usize>,
    pub zone2_buses: Vec<usize>,
    pub boundary: Vec<usize>,
    pub slack1: usize,
    pub slack2: usize,
}

impl Partition {
    /// 1 or 2 for a line index.
    pub fn zone_of_line(&self, line: usize) -> u8 {
        if self.zone1_lines.binary_search(&line).is_ok() {
            1
        } else {
            2
        }
    }

    /// Zone line list by zone number.
    pub fn lines_of(&self, zone: u8) -> &[usize] {
        if zone == 1 {
            &self.zone1_lines
        } else {
            &self.zone2_lines
        }
    }

    /// Interior buses by zone number.
    pub fn interior_of(&self, zone: u8) -> &[usize] {
        if zone == 1 {
            &self.zone1_buses
        } else {
            &self.zone2_buses
        }
    }

    pub fn slack_of(&self, zone: u8) -> usize {
        if zone == 1 {
            self.slack1
        } else {
            self.slack2
        }
    }

    /// True when the bus is in the boundary region.
    pub fn is_boundary(&self, bus: usize) -> bool {
        self.boundary.binary_search(&bus).is_ok()
    }

    /// Lines incident to the boundary region (tie lines).
    pub fn tie_lines(&self, net: &Network) -> Vec<usize> {
        (0..net.n_lines())
            .filter(|&l| {
                self.is_boundary(net.lines[l].from) || self.is_boundary(net.lines[l].to)
            })
            .collect()
    }
}

/// Derives the two-zone partition induced by a zone-1 line list, choosing the
/// lowest-id interior bus of each zone as its slack.
pub fn derive_partition(net: &Network, zone1_lines: &[usize]) -> Result<Partition, NetworkError> {
    derive_partition_with_slacks(net, zone1_lines, None, None)
}

/// As [`derive_partition`], but with explicit slack buses (given as bus
/// indices) for either zone.
pub fn derive_partition_with_slacks(
    net: &Network,
    zone1_lines: &[usize],
    slack1: Option<usize>,
    slack2: Option<usize>,
) -> Result<Partition, NetworkError> {
    let nl = net.n_lines();
    let mut in_zone1 = vec![false; nl];
    for &l in zone1_lines {
        if l >= nl {
            return Err(NetworkError::BadLineSet(format!(
                "line index {l} out of range (network has {nl} lines)"
            )));
        }
        if in_zone1[l] {
            return Err(NetworkError::BadLineSet(format!("line index {l} listed twice")));
        }
        in_zone1[l] = true;
    }
    let z1: Vec<usize> = (0..nl).filter(|&l| in_zone1[l]).collect();
    let z2: Vec<usize> = (0..nl).filter(|&l| !in_zone1[l]).collect();
    if z1.is_empty() {
        return Err(NetworkError::EmptyZone { zone: 1 });
    }
    if z2.is_empty() {
        return Err(NetworkError::EmptyZone { zone: 2 });
    }

    let nb = net.n_buses();
    let mut touches1 = vec![false; nb];
    let mut touches2 = vec![false; nb];
    for &l in &z1 {
        touches1[net.lines[l].from] = true;
        touches1[net.lines[l].to] = true;
    }
    for &l in &z2 {
        touches2[net.lines[l].from] = true;
        touches2[net.lines[l].to] = true;
    }
    let zone1_buses: Vec<usize> = (0..nb).filter(|&b| touches1[b] && !touches2[b]).collect();
    let zone2_buses: Vec<usize> = (0..nb).filter(|&b| touches2[b] && !touches1[b]).collect();
    let boundary: Vec<usize> = (0..nb).filter(|&b| touches1[b] && touches2[b]).collect();

    // Each zone's subnetwork (its lines plus the buses they touch) must be
    // connected for the per-zone systems to be solvable.
    for (zone, zl) in [(1u8, &z1), (2u8, &z2)] {
        let verts: Vec<usize> = (0..nb)
            .filter(|&b| if zone == 1 { touches1[b] } else { touches2[b] })
            .collect();
        let vmap: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let comp = components(
            verts.len(),
            zl.iter().map(|&l| (vmap[&net.lines[l].from], vmap[&net.lines[l].to])),
        );
        if comp.iter().any(|&c| c != 0) {
            return Err(NetworkError::ZoneDisconnected { zone });
        }
    }

    let pick_slack = |zone: u8, interior: &[usize], requested: Option<usize>| match requested {
        Some(b) => {
            if interior.contains(&b) {
                Ok(b)
            } else {
                Err(NetworkError::SlackNotInZone { bus: net.buses.get(b).map_or(b as u64, |x| x.id), zone })
            }
        }
        None => interior
            .iter()
            .min_by_key(|&&b| net.buses[b].id)
            .copied()
            .ok_or(NetworkError::NoSlackCandidate { zone }),
    };
    let slack1 = pick_slack(1, &zone1_buses, slack1)?;
    let slack2 = pick_slack(2, &zone2_buses, slack2)?;

    Ok(Partition {
        zone1_lines: z1,
        zone2_lines: z2,
        zone1_buses,
        zone2_buses,
        boundary,
        slack1,
        slack2,
    })
}

/// Which device a relocation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceRef {
    Gen(usize),
    /// The aggregate load at a bus index.
    Load(usize),
}

#[derive(Debug, Clone)]
pub struct RelocationRecord {
    pub device: DeviceRef,
    pub old_bus: u64,
    pub new_bus: u64,
    pub zone: u8,
}

/// Moves every generator and load off boundary buses onto fresh artificial
/// buses, connected back by a stiff, wide line, so boundary buses carry zero
/// net injection. `zone_for` designates the zone of each relocated device
/// (and therefore of its artificial bus and line).
///
/// Returns the modified network, the re-derived partition, and a record of
/// the moves.
pub fn relocate_boundary_injections(
    net: &Network,
    partition: &Partition,
    zone_for: impl Fn(DeviceRef) -> u8,
) -> Result<(Network, Partition, Vec<RelocationRecord>), NetworkError> {
    let mut out = net.clone();
    let mut z1 = partition.zone1_lines.clone();
    let mut records = Vec::new();

    let f_big = 10.0
        * out
            .gens
            .iter()
            .map(|g| g.pmax)
            .sum::<f64>()
            .max(out.buses.iter().map(|b| b.load.abs()).sum())
            .max(1.0);
    let beta_big = 1.0e4 * out.lines.iter().map(|l| l.beta).fold(1.0_f64, f64::max);
    let mut next_id = out.buses.iter().map(|b| b.id).max().unwrap_or(0) + 1;

    let mut moves: Vec<(DeviceRef, usize)> = Vec::new();
    for &b in &partition.boundary {
        if out.buses[b].load != 0.0 {
            moves.push((DeviceRef::Load(b), b));
        }
        for g in net.gens_at(b) {
            moves.push((DeviceRef::Gen(g), b));
        }
    }

    for (device, b) in moves {
        let zone = zone_for(device);
        if zone != 1 && zone != 2 {
            return Err(NetworkError::Invalid(format!(
                "relocation zone must be 1 or 2, got {zone}"
            )));
        }
        let new_ix = out.buses.len();
        let new_id = next_id;
        next_id += 1;
        let mut new_bus = Bus { id: new_id, load: 0.0 };
        match device {
            DeviceRef::Load(old) => {
                new_bus.load = out.buses[old].load;
                out.buses[old].load = 0.0;
            }
            DeviceRef::Gen(g) => {
                out.gens[g].bus = new_ix;
            }
        }
        out.buses.push(new_bus);
        out.id_to_index.insert(new_id, new_ix);
        let line_ix = out.lines.len();
        out.lines.push(Line { from: new_ix, to: b, beta: beta_big, limit: f_big });
        if zone == 1 {
            z1.push(line_ix);
        }
        records.push(RelocationRecord {
            device,
            old_bus: out.buses[b].id,
            new_bus: new_id,
            zone,
        });
    }

    let new_partition = derive_partition_with_slacks(
        &out,
        &z1,
        Some(partition.slack1),
        Some(partition.slack2),
    )?;
    Ok((out, new_partition, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig1_network_builds_with_expected_shape() {
        let net = fixtures::fig1_network();
        assert_eq!(net.n_buses(), 8);
        assert_eq!(net.n_lines(), 10);
        assert_eq!(net.lines[0].beta, 1.0);
        assert_eq!(net.horizon, 1);
        // bus 2 carries 20 MW of load in period 0
        let b2 = net.bus_index(2).unwrap();
        assert_eq!(net.load(b2, 0), 20.0);
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let mut case = fixtures::fig1_case();
        // remove all lines touching bus 8 except none -> cut 8 off
        case.lines.retain(|l| l.from != 8 && l.to != 8);
        match Network::from_case(&case) {
            Err(NetworkError::NotConnected { components, sample, .. }) => {
                assert_eq!(components, 2);
                assert_eq!(sample, 8);
            }
            other => panic!("expected NotConnected, got {other:?}"),
        }
    }

    #[test]
    fn fig1_partition_matches_published_regions() {
        let net = fixtures::fig1_network();
        let p = fixtures::fig1_partition(&net);
        let ids = |v: &[usize]| v.iter().map(|&b| net.bus_id(b)).collect::<Vec<_>>();
        assert_eq!(ids(&p.zone1_buses), vec![1, 2, 3]);
        assert_eq!(ids(&p.boundary), vec![4, 5]);
        assert_eq!(ids(&p.zone2_buses), vec![6, 7, 8]);
        assert_eq!(net.bus_id(p.slack1), 1);
        assert_eq!(net.bus_id(p.slack2), 8);
        assert_eq!(p.zone2_lines, vec![5, 6, 7, 8, 9]);
        // tie lines are exactly those touching buses 4 or 5
        let ties = p.tie_lines(&net);
        assert_eq!(ties, vec![2, 3, 4, 5, 6]);
        // the default slack rule picks the lowest interior id per zone
        let defaulted = derive_partition(&net, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(net.bus_id(defaulted.slack1), 1);
        assert_eq!(net.bus_id(defaulted.slack2), 6);
    }

    #[test]
    fn partition_with_no_interior_bus_errors() {
        let net = fixtures::fig1_network();
        // zone 1 = {(1,2)}: buses 1 and 2 still touch zone-2 lines, so zone 1
        // has no interior bus to serve as slack.
        match derive_partition(&net, &[0]) {
            Err(NetworkError::NoSlackCandidate { zone: 1 }) => {}
            other => panic!("expected NoSlackCandidate, got {other:?}"),
        }
    }

    #[test]
    fn partition_rejects_disconnected_zone() {
        let net = fixtures::fig1_network();
        // zone 1 = {(1,2), (6,8)}: two separate patches.
        match derive_partition(&net, &[0, 8]) {
            Err(NetworkError::ZoneDisconnected { zone: 1 }) => {}
            other => panic!("expected ZoneDisconnected, got {other:?}"),
        }
    }

    #[test]
    fn explicit_slack_outside_zone_errors() {
        let net = fixtures::fig1_network();
        let b8 = net.bus_index(8).unwrap();
        match derive_partition_with_slacks(&net, &[0, 1, 2, 3, 4], Some(b8), None) {
            Err(NetworkError::SlackNotInZone { zone: 1, bus: 8 }) => {}
            other => panic!("expected SlackNotInZone, got {other:?}"),
        }
    }

    #[test]
    fn build_matrices_two_bus_by_hand() {
        let case = fixtures::two_bus_case(10.0, 0.5, 100.0);
        let net = Network::from_case(&case).unwrap();
        let m = build_matrices(&net, 0);
        assert_eq!(m.g.rows(), 1);
        // beta = 1/x = 2; G = [2]
        assert_eq!(m.g.at(0, 0), 2.0);
        assert_eq!(m.m.at(0, 0), -1.0); // line 0->1, bus 1 kept
        assert_eq!(m.keep, vec![1]);
    }

    #[test]
    fn relocation_clears_boundary_injections_and_extends_partition() {
        let mut case = fixtures::fig1_case();
        // put a generator and a load on boundary bus 4
        case.buses.iter_mut().find(|b| b.id == 4).unwrap().load = 15.0;
        case.generators.push(crate::casefile::GenRecord {
            bus: 4,
            pmin: 0.0,
            pmax: 40.0,
            c2: 0.01,
            c1: 15.0,
            c0: 0.0,
            ramp: None,
            min_up: None,
            min_down: None,
            startup: None,
        });
        let net = Network::from_case(&case).unwrap();
        let p = derive_partition(&net, &[0, 1, 2, 3, 4]).unwrap();
        let (net2, p2, recs) =
            relocate_boundary_injections(&net, &p, |_| 1).unwrap();
        assert_eq!(recs.len(), 2);
        // boundary buses now carry zero load and no generators
        for &b in &p2.boundary {
            assert_eq!(net2.buses[b].load, 0.0);
            assert!(net2.gens_at(b).is_empty());
        }
        // boundary region itself is unchanged
        assert_eq!(p2.boundary, p.boundary);
        // two new buses and lines, assigned to zone 1
        assert_eq!(net2.n_buses(), net.n_buses() + 2);
        assert_eq!(net2.n_lines(), net.n_lines() + 2);
        assert_eq!(p2.zone1_lines.len(), p.zone1_lines.len() + 2);
        let big = &net2.lines[net.n_lines()];
        assert_eq!(big.beta, 1.0e4);
        assert!(big.limit >= 10.0 * 120.0);
        // total load is conserved
        let tot_before: f64 = net.buses.iter().map(|b| b.load).sum();
        let tot_after: f64 = net2.buses.iter().map(|b| b.load).sum();
        assert!((tot_before - tot_after).abs() < 1e-12);
    }
}
