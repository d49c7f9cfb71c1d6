//! Bundled example systems and deterministic synthetic-case builders.
//!
//! The eight-bus system mirrors the two-zone illustration used throughout the
//! documentation; the larger systems are meshed two-area networks sized for
//! desk experiments. Random networks are generated from an internal seeded
//! generator so test suites are reproducible across platforms.

use crate::casefile::{BusRecord, GenRecord, LineRecord, RawCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gen(bus: u64, pmin: f64, pmax: f64, c2: f64, c1: f64, c0: f64) -> GenRecord {
    GenRecord {
        bus,
        pmin,
        pmax,
        c2,
        c1,
        c0,
        ramp: None,
        min_up: None,
        min_down: None,
        startup: None,
    }
}

fn line(from: u64, to: u64, x: f64, rating: f64) -> LineRecord {
    LineRecord { from, to, x, rating, status: 1 }
}

/// Eight-bus, ten-line, two-zone system. Zone 1 is lines 0..=4, the boundary
/// is buses 4 and 5, and the per-zone slacks are buses 1 and 8. All lines
/// have unit susceptance.
pub fn fig1_case() -> RawCase {
    RawCase {
        name: "eight_bus".into(),
        base_mva: 100.0,
        horizon: 1,
        load_profile: vec![1.0],
        buses: vec![
            BusRecord { id: 1, load: 0.0 },
            BusRecord { id: 2, load: 20.0 },
            BusRecord { id: 3, load: 30.0 },
            BusRecord { id: 4, load: 0.0 },
            BusRecord { id: 5, load: 0.0 },
            BusRecord { id: 6, load: 25.0 },
            BusRecord { id: 7, load: 25.0 },
            BusRecord { id: 8, load: 0.0 },
        ],
        lines: vec![
            line(1, 2, 1.0, 100.0),
            line(1, 3, 1.0, 100.0),
            line(1, 4, 1.0, 100.0),
            line(2, 4, 1.0, 100.0),
            line(3, 5, 1.0, 100.0),
            line(4, 6, 1.0, 100.0),
            line(5, 7, 1.0, 100.0),
            line(6, 7, 1.0, 100.0),
            line(6, 8, 1.0, 100.0),
            line(7, 8, 1.0, 100.0),
        ],
        generators: vec![
            gen(1, 0.0, 60.0, 2.0, 10.0, 0.0),
            gen(8, 0.0, 60.0, 2.0, 100.0, 0.0),
        ],
    }
}

/// Zone-1 line indices for [`fig1_case`].
pub fn fig1_zone1_lines() -> Vec<usize> {
    vec![0, 1, 2, 3, 4]
}

/// Network form of [`fig1_case`].
pub fn fig1_network() -> crate::network::Network {
    crate::network::Network::from_case(&fig1_case()).expect("fig1 case is valid")
}

/// The published partition of the eight-bus system: zone 1 = lines 0..=4,
/// slacks at buses 1 and 8.
pub fn fig1_partition(net: &crate::network::Network) -> crate::network::Partition {
    crate::network::derive_partition_with_slacks(
        net,
        &fig1_zone1_lines(),
        net.bus_index(1),
        net.bus_index(8),
    )
    .expect("fig1 partition is valid")
}

/// Two buses joined by one line; generator at bus 1, load at bus 2.
pub fn two_bus_case(load: f64, x: f64, rating: f64) -> RawCase {
    RawCase {
        name: "two_bus".into(),
        base_mva: 100.0,
        horizon: 1,
        load_profile: vec![1.0],
        buses: vec![BusRecord { id: 1, load: 0.0 }, BusRecord { id: 2, load }],
        lines: vec![line(1, 2, x, rating)],
        generators: vec![gen(1, 0.0, load.max(1.0) * 2.0, 0.0, 10.0, 0.0)],
    }
}

/// Radial path 1-2-...-n with unit reactances, load at the far end.
pub fn path_case(n: usize, load: f64) -> RawCase {
    RawCase {
        name: format!("path_{n}"),
        base_mva: 100.0,
        horizon: 1,
        load_profile: vec![1.0],
        buses: (1..=n as u64)
            .map(|id| BusRecord { id, load: if id == n as u64 { load } else { 0.0 } })
            .collect(),
        lines: (1..n as u64).map(|i| line(i, i + 1, 1.0, 10.0 * load.max(1.0))).collect(),
        generators: vec![gen(1, 0.0, load.max(1.0) * 2.0, 0.0, 10.0, 0.0)],
    }
}

/// The standard 24-period demand shape used by the bundled commitment cases:
/// overnight trough, morning ramp, evening peak.
pub fn daily_profile() -> Vec<f64> {
    vec![
        0.62, 0.58, 0.56, 0.55, 0.57, 0.63, 0.72, 0.82, 0.89, 0.93, 0.95, 0.96, 0.95, 0.94,
        0.93, 0.94, 0.97, 1.00, 0.99, 0.95, 0.89, 0.81, 0.72, 0.65,
    ]
}

/// Eight-bus commitment case over 24 periods: the [`fig1_case`] grid with a
/// richer generation fleet and the daily load shape.
pub fn fig1_uc_case() -> RawCase {
    let mut case = fig1_case();
    case.name = "eight_bus_uc".into();
    case.horizon = 24;
    case.load_profile = daily_profile();
    case.buses.iter_mut().for_each(|b| {
        b.load = match b.id {
            2 => 24.0,
            3 => 30.0,
            6 => 28.0,
            7 => 26.0,
            _ => 0.0,
        }
    });
    case.generators = vec![
        // big base unit, cheap, slow
        GenRecord {
            bus: 1,
            pmin: 20.0,
            pmax: 70.0,
            c2: 0.8,
            c1: 10.0,
            c0: 20.0,
            ramp: Some(20.0),
            min_up: Some(6),
            min_down: Some(4),
            startup: Some(300.0),
        },
        // mid-merit unit in zone 2
        GenRecord {
            bus: 8,
            pmin: 10.0,
            pmax: 50.0,
            c2: 1.0,
            c1: 30.0,
            c0: 12.0,
            ramp: Some(25.0),
            min_up: Some(3),
            min_down: Some(3),
            startup: Some(150.0),
        },
        // fast peaker in zone 1
        GenRecord {
            bus: 3,
            pmin: 4.0,
            pmax: 30.0,
            c2: 1.2,
            c1: 75.0,
            c0: 6.0,
            ramp: Some(30.0),
            min_up: Some(2),
            min_down: Some(2),
            startup: Some(60.0),
        },
        // fast peaker in zone 2
        GenRecord {
            bus: 6,
            pmin: 4.0,
            pmax: 30.0,
            c2: 1.2,
            c1: 80.0,
            c0: 6.0,
            ramp: Some(30.0),
            min_up: Some(2),
            min_down: Some(2),
            startup: Some(60.0),
        },
    ];
    case
}

/// Builds a meshed two-area system: each area is a ring of `n_ring` buses
/// with chords, and the areas meet at `n_border` shared border buses. Returns
/// the case together with the zone-1 line index list.
fn two_area_case(
    name: &str,
    n_ring: usize,
    n_border: usize,
    load_per_bus: f64,
    rating: f64,
) -> (RawCase, Vec<usize>) {
    assert!(n_ring >= 4 && n_border >= 1);
    let area1: Vec<u64> = (1..=n_ring as u64).collect();
    let border: Vec<u64> = (n_ring as u64 + 1..=(n_ring + n_border) as u64).collect();
    let area2: Vec<u64> =
        ((n_ring + n_border) as u64 + 1..=(2 * n_ring + n_border) as u64).collect();

    let mut lines_list: Vec<LineRecord> = Vec::new();
    let mut zone1 = Vec::new();
    let add = |from: u64, to: u64, x: f64, z1: bool, zone1: &mut Vec<usize>, lines_list: &mut Vec<LineRecord>| {
        if z1 {
            zone1.push(lines_list.len());
        }
        lines_list.push(line(from, to, x, rating));
    };

    for (area_ix, area) in [&area1, &area2].into_iter().enumerate() {
        let z1 = area_ix == 0;
        // ring
        for i in 0..n_ring {
            add(area[i], area[(i + 1) % n_ring], 1.0, z1, &mut zone1, &mut lines_list);
        }
        // chords across the ring
        for i in (0..n_ring / 2).step_by(2) {
            add(area[i], area[i + n_ring / 2], 1.2, z1, &mut zone1, &mut lines_list);
        }
        // border attachments: each border bus hooks to two ring buses
        for (k, &bb) in border.iter().enumerate() {
            let a = area[(2 * k) % n_ring];
            let b = area[(2 * k + n_ring / 2) % n_ring];
            add(a, bb, 0.8, z1, &mut zone1, &mut lines_list);
            add(b, bb, 0.8, z1, &mut zone1, &mut lines_list);
        }
    }

    let mut buses: Vec<BusRecord> = Vec::new();
    for &id in area1.iter().chain(&border).chain(&area2) {
        buses.push(BusRecord { id, load: 0.0 });
    }
    buses.sort_by_key(|b| b.id);
    // loads on even interior buses
    for b in buses.iter_mut() {
        let in_border = border.contains(&b.id);
        if !in_border && b.id % 2 == 0 {
            b.load = load_per_bus;
        }
    }

    let total_load: f64 = buses.iter().map(|b| b.load).sum();
    let generators = vec![
        GenRecord {
            bus: area1[0],
            pmin: 0.12 * total_load,
            pmax: 0.55 * total_load,
            c2: 0.7,
            c1: 9.0,
            c0: 18.0,
            ramp: Some(0.2 * total_load),
            min_up: Some(6),
            min_down: Some(4),
            startup: Some(400.0),
        },
        GenRecord {
            bus: area1[n_ring / 2],
            pmin: 0.04 * total_load,
            pmax: 0.3 * total_load,
            c2: 1.0,
            c1: 85.0,
            c0: 8.0,
            ramp: Some(0.3 * total_load),
            min_up: Some(2),
            min_down: Some(2),
            startup: Some(90.0),
        },
        GenRecord {
            bus: area2[0],
            pmin: 0.1 * total_load,
            pmax: 0.5 * total_load,
            c2: 0.8,
            c1: 11.0,
            c0: 15.0,
            ramp: Some(0.2 * total_load),
            min_up: Some(5),
            min_down: Some(4),
            startup: Some(350.0),
        },
        GenRecord {
            bus: area2[n_ring / 2],
            pmin: 0.04 * total_load,
            pmax: 0.32 * total_load,
            c2: 1.1,
            c1: 88.0,
            c0: 8.0,
            ramp: Some(0.3 * total_load),
            min_up: Some(2),
            min_down: Some(2),
            startup: Some(90.0),
        },
    ];

    let case = RawCase {
        name: name.into(),
        base_mva: 100.0,
        horizon: 24,
        load_profile: daily_profile(),
        buses,
        lines: lines_list,
        generators,
    };
    (case, zone1)
}

/// 20-bus two-area commitment case (two 9-bus rings, 2 border buses).
pub fn twozone20_case() -> (RawCase, Vec<usize>) {
    two_area_case("twozone20", 9, 2, 16.0, 60.0)
}

/// 30-bus two-area commitment case (two 14-bus rings, 2 border buses).
pub fn twozone30_case() -> (RawCase, Vec<usize>) {
    two_area_case("twozone30", 14, 2, 13.0, 70.0)
}

/// Random connected two-zone network for oracle suites: two random connected
/// areas joined through `n_border` boundary buses. Returns the case and the
/// zone-1 line index list. Loads and generation are placed only on interior
/// buses so the partition needs no relocation.
pub fn random_two_zone_case(
    seed: u64,
    n1: usize,
    n2: usize,
    n_border: usize,
) -> (RawCase, Vec<usize>) {
    assert!(n1 >= 2 && n2 >= 2 && n_border >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = n1 + n2 + n_border;
    // bus ids: 1..=n1 interior zone 1, then border, then zone 2
    let z1_buses: Vec<u64> = (1..=n1 as u64).collect();
    let border: Vec<u64> = (n1 as u64 + 1..=(n1 + n_border) as u64).collect();
    let z2_buses: Vec<u64> = ((n1 + n_border) as u64 + 1..=nb as u64).collect();

    let mut lines_list: Vec<LineRecord> = Vec::new();
    let mut zone1 = Vec::new();

    let grow_zone = |interior: &[u64], z1: bool, rng: &mut ChaCha8Rng, zone1: &mut Vec<usize>, lines_list: &mut Vec<LineRecord>| {
        // random spanning tree over interior + border, then extra chords
        let mut verts: Vec<u64> = interior.to_vec();
        verts.extend_from_slice(&border);
        let mut connected = vec![verts[0]];
        for &v in &verts[1..] {
            let &anchor = &connected[rng.gen_range(0..connected.len())];
            let x = rng.gen_range(0.5..2.0);
            if z1 {
                zone1.push(lines_list.len());
            }
            lines_list.push(line(anchor.min(v), anchor.max(v), x, 0.0));
            connected.push(v);
        }
        let extra = verts.len() / 3 + 1;
        for _ in 0..extra {
            let a = verts[rng.gen_range(0..verts.len())];
            let b = verts[rng.gen_range(0..verts.len())];
            if a == b {
                continue;
            }
            let x = rng.gen_range(0.5..2.0);
            if z1 {
                zone1.push(lines_list.len());
            }
            lines_list.push(line(a.min(b), a.max(b), x, 0.0));
        }
    };
    grow_zone(&z1_buses, true, &mut rng, &mut zone1, &mut lines_list);
    grow_zone(&z2_buses, false, &mut rng, &mut zone1, &mut lines_list);

    let mut buses: Vec<BusRecord> = (1..=nb as u64).map(|id| BusRecord { id, load: 0.0 }).collect();
    for b in buses.iter_mut() {
        let interior = !border.contains(&b.id);
        if interior && rng.gen_bool(0.6) {
            b.load = rng.gen_range(5.0..30.0);
        }
    }
    let total_load: f64 = buses.iter().map(|b| b.load).sum();
    let mut generators = Vec::new();
    for (k, area) in [&z1_buses, &z2_buses].into_iter().enumerate() {
        for _ in 0..2 {
            let bus = area[rng.gen_range(0..area.len())];
            generators.push(gen(
                bus,
                0.0,
                total_load.max(10.0) * rng.gen_range(0.4..0.8),
                rng.gen_range(0.005..0.03),
                rng.gen_range(8.0..20.0) + 2.0 * k as f64,
                0.0,
            ));
        }
    }

    let case = RawCase {
        name: format!("rand2z_{seed}"),
        base_mva: 100.0,
        horizon: 1,
        load_profile: vec![1.0],
        buses,
        lines: lines_list,
        generators,
    };
    (case, zone1)
}
