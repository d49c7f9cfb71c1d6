//! Boundary aggregation factors γ and their certification.
//!
//! γᵏ maps a unit injection at an internal bus of zone k to an equivalent
//! injection profile on the boundary buses, as seen by the lines of the other
//! zone. Each column is obtained by eliminating the zone-k interior block of
//! the network Laplacian: solve Gᵏᵏ y = e_c once per column against a shared
//! factorization of Gᵏᵏ, then γᵏ_{·,c} = −G^{∩k} y.
//!
//! Columns cover every internal bus of zone k including its slack: the other
//! zone's shift-factor rows have a nonzero column at the foreign slack, so
//! dropping it would lose real flow contributions.
//!
//! `certify` replays the aggregation identity against a shift-factor matrix:
//! δ_{lc} = Σ_{b∈B∩} δ_{lb} γᵏ_{bc} for every line l of the opposite zone,
//! and checks that every column sums to one.

use crate::isf::{zone_connected_without, IsfMatrix};
use crate::linsolve::{LinsolveError, Mat, SpdFactor};
use crate::network::{Network, Partition};
use thiserror::Error;

/// Theorem tolerance for reconstruction residuals and column sums.
pub const CERT_TOL: f64 = 1e-9;
/// Entries below −1e−6 are reported as findings (not failures).
pub const NEGATIVITY_REPORT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GammaError {
    #[error(transparent)]
    Linsolve(#[from] LinsolveError),
    #[error("outage of line {line} islands zone {zone}")]
    OutageIslands { line: usize, zone: u8 },
    #[error("line {line} is a tie line; boundary-changing outages are not supported")]
    TieLineOutage { line: usize },
    #[error("line index {line} out of range")]
    BadLine { line: usize },
}

/// Boundary aggregation factors for one topology.
///
/// Row order follows `partition.boundary`; column order follows the zone's
/// internal bus list (`partition.zone1_buses` / `partition.zone2_buses`).
#[derive(Debug, Clone)]
pub struct GammaFactors {
    /// |B∩| × |B₁|: aggregates zone-1 injections for zone-2 lines.
    pub gamma1: Mat,
    /// |B∩| × |B₂|: aggregates zone-2 injections for zone-1 lines.
    pub gamma2: Mat,
    /// Bus indices addressed by the columns of γ¹ / γ².
    pub cols1: Vec<usize>,
    pub cols2: Vec<usize>,
    /// Bus indices addressed by the rows.
    pub boundary: Vec<usize>,
    /// The removed line when this is a contingency variant.
    pub outage: Option<usize>,
}

impl GammaFactors {
    pub fn of_zone(&self, zone: u8) -> &Mat {
        if zone == 1 {
            &self.gamma1
        } else {
            &self.gamma2
        }
    }

    pub fn cols_of(&self, zone: u8) -> &[usize] {
        if zone == 1 {
            &self.cols1
        } else {
            &self.cols2
        }
    }

    /// Aggregates a zone's internal injections into boundary equivalents:
    /// w_b = Σ_c γᵏ_{bc} n_c over the zone's internal buses.
    pub fn aggregate(&self, zone: u8, injections: &[f64]) -> Vec<f64> {
        let g = self.of_zone(zone);
        let cols = self.cols_of(zone);
        let mut w = vec![0.0; self.boundary.len()];
        for (j, &c) in cols.iter().enumerate() {
            let n = injections[c];
            if n != 0.0 {
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += g.at(i, j) * n;
                }
            }
        }
        w
    }
}

/// γᵏ for one zone and one topology: assemble the zone's Laplacian blocks
/// from its own lines, factor Gᵏᵏ once, and back out one column per internal
/// bus.
fn zone_gamma(
    net: &Network,
    part: &Partition,
    zone: u8,
    skip_line: Option<usize>,
) -> Result<Mat, GammaError> {
    let interior = part.interior_of(zone);
    let boundary = &part.boundary;
    let mut ipos = vec![usize::MAX; net.n_buses()];
    for (i, &b) in interior.iter().enumerate() {
        ipos[b] = i;
    }
    let mut bpos = vec![usize::MAX; net.n_buses()];
    for (i, &b) in boundary.iter().enumerate() {
        bpos[b] = i;
    }
    let ni = interior.len();
    let mut gkk = Mat::zeros(ni, ni);
    let mut gbk = Mat::zeros(boundary.len(), ni);
    for &l in part.lines_of(zone) {
        if Some(l) == skip_line {
            continue;
        }
        let line = &net.lines[l];
        for (u, v) in [(line.from, line.to), (line.to, line.from)] {
            if ipos[u] != usize::MAX {
                gkk.add_at(ipos[u], ipos[u], line.beta);
                if ipos[v] != usize::MAX {
                    gkk.add_at(ipos[u], ipos[v], -line.beta);
                } else if bpos[v] != usize::MAX {
                    gbk.add_at(bpos[v], ipos[u], -line.beta);
                }
            }
        }
    }
    let factor = SpdFactor::new(&gkk).map_err(|e| match e {
        LinsolveError::NotSpd { .. } | LinsolveError::Singular { .. } => {
            GammaError::OutageIslands { line: skip_line.unwrap_or(usize::MAX), zone }
        }
        other => GammaError::Linsolve(other),
    })?;
    let mut gamma = Mat::zeros(boundary.len(), ni);
    for c in 0..ni {
        let mut e = vec![0.0; ni];
        e[c] = 1.0;
        let y = factor.solve(&e)?;
        let col = gbk.matvec(&y);
        for (b, v) in col.into_iter().enumerate() {
            gamma.set(b, c, -v);
        }
    }
    Ok(gamma)
}

/// Aggregation factors of the base topology.
pub fn compute_gamma(net: &Network, part: &Partition) -> Result<GammaFactors, GammaError> {
    Ok(GammaFactors {
        gamma1: zone_gamma(net, part, 1, None)?,
        gamma2: zone_gamma(net, part, 2, None)?,
        cols1: part.zone1_buses.clone(),
        cols2: part.zone2_buses.clone(),
        boundary: part.boundary.clone(),
        outage: None,
    })
}

/// Aggregation factors with one internal line removed. Only the zone that
/// owns the line changes; the other zone's factors are carried over
/// unchanged.
pub fn compute_gamma_contingency(
    net: &Network,
    part: &Partition,
    base: &GammaFactors,
    outage: usize,
) -> Result<GammaFactors, GammaError> {
    if outage >= net.n_lines() {
        return Err(GammaError::BadLine { line: outage });
    }
    if part.tie_lines(net).contains(&outage) {
        return Err(GammaError::TieLineOutage { line: outage });
    }
    let zone = part.zone_of_line(outage);
    if !zone_connected_without(net, part, zone, outage) {
        return Err(GammaError::OutageIslands { line: outage, zone });
    }
    let mut out = base.clone();
    out.outage = Some(outage);
    if zone == 1 {
        out.gamma1 = zone_gamma(net, part, 1, Some(outage))?;
    } else {
        out.gamma2 = zone_gamma(net, part, 2, Some(outage))?;
    }
    Ok(out)
}

/// Location of a certification failure.
#[derive(Debug, Clone, PartialEq)]
pub enum CertViolation {
    /// δ_{lc} ≠ Σ_b δ_{lb} γᵏ_{bc}
    Reconstruction { zone: u8, line: usize, col_bus: usize, residual: f64 },
    /// Σ_b γᵏ_{bc} ≠ 1
    ColumnSum { zone: u8, col_bus: usize, deviation: f64 },
}

/// Result of replaying the aggregation identities against shift factors.
#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub max_residual: f64,
    pub max_colsum_deviation: f64,
    pub min_entry: f64,
    pub max_entry: f64,
    pub pass: bool,
    pub violations: Vec<CertViolation>,
    /// Entries below −1e−6, reported but not failed: (zone, boundary bus,
    /// column bus, value).
    pub negative_entries: Vec<(u8, usize, usize, f64)>,
}

/// Checks γ against a shift-factor matrix of the same topology: every
/// opposite-zone row must be reconstructible through the boundary, and every
/// column must sum to one.
pub fn certify(
    gamma: &GammaFactors,
    isf: &IsfMatrix,
    net: &Network,
    part: &Partition,
) -> CertifyReport {
    let mut report = CertifyReport {
        max_residual: 0.0,
        max_colsum_deviation: 0.0,
        min_entry: f64::INFINITY,
        max_entry: f64::NEG_INFINITY,
        pass: true,
        violations: Vec::new(),
        negative_entries: Vec::new(),
    };
    for zone in [1u8, 2u8] {
        let g = gamma.of_zone(zone);
        let cols = gamma.cols_of(zone);
        let other_lines = part.lines_of(3 - zone);
        for (j, &c) in cols.iter().enumerate() {
            let mut colsum = 0.0;
            for (i, &b) in gamma.boundary.iter().enumerate() {
                let v = g.at(i, j);
                colsum += v;
                report.min_entry = report.min_entry.min(v);
                report.max_entry = report.max_entry.max(v);
                if v < -NEGATIVITY_REPORT_TOL {
                    report.negative_entries.push((zone, b, c, v));
                }
            }
            let dev = (colsum - 1.0).abs();
            report.max_colsum_deviation = report.max_colsum_deviation.max(dev);
            if dev > CERT_TOL {
                report.pass = false;
                report.violations.push(CertViolation::ColumnSum {
                    zone,
                    col_bus: c,
                    deviation: dev,
                });
            }
            for &l in other_lines {
                if Some(l) == gamma.outage || Some(l) == isf.outage {
                    continue;
                }
                let mut through = 0.0;
                for (i, &b) in gamma.boundary.iter().enumerate() {
                    through += isf.entry(l, b) * g.at(i, j);
                }
                let residual = (isf.entry(l, c) - through).abs();
                report.max_residual = report.max_residual.max(residual);
                if residual > CERT_TOL {
                    report.pass = false;
                    report.violations.push(CertViolation::Reconstruction {
                        zone,
                        line: l,
                        col_bus: c,
                        residual,
                    });
                }
            }
        }
    }
    let _ = net;
    report
}
