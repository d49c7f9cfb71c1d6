//! Case ingestion: the native JSON case format and a MATPOWER subset importer.
//!
//! A [`RawCase`] is the on-disk description of a study system: buses with
//! loads, branches, generators, and a load-scaling profile over the horizon.
//! Susceptance is derived later (β = 1/x) when a network is built; the raw
//! case keeps reactance as given so files round-trip unchanged.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid case: {0}")]
    Validation(String),
}

fn default_base_mva() -> f64 {
    100.0
}

fn default_horizon() -> usize {
    1
}

fn default_status() -> u8 {
    1
}

/// Bus record: external id and base load in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u64,
    #[serde(default)]
    pub load: f64,
}

/// Branch record. `rating` of zero means unlimited; `status` zero means out
/// of service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: u64,
    pub to: u64,
    pub x: f64,
    #[serde(default)]
    pub rating: f64,
    #[serde(default = "default_status")]
    pub status: u8,
}

/// Generator record. Commitment-related fields are optional in raw input and
/// filled by [`RawCase::apply_defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenRecord {
    pub bus: u64,
    pub pmin: f64,
    pub pmax: f64,
    /// Quadratic cost coefficient ($/MW²h).
    #[serde(default)]
    pub c2: f64,
    /// Linear cost coefficient ($/MWh).
    #[serde(default)]
    pub c1: f64,
    /// Fixed hourly cost while committed ($/h).
    #[serde(default)]
    pub c0: f64,
    /// Ramp limit per period, MW. Defaults to pmax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_up: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_down: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub startup: Option<f64>,
}

/// A complete study case as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCase {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    /// Number of periods in the study horizon.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Per-period multiplier applied to every bus load. Length must equal
    /// `horizon`; defaults to all ones.
    #[serde(default)]
    pub load_profile: Vec<f64>,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub generators: Vec<GenRecord>,
}

impl RawCase {
    /// Fills unset generator fields with the documented defaults and returns
    /// a human-readable record of what was applied, so runs that relied on
    /// defaulting are reproducible from their logs.
    pub fn apply_defaults(&mut self) -> Vec<String> {
        let mut applied = Vec::new();
        if self.load_profile.is_empty() {
            self.load_profile = vec![1.0; self.horizon];
            applied.push(format!("load_profile = [1.0; {}]", self.horizon));
        }
        for (i, g) in self.generators.iter_mut().enumerate() {
            if g.ramp.is_none() {
                g.ramp = Some(g.pmax);
                applied.push(format!("generator {i} (bus {}): ramp = pmax = {}", g.bus, g.pmax));
            }
            if g.min_up.is_none() {
                g.min_up = Some(1);
                applied.push(format!("generator {i} (bus {}): min_up = 1", g.bus));
            }
            if g.min_down.is_none() {
                g.min_down = Some(1);
                applied.push(format!("generator {i} (bus {}): min_down = 1", g.bus));
            }
            if g.startup.is_none() {
                g.startup = Some(0.0);
                applied.push(format!("generator {i} (bus {}): startup = 0", g.bus));
            }
        }
        applied
    }

    /// Structural validation shared by both importers.
    pub fn validate(&self) -> Result<(), CaseError> {
        let err = |m: String| Err(CaseError::Validation(m));
        if self.buses.is_empty() {
            return err("case has no buses".into());
        }
        if self.horizon == 0 {
            return err("horizon must be at least 1".into());
        }
        if !self.load_profile.is_empty() && self.load_profile.len() != self.horizon {
            return err(format!(
                "load_profile has {} entries but horizon is {}",
                self.load_profile.len(),
                self.horizon
            ));
        }
        if self.load_profile.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return err("load_profile entries must be finite and nonnegative".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return err(format!("duplicate bus id {}", b.id));
            }
            if !b.load.is_finite() {
                return err(format!("bus {}: load is not finite", b.id));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            if !seen.contains(&l.from) || !seen.contains(&l.to) {
                return err(format!(
                    "line {i} ({} -> {}) references an unknown bus",
                    l.from, l.to
                ));
            }
            if l.from == l.to {
                return err(format!("line {i}: self-loop at bus {}", l.from));
            }
            if !(l.x.is_finite() && l.x > 0.0) {
                return err(format!("line {i} ({} -> {}): reactance must be positive, got {}", l.from, l.to, l.x));
            }
            if !(l.rating.is_finite() && l.rating >= 0.0) {
                return err(format!("line {i}: rating must be nonnegative, got {}", l.rating));
            }
            if l.status > 1 {
                return err(format!("line {i}: status must be 0 or 1, got {}", l.status));
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            if !seen.contains(&g.bus) {
                return err(format!("generator {i} references unknown bus {}", g.bus));
            }
            if g.pmin > g.pmax {
                return err(format!(
                    "generator {i} (bus {}): pmin {} exceeds pmax {}",
                    g.bus, g.pmin, g.pmax
                ));
            }
            if g.c2 < 0.0 {
                return err(format!("generator {i}: quadratic cost must be nonnegative, got {}", g.c2));
            }
            for (nm, v) in [("pmin", g.pmin), ("pmax", g.pmax), ("c2", g.c2), ("c1", g.c1), ("c0", g.c0)] {
                if !v.is_finite() {
                    return err(format!("generator {i}: {nm} is not finite"));
                }
            }
            if let Some(r) = g.ramp {
                if !(r.is_finite() && r > 0.0) {
                    return err(format!("generator {i}: ramp must be positive, got {r}"));
                }
            }
            if let Some(s) = g.startup {
                if !(s.is_finite() && s >= 0.0) {
                    return err(format!("generator {i}: startup cost must be nonnegative, got {s}"));
                }
            }
            if g.min_up == Some(0) || g.min_down == Some(0) {
                return err(format!("generator {i}: min_up/min_down must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Loads a native-format JSON case and validates it.
pub fn load_case(path: impl AsRef<Path>) -> Result<RawCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let case: RawCase =
        serde_json::from_str(&text).map_err(|e| CaseError::Schema(e.to_string()))?;
    case.validate()?;
    Ok(case)
}

/// Writes a case in the native JSON format. `load_case(save_case(c)) == c`.
pub fn save_case(case: &RawCase, path: impl AsRef<Path>) -> Result<(), CaseError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(case).expect("case serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Imports the MATPOWER subset: `mpc.baseMVA`, `mpc.bus`, `mpc.branch`,
/// `mpc.gen`, and `mpc.gencost` (polynomial model only). Out-of-service
/// branches and generators are dropped at import.
pub fn import_matpower(path: impl AsRef<Path>) -> Result<RawCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parsed = parse_matpower_text(&text)?;
    parsed.validate()?;
    Ok(parsed)
}

struct NumBlock {
    rows: Vec<(usize, Vec<f64>)>, // (source line number, values)
}

fn parse_matpower_text(text: &str) -> Result<RawCase, CaseError> {
    let mut base_mva = 100.0;
    let mut blocks: Vec<(String, NumBlock)> = Vec::new();
    let mut current: Option<(String, NumBlock)> = None;

    for (ln0, raw_line) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = match raw_line.find('%') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some((name, block)) = current.as_mut() {
            let closing = line.contains("];");
            let body = line.trim_end_matches(';').trim_end_matches(']').trim();
            if !body.is_empty() {
                let mut vals = Vec::new();
                for tok in body.split([' ', '\t', ',']).filter(|t| !t.is_empty()) {
                    let tok = tok.trim_end_matches(';');
                    if tok.is_empty() {
                        continue;
                    }
                    let v: f64 = tok.parse().map_err(|_| CaseError::Parse {
                        line: ln,
                        message: format!("non-numeric token `{tok}` in mpc.{name}"),
                    })?;
                    vals.push(v);
                }
                if !vals.is_empty() {
                    block.rows.push((ln, vals));
                }
            }
            if closing {
                let (name, block) = current.take().expect("current block exists");
                blocks.push((name, block));
            }
            continue;
        }
        if line.starts_with("function") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("mpc.") {
            let (name, after) = match rest.split_once('=') {
                Some((n, a)) => (n.trim().to_string(), a.trim()),
                None => {
                    return Err(CaseError::Parse {
                        line: ln,
                        message: format!("malformed assignment `{line}`"),
                    })
                }
            };
            match name.as_str() {
                "version" => continue,
                "baseMVA" => {
                    let tok = after.trim_end_matches(';').trim();
                    base_mva = tok.parse().map_err(|_| CaseError::Parse {
                        line: ln,
                        message: format!("non-numeric baseMVA `{tok}`"),
                    })?;
                }
                "bus" | "branch" | "gen" | "gencost" => {
                    if !after.starts_with('[') {
                        return Err(CaseError::Parse {
                            line: ln,
                            message: format!("expected `[` to open mpc.{name}"),
                        });
                    }
                    current = Some((name, NumBlock { rows: Vec::new() }));
                    // Content may follow the bracket on the same line.
                    let inline = after[1..].trim();
                    if inline.contains("];") || !inline.is_empty() {
                        let closing = inline.contains("];");
                        let body = inline.trim_end_matches(';').trim_end_matches(']').trim();
                        if !body.is_empty() {
                            let (nm, block) = current.as_mut().expect("just set");
                            let mut vals = Vec::new();
                            for tok in body.split([' ', '\t', ',']).filter(|t| !t.is_empty()) {
                                let tok = tok.trim_end_matches(';');
                                if tok.is_empty() {
                                    continue;
                                }
                                let v: f64 = tok.parse().map_err(|_| CaseError::Parse {
                                    line: ln,
                                    message: format!("non-numeric token `{tok}` in mpc.{nm}"),
                                })?;
                                vals.push(v);
                            }
                            if !vals.is_empty() {
                                block.rows.push((ln, vals));
                            }
                        }
                        if closing {
                            let (name, block) = current.take().expect("current block exists");
                            blocks.push((name, block));
                        }
                    }
                }
                other => {
                    return Err(CaseError::Parse {
                        line: ln,
                        message: format!("unknown section mpc.{other}"),
                    })
                }
            }
        } else {
            return Err(CaseError::Parse {
                line: ln,
                message: format!("unrecognized statement `{line}`"),
            });
        }
    }
    if let Some((name, _)) = current {
        return Err(CaseError::Parse {
            line: text.lines().count(),
            message: format!("unterminated mpc.{name} block"),
        });
    }

    let find = |n: &str| blocks.iter().find(|(name, _)| name == n).map(|(_, b)| b);
    let bus_block = find("bus").ok_or_else(|| CaseError::Schema("missing mpc.bus".into()))?;
    let branch_block =
        find("branch").ok_or_else(|| CaseError::Schema("missing mpc.branch".into()))?;
    let gen_block = find("gen");
    let gencost_block = find("gencost");

    let mut buses = Vec::new();
    for (ln, row) in &bus_block.rows {
        if row.len() < 3 {
            return Err(CaseError::Parse {
                line: *ln,
                message: format!("bus row has {} columns, need at least 3", row.len()),
            });
        }
        buses.push(BusRecord { id: row[0] as u64, load: row[2] });
    }

    let mut lines = Vec::new();
    for (ln, row) in &branch_block.rows {
        if row.len() < 4 {
            return Err(CaseError::Parse {
                line: *ln,
                message: format!("branch row has {} columns, need at least 4", row.len()),
            });
        }
        let status = if row.len() >= 11 { row[10] } else { 1.0 };
        if status == 0.0 {
            continue;
        }
        lines.push(LineRecord {
            from: row[0] as u64,
            to: row[1] as u64,
            x: row[3],
            rating: if row.len() >= 6 { row[5] } else { 0.0 },
            status: 1,
        });
    }

    let mut generators = Vec::new();
    if let Some(gens) = gen_block {
        let costs: Vec<Option<&(usize, Vec<f64>)>> = match gencost_block {
            Some(cb) => {
                if cb.rows.len() != gens.rows.len() {
                    return Err(CaseError::Schema(format!(
                        "mpc.gencost has {} rows but mpc.gen has {}",
                        cb.rows.len(),
                        gens.rows.len()
                    )));
                }
                cb.rows.iter().map(Some).collect()
            }
            None => vec![None; gens.rows.len()],
        };
        for ((ln, row), cost) in gens.rows.iter().zip(costs) {
            if row.len() < 10 {
                return Err(CaseError::Parse {
                    line: *ln,
                    message: format!("gen row has {} columns, need at least 10", row.len()),
                });
            }
            let status = if row.len() >= 8 { row[7] } else { 1.0 };
            if status <= 0.0 {
                continue;
            }
            let (mut c2, mut c1, mut c0, mut startup) = (0.0, 0.0, 0.0, None);
            if let Some((cln, crow)) = cost {
                if crow.len() < 4 {
                    return Err(CaseError::Parse {
                        line: *cln,
                        message: "gencost row needs at least 4 columns".into(),
                    });
                }
                if crow[0] != 2.0 {
                    return Err(CaseError::Parse {
                        line: *cln,
                        message: format!("unsupported cost model {} (only polynomial model 2)", crow[0]),
                    });
                }
                if crow[1] > 0.0 {
                    startup = Some(crow[1]);
                }
                let n = crow[3] as usize;
                if crow.len() < 4 + n {
                    return Err(CaseError::Parse {
                        line: *cln,
                        message: format!("gencost row declares {n} coefficients but has {}", crow.len() - 4),
                    });
                }
                let coeffs = &crow[4..4 + n];
                match n {
                    0 => {}
                    1 => c0 = coeffs[0],
                    2 => {
                        c1 = coeffs[0];
                        c0 = coeffs[1];
                    }
                    3 => {
                        c2 = coeffs[0];
                        c1 = coeffs[1];
                        c0 = coeffs[2];
                    }
                    _ => {
                        return Err(CaseError::Parse {
                            line: *cln,
                            message: format!("polynomial cost of degree {} not supported", n - 1),
                        })
                    }
                }
            }
            generators.push(GenRecord {
                bus: row[0] as u64,
                pmin: row[9],
                pmax: row[8],
                c2,
                c1,
                c0,
                ramp: None,
                min_up: None,
                min_down: None,
                startup,
            });
        }
    }

    Ok(RawCase {
        name: String::new(),
        base_mva,
        horizon: 1,
        load_profile: Vec::new(),
        buses,
        lines,
        generators,
    })
}

/// Renders a case summary line used by the command-line tools.
pub fn summarize(case: &RawCase) -> String {
    let mut s = String::new();
    let total_load: f64 = case.buses.iter().map(|b| b.load).sum();
    let _ = write!(
        s,
        "{} buses, {} lines, {} generators, horizon {}, base load {:.1} MW",
        case.buses.len(),
        case.lines.len(),
        case.generators.len(),
        case.horizon,
        total_load
    );
    s
}
