//! Network data model: buses, branches, per-unit conversion and the bus
//! admittance matrix.
//!
//! Two input formats are accepted:
//!
//! * a strict subset of the MATPOWER `.m` case format (`mpc.baseMVA`,
//!   `mpc.bus`, `mpc.gen` and `mpc.branch` numeric tables, plus the
//!   `function` header and `mpc.version`);
//! * a native JSON schema, see [`CaseFile`].
//!
//! External quantities are MW / MVAr / degrees; everything stored in a
//! [`NetworkCase`] is per unit on `base_mva` with angles in radians.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("malformed JSON case: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Validation(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// Bus specification in per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct BusSpec {
    /// External (1-based) bus number.
    pub id: usize,
    pub kind: BusKind,
    pub p_load: f64,
    pub q_load: f64,
    /// Voltage magnitude setpoint (Slack and PV buses).
    pub v_set: Option<f64>,
    /// Angle setpoint in radians (Slack bus).
    pub theta_set: Option<f64>,
    /// Scheduled active generation (PV buses).
    pub p_gen: Option<f64>,
    pub g_shunt: f64,
    pub b_shunt: f64,
    /// Operating voltage range `(min, max)`, if the case provides one.
    pub v_limits: Option<(f64, f64)>,
    /// Reactive generation range `(min, max)` of the merged generators.
    pub q_gen_limits: Option<(f64, f64)>,
}

impl BusSpec {
    pub fn pq(id: usize, p_load: f64, q_load: f64) -> Self {
        Self {
            id,
            kind: BusKind::Pq,
            p_load,
            q_load,
            v_set: None,
            theta_set: None,
            p_gen: None,
            g_shunt: 0.0,
            b_shunt: 0.0,
            v_limits: None,
            q_gen_limits: None,
        }
    }

    pub fn pv(id: usize, p_gen: f64, v_set: f64) -> Self {
        Self {
            kind: BusKind::Pv,
            v_set: Some(v_set),
            p_gen: Some(p_gen),
            ..Self::pq(id, 0.0, 0.0)
        }
    }

    pub fn slack(id: usize, v_set: f64, theta_set: f64) -> Self {
        Self {
            kind: BusKind::Slack,
            v_set: Some(v_set),
            theta_set: Some(theta_set),
            ..Self::pq(id, 0.0, 0.0)
        }
    }

    /// Net scheduled active injection `P^g - P^d` (zero generation for Slack).
    pub fn p_net(&self) -> f64 {
        self.p_gen.unwrap_or(0.0) - self.p_load
    }

    fn validate(&self) -> Result<(), CaseError> {
        let finite = [self.p_load, self.q_load, self.g_shunt, self.b_shunt]
            .iter()
            .chain(self.v_set.iter())
            .chain(self.theta_set.iter())
            .chain(self.p_gen.iter())
            .all(|v| v.is_finite());
        if !finite {
            return invalid(format!("bus {}: non-finite value", self.id));
        }
        match self.kind {
            BusKind::Pq => {
                if self.v_set.is_some() || self.theta_set.is_some() || self.p_gen.is_some() {
                    return invalid(format!("bus {}: PQ bus carries a setpoint", self.id));
                }
            }
            BusKind::Pv => {
                if !matches!(self.v_set, Some(v) if v > 0.0) || self.p_gen.is_none() {
                    return invalid(format!("bus {}: PV bus needs v_set > 0 and p_gen", self.id));
                }
                if self.theta_set.is_some() {
                    return invalid(format!("bus {}: PV bus carries an angle setpoint", self.id));
                }
            }
            BusKind::Slack => {
                if !matches!(self.v_set, Some(v) if v > 0.0) || self.theta_set.is_none() {
                    return invalid(format!(
                        "bus {}: slack bus needs v_set > 0 and theta_set",
                        self.id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Series/shunt parameters of one branch (π model, tap on the `from` side).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchParams {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series_g: f64,
    pub series_b: f64,
    /// Total line-charging susceptance.
    pub charging_b: f64,
    /// Off-nominal turns ratio, 1.0 for lines.
    pub tap_ratio: f64,
    /// Long-term MVA rating in per unit.
    pub rating: Option<f64>,
}

/// Entries a branch contributes to the admittance matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchAdmittance {
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

impl BranchParams {
    pub fn line(from_bus: usize, to_bus: usize, series_g: f64, series_b: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            series_g,
            series_b,
            charging_b: 0.0,
            tap_ratio: 1.0,
            rating: None,
        }
    }

    /// Branch built from series impedance `r + jx`.
    pub fn from_impedance(from_bus: usize, to_bus: usize, r: f64, x: f64) -> Self {
        let y = Complex64::new(r, x).inv();
        Self::line(from_bus, to_bus, y.re, y.im)
    }

    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.series_g, self.series_b)
    }

    pub fn admittance(&self) -> BranchAdmittance {
        let ys = self.series_admittance();
        let half_charging = Complex64::new(0.0, self.charging_b / 2.0);
        let t = self.tap_ratio;
        BranchAdmittance {
            yff: (ys + half_charging) / (t * t),
            yft: -ys / t,
            ytf: -ys / t,
            ytt: ys + half_charging,
        }
    }

    /// Whether `bus` is an endpoint, and the other endpoint if so.
    pub fn other_end(&self, bus: usize) -> Option<usize> {
        if self.from_bus == bus {
            Some(self.to_bus)
        } else if self.to_bus == bus {
            Some(self.from_bus)
        } else {
            None
        }
    }

    fn validate(&self) -> Result<(), CaseError> {
        let vals = [self.series_g, self.series_b, self.charging_b, self.tap_ratio];
        if !vals.iter().all(|v| v.is_finite()) {
            return invalid(format!(
                "branch {}-{}: non-finite value",
                self.from_bus, self.to_bus
            ));
        }
        if self.from_bus == self.to_bus {
            return invalid(format!("branch {}-{}: self loop", self.from_bus, self.to_bus));
        }
        if self.series_g == 0.0 && self.series_b == 0.0 {
            return invalid(format!(
                "branch {}-{}: zero series admittance",
                self.from_bus, self.to_bus
            ));
        }
        if self.tap_ratio <= 0.0 {
            return invalid(format!(
                "branch {}-{}: tap ratio must be positive",
                self.from_bus, self.to_bus
            ));
        }
        Ok(())
    }
}

/// A validated power-flow case. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCase {
    base_mva: f64,
    buses: Vec<BusSpec>,
    branches: Vec<BranchParams>,
    index: BTreeMap<usize, usize>,
    adjacency: Vec<BTreeSet<usize>>,
}

impl NetworkCase {
    pub fn new(
        base_mva: f64,
        buses: Vec<BusSpec>,
        branches: Vec<BranchParams>,
    ) -> Result<Self, CaseError> {
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return invalid("base_mva must be positive");
        }
        if buses.is_empty() {
            return invalid("no buses");
        }
        let mut index = BTreeMap::new();
        for (i, bus) in buses.iter().enumerate() {
            bus.validate()?;
            if index.insert(bus.id, i).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
        }
        let n_slack = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if n_slack != 1 {
            return invalid(format!("expected exactly one slack bus, found {n_slack}"));
        }
        if branches.is_empty() {
            return invalid("no branches");
        }
        let mut adjacency = vec![BTreeSet::new(); buses.len()];
        for br in &branches {
            br.validate()?;
            let (Some(&f), Some(&t)) = (index.get(&br.from_bus), index.get(&br.to_bus)) else {
                return invalid(format!(
                    "branch {}-{} references an unknown bus",
                    br.from_bus, br.to_bus
                ));
            };
            adjacency[f].insert(t);
            adjacency[t].insert(f);
        }
        let case = Self {
            base_mva,
            buses,
            branches,
            index,
            adjacency,
        };
        if !case.is_connected() {
            return invalid("network graph is disconnected");
        }
        Ok(case)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(m) = queue.pop_front() {
            for &n in &self.adjacency[m] {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[BusSpec] {
        &self.buses
    }

    pub fn branches(&self) -> &[BranchParams] {
        &self.branches
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Internal (0-based, positional) index of an external bus id.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Neighbours of bus `m` (internal indices), excluding `m` itself.
    pub fn neighbors(&self, m: usize) -> &BTreeSet<usize> {
        &self.adjacency[m]
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn count(&self, kind: BusKind) -> usize {
        self.buses.iter().filter(|b| b.kind == kind).count()
    }

    /// Internal endpoint indices of branch `k`.
    pub fn branch_ends(&self, k: usize) -> (usize, usize) {
        let br = &self.branches[k];
        (self.index[&br.from_bus], self.index[&br.to_bus])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CaseFile::from(self)).expect("case serializes")
    }
}

/// Dense complex bus admittance matrix `Y = G + jB`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    y: DMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.y[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.y
    }

    pub fn conductance(&self) -> DMatrix<f64> {
        self.y.map(|v| v.re)
    }

    pub fn susceptance(&self) -> DMatrix<f64> {
        self.y.map(|v| v.im)
    }

    /// Complex current injections `I = Y V`.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|m| (0..n).map(|k| self.y[(m, k)] * v[k]).sum())
            .collect()
    }

    /// Complex power injections `S_m = V_m conj(I_m)`.
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.currents(v)
            .into_iter()
            .zip(v)
            .map(|(i, vm)| vm * i.conj())
            .collect()
    }
}

pub fn build_ybus(case: &NetworkCase) -> AdmittanceMatrix {
    let n = case.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (m, bus) in case.buses().iter().enumerate() {
        y[(m, m)] += Complex64::new(bus.g_shunt, bus.b_shunt);
    }
    for k in 0..case.branches().len() {
        let (f, t) = case.branch_ends(k);
        let a = case.branches()[k].admittance();
        y[(f, f)] += a.yff;
        y[(f, t)] += a.yft;
        y[(t, f)] += a.ytf;
        y[(t, t)] += a.ytt;
    }
    AdmittanceMatrix { y }
}

// ---------------------------------------------------------------------------
// JSON schema

/// Bus record of the JSON case schema. Powers in MW/MVAr, angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
    #[serde(rename = "type")]
    pub kind: BusKind,
    pub pd_mw: f64,
    pub qd_mvar: f64,
    /// Voltage setpoint, p.u. (slack and PV buses).
    #[serde(default)]
    pub vm_pu: Option<f64>,
    /// Angle setpoint, degrees (slack bus).
    #[serde(default)]
    pub va_deg: Option<f64>,
    /// Scheduled generation (PV buses).
    #[serde(default)]
    pub pg_mw: Option<f64>,
    /// Shunt conductance, MW consumed at 1 p.u.
    #[serde(default)]
    pub gs_mw: f64,
    /// Shunt susceptance, MVAr injected at 1 p.u.
    #[serde(default)]
    pub bs_mvar: f64,
    #[serde(default)]
    pub vmin_pu: Option<f64>,
    #[serde(default)]
    pub vmax_pu: Option<f64>,
    #[serde(default)]
    pub qg_min_mvar: Option<f64>,
    #[serde(default)]
    pub qg_max_mvar: Option<f64>,
}

/// Branch record of the JSON case schema (series admittance in p.u.).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub g_pu: f64,
    pub b_pu: f64,
    #[serde(default)]
    pub charging_pu: f64,
    #[serde(default = "unit_tap")]
    pub tap: f64,
    #[serde(default)]
    pub rate_mva: Option<f64>,
}

fn unit_tap() -> f64 {
    1.0
}

/// Top-level JSON case document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

/// External-unit value that converts back to exactly `x`, searched among the
/// floats next to `approx`; falls back to `approx`.
fn external(x: f64, approx: f64, back: impl Fn(f64) -> f64) -> f64 {
    let (mut up, mut down) = (approx, approx);
    for _ in 0..64 {
        if back(up) == x {
            return up;
        }
        if back(down) == x {
            return down;
        }
        up = up.next_up();
        down = down.next_down();
    }
    approx
}

impl From<&NetworkCase> for CaseFile {
    fn from(case: &NetworkCase) -> Self {
        let base = case.base_mva;
        let mw = |x: f64| external(x, x * base, |y| y / base);
        let deg = |x: f64| external(x, x.to_degrees(), f64::to_radians);
        let buses = case
            .buses
            .iter()
            .map(|b| BusRecord {
                id: b.id,
                kind: b.kind,
                pd_mw: mw(b.p_load),
                qd_mvar: mw(b.q_load),
                vm_pu: b.v_set,
                va_deg: b.theta_set.map(deg),
                pg_mw: b.p_gen.map(mw),
                gs_mw: mw(b.g_shunt),
                bs_mvar: mw(b.b_shunt),
                vmin_pu: b.v_limits.map(|l| l.0),
                vmax_pu: b.v_limits.map(|l| l.1),
                qg_min_mvar: b.q_gen_limits.map(|l| mw(l.0)),
                qg_max_mvar: b.q_gen_limits.map(|l| mw(l.1)),
            })
            .collect();
        let branches = case
            .branches
            .iter()
            .map(|br| BranchRecord {
                from: br.from_bus,
                to: br.to_bus,
                g_pu: br.series_g,
                b_pu: br.series_b,
                charging_pu: br.charging_b,
                tap: br.tap_ratio,
                rate_mva: br.rating.map(mw),
            })
            .collect();
        CaseFile {
            base_mva: base,
            buses,
            branches,
        }
    }
}

impl TryFrom<CaseFile> for NetworkCase {
    type Error = CaseError;

    fn try_from(file: CaseFile) -> Result<Self, CaseError> {
        let base = file.base_mva;
        let pair = |lo: Option<f64>, hi: Option<f64>, scale: f64| match (lo, hi) {
            (Some(lo), Some(hi)) => Some((lo / scale, hi / scale)),
            _ => None,
        };
        let buses = file
            .buses
            .into_iter()
            .map(|r| BusSpec {
                id: r.id,
                kind: r.kind,
                p_load: r.pd_mw / base,
                q_load: r.qd_mvar / base,
                v_set: r.vm_pu,
                theta_set: r.va_deg.map(f64::to_radians),
                p_gen: r.pg_mw.map(|p| p / base),
                g_shunt: r.gs_mw / base,
                b_shunt: r.bs_mvar / base,
                v_limits: pair(r.vmin_pu, r.vmax_pu, 1.0),
                q_gen_limits: pair(r.qg_min_mvar, r.qg_max_mvar, base),
            })
            .collect();
        let branches = file
            .branches
            .into_iter()
            .map(|r| BranchParams {
                from_bus: r.from,
                to_bus: r.to,
                series_g: r.g_pu,
                series_b: r.b_pu,
                charging_b: r.charging_pu,
                tap_ratio: r.tap,
                rating: r.rate_mva.map(|v| v / base),
            })
            .collect();
        NetworkCase::new(base, buses, branches)
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Parse a case from MATPOWER-subset text or the JSON schema.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    if text.trim_start().starts_with('{') {
        let file: CaseFile = serde_json::from_str(text)?;
        return NetworkCase::try_from(file);
    }
    parse_matpower(text)
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

#[derive(Default)]
struct RawTables {
    base_mva: Option<f64>,
    bus: Option<Vec<Row>>,
    gen: Option<Vec<Row>>,
    branch: Option<Vec<Row>>,
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Parse {
        line,
        msg: msg.into(),
    })
}

fn parse_row(line: usize, text: &str) -> Result<Option<Row>, CaseError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CaseError::Parse {
                    line,
                    msg: format!("not a number: `{t}`"),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(Row { line, values }))
}

fn scan_matpower(text: &str) -> Result<RawTables, CaseError> {
    let mut tables = RawTables::default();
    let mut open: Option<(String, Vec<Row>)> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((name, mut rows)) = open.take() {
            let (body, closed) = match line.find(']') {
                Some(pos) => {
                    if line[pos + 1..].trim().trim_end_matches(';').trim() != "" {
                        return parse_err(line_no, "unexpected text after `]`");
                    }
                    (&line[..pos], true)
                }
                None => (line, false),
            };
            for chunk in body.split(';') {
                if let Some(row) = parse_row(line_no, chunk)? {
                    rows.push(row);
                }
            }
            if closed {
                let slot = match name.as_str() {
                    "bus" => &mut tables.bus,
                    "gen" => &mut tables.gen,
                    _ => &mut tables.branch,
                };
                if slot.replace(rows).is_some() {
                    return parse_err(line_no, format!("duplicate table mpc.{name}"));
                }
            } else {
                open = Some((name, rows));
            }
            continue;
        }
        if line.starts_with("function") {
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            return parse_err(line_no, format!("unsupported statement: `{line}`"));
        };
        let Some((name, value)) = rest.split_once('=') else {
            return parse_err(line_no, format!("expected assignment: `{line}`"));
        };
        let name = name.trim();
        let value = value.trim();
        match name {
            "version" => {
                let v = value.trim_end_matches(';').trim().trim_matches('\'');
                if v != "2" {
                    return parse_err(line_no, format!("unsupported case version `{v}`"));
                }
            }
            "baseMVA" => {
                let v = value.trim_end_matches(';').trim();
                let base = v.parse::<f64>().map_err(|_| CaseError::Parse {
                    line: line_no,
                    msg: format!("not a number: `{v}`"),
                })?;
                tables.base_mva = Some(base);
            }
            "bus" | "gen" | "branch" => {
                let Some(body) = value.strip_prefix('[') else {
                    return parse_err(line_no, format!("mpc.{name} must be a `[` table"));
                };
                let mut rows = Vec::new();
                if let Some(pos) = body.find(']') {
                    for chunk in body[..pos].split(';') {
                        if let Some(row) = parse_row(line_no, chunk)? {
                            rows.push(row);
                        }
                    }
                    let slot = match name {
                        "bus" => &mut tables.bus,
                        "gen" => &mut tables.gen,
                        _ => &mut tables.branch,
                    };
                    if slot.replace(rows).is_some() {
                        return parse_err(line_no, format!("duplicate table mpc.{name}"));
                    }
                } else {
                    for chunk in body.split(';') {
                        if let Some(row) = parse_row(line_no, chunk)? {
                            rows.push(row);
                        }
                    }
                    open = Some((name.to_string(), rows));
                }
            }
            other => return parse_err(line_no, format!("unsupported field mpc.{other}")),
        }
    }
    if let Some((name, _)) = open {
        return parse_err(text.lines().count(), format!("unterminated table mpc.{name}"));
    }
    Ok(tables)
}

fn need(row: &Row, cols: usize, table: &str) -> Result<(), CaseError> {
    if row.values.len() < cols {
        return parse_err(
            row.line,
            format!(
                "mpc.{table} row has {} columns, expected at least {cols}",
                row.values.len()
            ),
        );
    }
    Ok(())
}

fn as_index(row: &Row, v: f64, what: &str) -> Result<usize, CaseError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        parse_err(row.line, format!("{what} must be a positive integer, got {v}"))
    }
}

#[derive(Default)]
struct GenTotals {
    line: usize,
    p: f64,
    q_min: f64,
    q_max: f64,
    v_set: Option<f64>,
}

fn parse_matpower(text: &str) -> Result<NetworkCase, CaseError> {
    let tables = scan_matpower(text)?;
    let last = text.lines().count();
    let Some(base) = tables.base_mva else {
        return parse_err(last, "missing mpc.baseMVA");
    };
    let (Some(bus_rows), Some(gen_rows), Some(branch_rows)) =
        (tables.bus, tables.gen, tables.branch)
    else {
        return parse_err(last, "mpc.bus, mpc.gen and mpc.branch are all required");
    };

    // Generators are merged per bus before bus typing.
    let mut gens: BTreeMap<usize, GenTotals> = BTreeMap::new();
    for row in &gen_rows {
        need(row, 8, "gen")?;
        let v = &row.values;
        if v[7] <= 0.0 {
            continue;
        }
        let bus = as_index(row, v[0], "generator bus")?;
        let entry = gens.entry(bus).or_insert_with(|| GenTotals {
            line: row.line,
            ..GenTotals::default()
        });
        entry.p += v[1];
        entry.q_max += v[3];
        entry.q_min += v[4];
        match entry.v_set {
            Some(vs) if vs != v[5] => {
                return parse_err(row.line, format!("conflicting voltage setpoints at bus {bus}"))
            }
            _ => entry.v_set = Some(v[5]),
        }
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    for row in &bus_rows {
        need(row, 11, "bus")?;
        let v = &row.values;
        let id = as_index(row, v[0], "bus number")?;
        let gen = gens.remove(&id);
        let kind = match v[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Slack,
            t => return parse_err(row.line, format!("unsupported bus type {t}")),
        };
        let v_limits = (v.len() >= 13 && v[11] > 0.0).then(|| (v[12], v[11]));
        let mut bus = BusSpec {
            id,
            kind,
            p_load: v[2] / base,
            q_load: v[3] / base,
            v_set: None,
            theta_set: None,
            p_gen: None,
            g_shunt: v[4] / base,
            b_shunt: v[5] / base,
            v_limits,
            q_gen_limits: gen.as_ref().map(|g| (g.q_min / base, g.q_max / base)),
        };
        match kind {
            BusKind::Pq => {
                if let Some(g) = gen {
                    return parse_err(g.line, format!("in-service generator at PQ bus {id}"));
                }
            }
            BusKind::Pv => {
                let Some(g) = gen else {
                    return parse_err(row.line, format!("PV bus {id} has no in-service generator"));
                };
                bus.p_gen = Some(g.p / base);
                bus.v_set = g.v_set;
            }
            BusKind::Slack => {
                bus.v_set = Some(gen.and_then(|g| g.v_set).unwrap_or(v[7]));
                bus.theta_set = Some(v[8].to_radians());
            }
        }
        buses.push(bus);
    }
    if let Some((bus, g)) = gens.into_iter().next() {
        return parse_err(g.line, format!("generator at unknown bus {bus}"));
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        need(row, 11, "branch")?;
        let v = &row.values;
        if v[10] <= 0.0 {
            continue;
        }
        if v[9] != 0.0 {
            return parse_err(row.line, "phase-shifting transformers are not supported");
        }
        let (r, x) = (v[2], v[3]);
        if r == 0.0 && x == 0.0 {
            return parse_err(row.line, "zero series impedance");
        }
        let mut br = BranchParams::from_impedance(
            as_index(row, v[0], "from bus")?,
            as_index(row, v[1], "to bus")?,
            r,
            x,
        );
        br.charging_b = v[4];
        br.tap_ratio = if v[8] == 0.0 { 1.0 } else { v[8] };
        br.rating = (v[5] > 0.0).then(|| v[5] / base);
        branches.push(br);
    }

    NetworkCase::new(base, buses, branches)
}
