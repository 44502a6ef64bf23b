//! Solution curves created by a grounded zero-injection bus.
//!
//! If a PV bus `p` with no generation, load or shunt hangs off a single
//! lossless branch to a bus `z` with no load or shunt, then `|V_z| = 0`
//! satisfies both buses' balance equations for every angle of `p`. The rest
//! of the network (`S₂`) then sees `z` as ground, and each solution of `S₂`
//! extends to a one-parameter family of full-system solutions.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::case::{build_ybus, BranchParams, BusKind, CaseError, NetworkCase};
use crate::enumerator::{enumerate_case, EnumConfig, NodeLog, SearchStats, SuspectBox};
use crate::pf::{branch_flows, residuals, PolarSolution};
use crate::qcpf::{default_vmax, QcpfError, RectState};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuumPattern {
    /// Internal index of the bus grounded on the curve.
    pub zero_bus: usize,
    /// Internal index of the PV bus whose angle is free.
    pub pendant_bus: usize,
    /// Index into `case.branches()` of the branch joining them.
    pub bridge: usize,
    pub bridge_params: BranchParams,
    /// `-v_set² b` of the bridge, p.u.
    pub q_pendant: f64,
}

fn is_unloaded(case: &NetworkCase, m: usize) -> bool {
    let b = &case.buses()[m];
    b.p_load == 0.0 && b.q_load == 0.0 && b.g_shunt == 0.0 && b.b_shunt == 0.0
}

/// All pendant patterns in `case`, ordered by pendant bus index.
pub fn detect_patterns(case: &NetworkCase) -> Vec<ContinuumPattern> {
    let mut found = Vec::new();
    if case.n_buses() < 3 {
        return found;
    }
    for (p, bus) in case.buses().iter().enumerate() {
        if bus.kind != BusKind::Pv || bus.p_gen.unwrap_or(0.0) != 0.0 || !is_unloaded(case, p) {
            continue;
        }
        let incident: Vec<usize> = case
            .branches()
            .iter()
            .enumerate()
            .filter(|(_, br)| br.other_end(bus.id).is_some())
            .map(|(k, _)| k)
            .collect();
        let [k] = incident[..] else { continue };
        let br = &case.branches()[k];
        if br.series_g != 0.0 || br.charging_b != 0.0 || br.tap_ratio != 1.0 {
            continue;
        }
        let z = case.index_of(br.other_end(bus.id).unwrap()).unwrap();
        if case.buses()[z].kind != BusKind::Pq || !is_unloaded(case, z) {
            continue;
        }
        let v = bus.v_set.unwrap();
        found.push(ContinuumPattern {
            zero_bus: z,
            pendant_bus: p,
            bridge: k,
            bridge_params: br.clone(),
            q_pendant: -v * v * br.series_b,
        });
    }
    found
}

/// The reduced network `S₂` and how its buses map back to the full case.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemDecomposition {
    pub pattern: ContinuumPattern,
    pub s2: NetworkCase,
    /// `s2_to_full[i]` is the full-case index of `S₂` bus `i`.
    pub s2_to_full: Vec<usize>,
    /// `(full-case bus index, added shunt g + jb)` for each former neighbor of the zero bus.
    pub added_shunts: Vec<(usize, Complex64)>,
}

/// Remove the zero and pendant buses. A branch from a neighbor `n` to the
/// grounded bus becomes a shunt at `n` equal to that branch's own-end term
/// of the admittance matrix.
pub fn decompose(case: &NetworkCase, pattern: &ContinuumPattern) -> Result<SubsystemDecomposition, CaseError> {
    let z_id = case.buses()[pattern.zero_bus].id;
    let p_id = case.buses()[pattern.pendant_bus].id;
    let s2_to_full: Vec<usize> = (0..case.n_buses())
        .filter(|&m| m != pattern.zero_bus && m != pattern.pendant_bus)
        .collect();
    let mut buses: Vec<_> = s2_to_full.iter().map(|&m| case.buses()[m].clone()).collect();
    let mut branches = Vec::new();
    let mut added: Vec<(usize, Complex64)> = Vec::new();
    for br in case.branches() {
        if br.other_end(p_id).is_some() {
            continue;
        }
        let Some(n_id) = br.other_end(z_id) else {
            branches.push(br.clone());
            continue;
        };
        let y = br.admittance();
        let shunt = if br.from_bus == n_id { y.yff } else { y.ytt };
        let n = case.index_of(n_id).unwrap();
        match added.iter_mut().find(|a| a.0 == n) {
            Some(a) => a.1 += shunt,
            None => added.push((n, shunt)),
        }
    }
    added.sort_by_key(|a| a.0);
    for &(n, y) in &added {
        let i = s2_to_full.iter().position(|&m| m == n).unwrap();
        buses[i].g_shunt += y.re;
        buses[i].b_shunt += y.im;
    }
    let s2 = NetworkCase::new(case.base_mva(), buses, branches)?;
    Ok(SubsystemDecomposition {
        pattern: pattern.clone(),
        s2,
        s2_to_full,
        added_shunts: added,
    })
}

impl SubsystemDecomposition {
    /// Full-case state with the zero bus grounded and the pendant bus at `v∠θ`.
    pub fn assemble(&self, full: &NetworkCase, s2_state: &RectState, pendant_v: f64, theta: f64) -> RectState {
        let mut x = RectState::zeros(full.n_buses());
        for (i, &m) in self.s2_to_full.iter().enumerate() {
            x.set(m, s2_state.voltage(i));
        }
        x.set(self.pattern.zero_bus, Complex64::new(0.0, 0.0));
        x.set(self.pattern.pendant_bus, Complex64::from_polar(pendant_v, theta));
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaSample {
    /// Pendant angle, radians.
    pub theta: f64,
    pub e_pendant: f64,
    pub f_pendant: f64,
    pub residual: f64,
    pub p_pendant: f64,
}

/// A one-parameter family of full-system solutions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionCurve {
    /// Solution of the reduced network, in `S₂` bus order.
    pub s2_solution: PolarSolution,
    /// Full-case solution at pendant angle 0; zero-bus angle is undefined.
    pub full_at_zero: PolarSolution,
    pub zero_bus: usize,
    pub free_angle_bus: usize,
    pub pendant_v: f64,
    pub q_pendant: f64,
    pub samples: Vec<ThetaSample>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("S2 solution {index}: residual {residual:.3e} at theta = {theta:.6} rad")]
    Residual { index: usize, theta: f64, residual: f64 },
    #[error("S2 solution {index} has {got} buses, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveOptions {
    pub theta_samples: usize,
    /// Pendant magnitude; defaults to the case setpoint.
    pub pendant_v: Option<f64>,
    /// Largest full-system residual accepted at a sample.
    pub tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            theta_samples: 24,
            pendant_v: None,
            tol: 1e-8,
        }
    }
}

/// Evenly spaced angles on `[-π, π)`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// Full-system residual norm and pendant active injection at one angle.
pub fn sample_curve(
    case: &NetworkCase,
    decomposition: &SubsystemDecomposition,
    s2_state: &RectState,
    pendant_v: f64,
    theta: f64,
) -> ThetaSample {
    let x = decomposition.assemble(case, s2_state, pendant_v, theta);
    let ybus = build_ybus(case);
    let sol = PolarSolution::from_rect(case, &ybus, &x);
    let s = ybus.injections(&x.voltages());
    let p = decomposition.pattern.pendant_bus;
    ThetaSample {
        theta,
        e_pendant: x.e(p),
        f_pendant: x.f(p),
        residual: residuals(case, &sol).inf_norm(),
        p_pendant: s[p].re,
    }
}

/// One curve per reduced-network solution, each checked on `opts.theta_samples` angles.
pub fn build_curves(
    case: &NetworkCase,
    decomposition: &SubsystemDecomposition,
    s2_solutions: &[PolarSolution],
    opts: &CurveOptions,
) -> Result<Vec<SolutionCurve>, CurveError> {
    let pattern = &decomposition.pattern;
    let b = pattern.bridge_params.series_b;
    let pendant_v = opts
        .pendant_v
        .unwrap_or_else(|| case.buses()[pattern.pendant_bus].v_set.unwrap());
    let ybus = build_ybus(case);
    let mut curves = Vec::with_capacity(s2_solutions.len());
    for (index, sol) in s2_solutions.iter().enumerate() {
        if sol.n_bus() != decomposition.s2.n_buses() {
            return Err(CurveError::Dimension {
                index,
                got: sol.n_bus(),
                expected: decomposition.s2.n_buses(),
            });
        }
        let state = sol.to_rect();
        let mut samples = Vec::with_capacity(opts.theta_samples);
        for theta in theta_grid(opts.theta_samples) {
            let s = sample_curve(case, decomposition, &state, pendant_v, theta);
            if !(s.residual < opts.tol) {
                return Err(CurveError::Residual {
                    index,
                    theta,
                    residual: s.residual,
                });
            }
            samples.push(s);
        }
        let x0 = decomposition.assemble(case, &state, pendant_v, 0.0);
        let mut full_at_zero = PolarSolution::from_rect(case, &ybus, &x0);
        full_at_zero.theta[pattern.zero_bus] = None;
        curves.push(SolutionCurve {
            s2_solution: sol.clone(),
            full_at_zero,
            zero_bus: pattern.zero_bus,
            free_angle_bus: pattern.pendant_bus,
            pendant_v,
            q_pendant: -pendant_v * pendant_v * b,
            samples,
        });
    }
    Ok(curves)
}

// ---------------------------------------------------------------------------
// Practicality

/// Operating limits to check; empty lists mean that check is skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Limits {
    /// `(bus index, qmin, qmax)`, p.u.
    pub q_gen: Vec<(usize, f64, f64)>,
    /// `(bus index, vmin, vmax)`, p.u.
    pub voltage: Vec<(usize, f64, f64)>,
    /// `(branch index, rating)`, p.u. apparent power.
    pub flow: Vec<(usize, f64)>,
}

impl Limits {
    /// Every limit recorded in the case.
    pub fn from_case(case: &NetworkCase) -> Self {
        let mut limits = Limits::default();
        for (m, bus) in case.buses().iter().enumerate() {
            if let Some((lo, hi)) = bus.q_gen_limits {
                limits.q_gen.push((m, lo, hi));
            }
            if let Some((lo, hi)) = bus.v_limits {
                limits.voltage.push((m, lo, hi));
            }
        }
        for (k, br) in case.branches().iter().enumerate() {
            if let Some(r) = br.rating {
                limits.flow.push((k, r));
            }
        }
        limits
    }

    pub fn is_empty(&self) -> bool {
        self.q_gen.is_empty() && self.voltage.is_empty() && self.flow.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    QLimit,
    VLimit,
    FlowLimit,
    LoadAtZeroBus,
}

impl LimitKind {
    pub fn label(self) -> &'static str {
        match self {
            LimitKind::QLimit => "Q-limit",
            LimitKind::VLimit => "V-limit",
            LimitKind::FlowLimit => "flow-limit",
            LimitKind::LoadAtZeroBus => "load-at-zero-bus",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitViolation {
    pub kind: LimitKind,
    /// Bus id, or branch index for flow limits.
    pub element: usize,
    pub value: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PracticalityReport {
    pub violations: Vec<LimitViolation>,
    pub unchecked: Vec<LimitKind>,
}

impl PracticalityReport {
    pub fn violates(&self, kind: LimitKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    /// Bus ids (or branch indices) violating `kind`, ascending.
    pub fn elements(&self, kind: LimitKind) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .violations
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.element)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// e.g. `violated: Q-limit (bus 8), V-limit (buses 4, 7); unchecked: flow-limit`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let kinds = [
            LimitKind::QLimit,
            LimitKind::VLimit,
            LimitKind::FlowLimit,
            LimitKind::LoadAtZeroBus,
        ];
        let violated: Vec<String> = kinds
            .iter()
            .filter(|k| self.violates(**k))
            .map(|k| {
                let ids: Vec<String> = self.elements(*k).iter().map(|e| e.to_string()).collect();
                let noun = match (k, ids.len()) {
                    (LimitKind::FlowLimit, 1) => "branch",
                    (LimitKind::FlowLimit, _) => "branches",
                    (_, 1) => "bus",
                    _ => "buses",
                };
                format!("{} ({noun} {})", k.label(), ids.join(", "))
            })
            .collect();
        if violated.is_empty() {
            out.push_str("violated: none");
        } else {
            write!(out, "violated: {}", violated.join(", ")).unwrap();
        }
        if self.unchecked.len() == 3 {
            out.push_str("; unchecked: all");
        } else if !self.unchecked.is_empty() {
            let names: Vec<&str> = self.unchecked.iter().map(|k| k.label()).collect();
            write!(out, "; unchecked: {}", names.join(", ")).unwrap();
        }
        out
    }
}

/// Tolerance on limit comparisons, p.u.
const LIMIT_TOL: f64 = 1e-9;

/// Annotate a full-case solution with the operating limits it breaks.
/// `zero_bus`, when given, is checked for load (a grounded bus cannot serve one).
pub fn practicality_filter(
    case: &NetworkCase,
    solution: &PolarSolution,
    zero_bus: Option<usize>,
    limits: &Limits,
) -> PracticalityReport {
    let mut report = PracticalityReport::default();
    let id = |m: usize| case.buses()[m].id;
    if limits.q_gen.is_empty() {
        report.unchecked.push(LimitKind::QLimit);
    } else {
        let s = build_ybus(case).injections(&solution.voltages());
        for &(m, lo, hi) in &limits.q_gen {
            let q = s[m].im + case.buses()[m].q_load;
            if q > hi + LIMIT_TOL || q < lo - LIMIT_TOL {
                report.violations.push(LimitViolation {
                    kind: LimitKind::QLimit,
                    element: id(m),
                    value: q,
                    limit: if q > hi { hi } else { lo },
                });
            }
        }
    }
    if limits.voltage.is_empty() {
        report.unchecked.push(LimitKind::VLimit);
    } else {
        for &(m, lo, hi) in &limits.voltage {
            let v = solution.v_mag[m];
            if v > hi + LIMIT_TOL || v < lo - LIMIT_TOL {
                report.violations.push(LimitViolation {
                    kind: LimitKind::VLimit,
                    element: id(m),
                    value: v,
                    limit: if v > hi { hi } else { lo },
                });
            }
        }
    }
    if limits.flow.is_empty() {
        report.unchecked.push(LimitKind::FlowLimit);
    } else {
        let flows = branch_flows(case, solution);
        for &(k, rating) in &limits.flow {
            let s = [&flows[2 * k], &flows[2 * k + 1]]
                .iter()
                .map(|f| f.p_flow.hypot(f.q_flow))
                .fold(0.0, f64::max);
            if s > rating + LIMIT_TOL {
                report.violations.push(LimitViolation {
                    kind: LimitKind::FlowLimit,
                    element: k,
                    value: s,
                    limit: rating,
                });
            }
        }
    }
    if let Some(z) = zero_bus {
        let bus = &case.buses()[z];
        let load = bus.p_load.hypot(bus.q_load);
        if load > 0.0 {
            report.violations.push(LimitViolation {
                kind: LimitKind::LoadAtZeroBus,
                element: bus.id,
                value: load,
                limit: 0.0,
            });
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Full analysis

/// Curves of one pattern together with the reduced-network search behind them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternAnalysis {
    pub pattern: ContinuumPattern,
    /// Bus ids of the reduced network, in its internal order.
    pub s2_bus_ids: Vec<usize>,
    pub enumeration_complete: bool,
    pub stats: SearchStats,
    pub suspects: Vec<SuspectBox>,
    pub curves: Vec<SolutionCurve>,
    pub practicality: Vec<PracticalityReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("reduced network: {0}")]
    Decompose(#[from] CaseError),
    #[error(transparent)]
    Box(#[from] QcpfError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Detect every pattern, enumerate each reduced network and assemble its
/// curves, annotated against `limits`. `vmax` defaults per reduced network.
pub fn analyze(
    case: &NetworkCase,
    vmax: Option<f64>,
    config: &EnumConfig,
    curve_opts: &CurveOptions,
    limits: &Limits,
    mut progress: impl FnMut(&NodeLog),
) -> Result<Vec<PatternAnalysis>, AnalysisError> {
    let mut out = Vec::new();
    for pattern in detect_patterns(case) {
        let d = decompose(case, &pattern)?;
        let vmax = vmax.unwrap_or_else(|| default_vmax(&d.s2));
        let set = enumerate_case(&d.s2, vmax, config, &mut progress)?;
        let mut s2_solutions: Vec<PolarSolution> = set.isolated.iter().map(|s| s.polar.clone()).collect();
        // lowest total magnitude first
        s2_solutions.sort_by(|a, b| {
            let sa: f64 = a.v_mag.iter().sum();
            let sb: f64 = b.v_mag.iter().sum();
            sa.total_cmp(&sb)
        });
        let curves = build_curves(case, &d, &s2_solutions, curve_opts)?;
        let practicality = curves
            .iter()
            .map(|c| practicality_filter(case, &c.full_at_zero, Some(c.zero_bus), limits))
            .collect();
        out.push(PatternAnalysis {
            s2_bus_ids: d.s2.buses().iter().map(|b| b.id).collect(),
            pattern,
            enumeration_complete: set.complete,
            stats: set.stats,
            suspects: set.suspects,
            curves,
            practicality,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Export

/// Table layout: one row per bus, magnitudes of every curve then angles in degrees.
/// Undefined and free angles print as `-`.
pub fn curves_table(case: &NetworkCase, curves: &[SolutionCurve], sep: &str, digits: usize) -> String {
    let mut out = String::new();
    let mut header = vec!["bus".to_string()];
    header.extend((1..=curves.len()).map(|i| format!("v{i}")));
    header.extend((1..=curves.len()).map(|i| format!("theta{i}")));
    out.push_str(&header.join(sep));
    out.push('\n');
    for (m, bus) in case.buses().iter().enumerate() {
        let mut row = vec![bus.id.to_string()];
        for c in curves {
            row.push(format!("{:.digits$}", c.full_at_zero.v_mag[m]));
        }
        for c in curves {
            let angle = if m == c.free_angle_bus { None } else { c.full_at_zero.theta[m] };
            row.push(match angle {
                Some(t) => format!("{:.digits$}", t.to_degrees()),
                None => "-".to_string(),
            });
        }
        out.push_str(&row.join(sep));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::BusSpec;
    use crate::cases;
    use crate::pf::{newton_refine, NewtonOptions, Pin};

    fn ieee14_pattern() -> (NetworkCase, ContinuumPattern) {
        let case = cases::ieee14();
        let mut p = detect_patterns(&case);
        assert_eq!(p.len(), 1);
        (case, p.remove(0))
    }

    #[test]
    fn ieee14_has_one_pattern() {
        let (case, p) = ieee14_pattern();
        assert_eq!(case.buses()[p.zero_bus].id, 7);
        assert_eq!(case.buses()[p.pendant_bus].id, 8);
        assert!((p.q_pendant - 6.7448).abs() < 1e-4, "{}", p.q_pendant);
        assert!((p.q_pendant - 1.09f64.powi(2) / 0.17615).abs() < 1e-12);
    }

    #[test]
    fn load_at_zero_bus_removes_pattern() {
        let case = cases::ieee14();
        let mut buses = case.buses().to_vec();
        buses[6].p_load = 0.01;
        let loaded = NetworkCase::new(case.base_mva(), buses, case.branches().to_vec()).unwrap();
        assert!(detect_patterns(&loaded).is_empty());
    }

    #[test]
    fn small_cases_have_no_pattern() {
        assert!(detect_patterns(&cases::two_bus()).is_empty());
        assert!(detect_patterns(&cases::three_bus()).is_empty());
    }

    #[test]
    fn s2_has_twelve_buses_and_two_new_shunts() {
        let (case, p) = ieee14_pattern();
        let d = decompose(&case, &p).unwrap();
        assert_eq!(d.s2.n_buses(), 12);
        let ids: Vec<usize> = d.added_shunts.iter().map(|a| case.buses()[a.0].id).collect();
        assert_eq!(ids, vec![4, 9]);
        // branch 4-7 has tap 0.978 on the bus-4 side: shunt = ys / t²
        let ys = Complex64::new(0.0, -1.0 / 0.20912);
        let expected = ys / (0.978 * 0.978);
        assert!((d.added_shunts[0].1 - expected).norm() < 1e-12);
        // bus 9 is the to-end of 7-9: shunt = ys
        assert!((d.added_shunts[1].1 - Complex64::new(0.0, -1.0 / 0.11001)).norm() < 1e-12);
        assert_eq!(d, decompose(&case, &p).unwrap());
    }

    #[test]
    fn degree_one_zero_bus_adds_no_shunt() {
        // 1 - 2 - 3(z) - 4(p): z only touches 2 and the bridge
        let buses = vec![
            BusSpec::slack(1, 1.0, 0.0),
            BusSpec::pq(2, 0.1, 0.0),
            BusSpec::pq(3, 0.0, 0.0),
            BusSpec::pv(4, 0.0, 1.0),
        ];
        let branches = vec![
            BranchParams::line(1, 2, 0.0, -10.0),
            BranchParams::line(2, 3, 0.0, -8.0),
            BranchParams::line(3, 4, 0.0, -5.0),
        ];
        let case = NetworkCase::new(100.0, buses, branches).unwrap();
        let p = detect_patterns(&case);
        assert_eq!(p.len(), 1);
        let d = decompose(&case, &p[0]).unwrap();
        assert_eq!(d.s2.n_buses(), 2);
        assert_eq!(d.added_shunts.len(), 1);
        assert_eq!(d.s2.branches().len(), 1);
    }

    #[test]
    fn decomposition_matches_full_residuals() {
        let (case, p) = ieee14_pattern();
        let d = decompose(&case, &p).unwrap();
        let ybus_full = build_ybus(&case);
        let ybus_s2 = build_ybus(&d.s2);
        // arbitrary voltages on S₂, zero at bus 7
        let v2: Vec<Complex64> = (0..12)
            .map(|i| Complex64::from_polar(0.6 + 0.04 * i as f64, -0.1 * i as f64))
            .collect();
        let x2 = RectState::from_voltages(&v2);
        let x = d.assemble(&case, &x2, 1.09, 0.7);
        let s_full = ybus_full.injections(&x.voltages());
        let s_red = ybus_s2.injections(&v2);
        for (i, &m) in d.s2_to_full.iter().enumerate() {
            assert!((s_full[m] - s_red[i]).norm() < 1e-12, "bus {}", case.buses()[m].id);
        }
    }

    #[test]
    fn curves_from_newton_solution_are_valid() {
        let (case, p) = ieee14_pattern();
        let d = decompose(&case, &p).unwrap();
        // second (higher-voltage) reduced solution from a nearby start
        let table_v = [1.06, 1.045, 1.01, 0.7525, 0.8309, 1.07, 0.2592, 0.3814, 0.7118, 0.9950, 0.9280, 0.5130];
        let table_t = [0.0, -8.4330, -19.6333, -12.5904, -14.0091, -39.2774, -37.2568, -39.0664, -38.94, -40.7917, -40.1235, -42.9334];
        let guess = RectState::from_polar(&table_v, &table_t.map(f64::to_radians));
        let out = newton_refine(&d.s2, &guess, &[], NewtonOptions::default()).unwrap();
        let curves = build_curves(&case, &d, &[out.solution.clone()], &CurveOptions::default()).unwrap();
        assert_eq!(curves.len(), 1);
        let c = &curves[0];
        assert_eq!(c.samples.len(), 24);
        assert!(c.full_at_zero.theta[p.zero_bus].is_none());
        assert_eq!(c.full_at_zero.v_mag[p.zero_bus], 0.0);
        let s = sample_curve(&case, &d, &out.state, 1.09, 0.0);
        assert_eq!((s.e_pendant, s.f_pendant), (1.09, 0.0));
        let s = sample_curve(&case, &d, &out.state, 1.09, 37.3f64.to_radians());
        assert!(s.residual < 1e-8);
        assert!(s.p_pendant.abs() < 1e-15);

        // the grounded solution also solves the full system under Newton with bus 7 pinned
        let x = d.assemble(&case, &out.state, 1.09, 0.3);
        let again = newton_refine(&case, &x, &[Pin::grounded(p.zero_bus)], NewtonOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);

        let report = practicality_filter(&case, &c.full_at_zero, Some(p.zero_bus), &Limits::from_case(&case));
        assert!(report.elements(LimitKind::QLimit).contains(&8));
        assert!(report.elements(LimitKind::VLimit).contains(&7));
        assert_eq!(report.unchecked, vec![LimitKind::FlowLimit]);
    }

    #[test]
    fn absent_limits_are_unchecked() {
        let case = cases::two_bus();
        let sol = PolarSolution::from_polar(vec![1.0, 1.0], vec![Some(0.0), Some(0.0)]);
        let report = practicality_filter(&case, &sol, None, &Limits::default());
        assert!(report.violations.is_empty());
        assert_eq!(report.summary(), "violated: none; unchecked: all");
    }

    #[test]
    fn theta_grid_is_half_open() {
        let g = theta_grid(4);
        assert_eq!(g[0], -std::f64::consts::PI);
        assert!(g.iter().all(|t| *t < std::f64::consts::PI));
        assert_eq!(g.len(), 4);
    }
}
