//! Power-flow residuals, branch flows and a rectangular Newton refiner.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::{build_ybus, AdmittanceMatrix, BusKind, NetworkCase};
use crate::qcpf::RectState;

/// Magnitudes below this are treated as a grounded bus with no angle.
pub const ZERO_MAGNITUDE: f64 = 1e-9;

/// Polar voltages plus the generation the state implies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarSolution {
    pub v_mag: Vec<f64>,
    /// Radians; `None` where the magnitude is zero.
    pub theta: Vec<Option<f64>>,
    /// Reactive generation at Slack and PV buses.
    pub q_gen: Vec<Option<f64>>,
    pub p_gen_slack: f64,
}

impl PolarSolution {
    /// Voltages and implied generation from a rectangular state.
    pub fn from_rect(case: &NetworkCase, ybus: &AdmittanceMatrix, x: &RectState) -> Self {
        let v = x.voltages();
        let s = ybus.injections(&v);
        let mut q_gen = vec![None; case.n_buses()];
        let mut p_gen_slack = 0.0;
        for (m, bus) in case.buses().iter().enumerate() {
            match bus.kind {
                BusKind::Pq => {}
                BusKind::Pv => q_gen[m] = Some(s[m].im + bus.q_load),
                BusKind::Slack => {
                    q_gen[m] = Some(s[m].im + bus.q_load);
                    p_gen_slack = s[m].re + bus.p_load;
                }
            }
        }
        Self {
            v_mag: v.iter().map(|c| c.norm()).collect(),
            theta: v
                .iter()
                .map(|c| (c.norm() > ZERO_MAGNITUDE).then(|| c.arg()))
                .collect(),
            q_gen,
            p_gen_slack,
        }
    }

    /// Voltages only; generation fields are left empty.
    pub fn from_polar(v_mag: Vec<f64>, theta: Vec<Option<f64>>) -> Self {
        let n = v_mag.len();
        Self {
            v_mag,
            theta,
            q_gen: vec![None; n],
            p_gen_slack: 0.0,
        }
    }

    pub fn n_bus(&self) -> usize {
        self.v_mag.len()
    }

    /// Complex voltages; undefined angles contribute as 0.
    pub fn voltages(&self) -> Vec<Complex64> {
        self.v_mag
            .iter()
            .zip(&self.theta)
            .map(|(&m, t)| Complex64::from_polar(m, t.unwrap_or(0.0)))
            .collect()
    }

    pub fn to_rect(&self) -> RectState {
        RectState::from_voltages(&self.voltages())
    }
}

/// Flow leaving one end of a branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFlow {
    pub branch: usize,
    /// External id of the bus the flow leaves.
    pub from: usize,
    pub to: usize,
    pub p_flow: f64,
    pub q_flow: f64,
}

/// π-model flow from end `m` to end `n`.
///
/// `tap_m` is the turns ratio seen from `m` (the tapped side divides by
/// it squared, the mutual term by it once). With unit tap and no charging
/// this evaluates exactly the textbook expressions
/// `P = (|Vm|² - |Vm||Vn|cos θ) g - |Vm||Vn| b sin θ` and
/// `Q = -|Vm||Vn| g sin θ - (|Vm|² - |Vm||Vn|cos θ) b`.
fn end_flow(vm: f64, vn: f64, theta_mn: f64, g: f64, b: f64, half_charging: f64, self_tap: f64, mutual_tap: f64) -> (f64, f64) {
    let vm2 = vm * vm / (self_tap * self_tap);
    let vmvn = vm * vn / mutual_tap;
    let (s, c) = theta_mn.sin_cos();
    let p = (vm2 - vmvn * c) * g - vmvn * b * s;
    let q = -vmvn * g * s - (vm2 - vmvn * c) * b - vm2 * half_charging;
    (p, q)
}

/// Flows at both ends of every branch: entry `2k` leaves the `from` bus of
/// branch `k`, entry `2k + 1` leaves its `to` bus.
pub fn branch_flows(case: &NetworkCase, sol: &PolarSolution) -> Vec<BranchFlow> {
    assert_eq!(sol.n_bus(), case.n_buses(), "solution dimension mismatch");
    let mut out = Vec::with_capacity(2 * case.branches().len());
    for (k, br) in case.branches().iter().enumerate() {
        let (f, t) = case.branch_ends(k);
        let (vf, vt) = (sol.v_mag[f], sol.v_mag[t]);
        let theta_ft = sol.theta[f].unwrap_or(0.0) - sol.theta[t].unwrap_or(0.0);
        let half = br.charging_b / 2.0;
        let tap = br.tap_ratio;
        let (pf, qf) = end_flow(vf, vt, theta_ft, br.series_g, br.series_b, half, tap, tap);
        let (pt, qt) = end_flow(vt, vf, -theta_ft, br.series_g, br.series_b, half, 1.0, tap);
        out.push(BranchFlow {
            branch: k,
            from: br.from_bus,
            to: br.to_bus,
            p_flow: pf,
            q_flow: qf,
        });
        out.push(BranchFlow {
            branch: k,
            from: br.to_bus,
            to: br.from_bus,
            p_flow: pt,
            q_flow: qt,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceKind {
    Active,
    Reactive,
}

/// Power-balance mismatches `(generation - load) - (shunt + Σ flows)`:
/// active rows for every PV and PQ bus, then reactive rows for every PQ bus.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    /// `(internal bus index, equation)` per entry.
    pub rows: Vec<(usize, BalanceKind)>,
    inf_norm: f64,
}

impl ResidualVector {
    pub fn inf_norm(&self) -> f64 {
        self.inf_norm
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Net power leaving each bus through branches, plus shunt consumption.
fn bus_withdrawals(case: &NetworkCase, sol: &PolarSolution) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = case
        .buses()
        .iter()
        .zip(&sol.v_mag)
        .map(|(bus, &v)| (v * v * bus.g_shunt, -v * v * bus.b_shunt))
        .collect();
    for flow in branch_flows(case, sol) {
        let m = case.index_of(flow.from).unwrap();
        out[m].0 += flow.p_flow;
        out[m].1 += flow.q_flow;
    }
    out
}

pub fn residuals(case: &NetworkCase, sol: &PolarSolution) -> ResidualVector {
    let withdrawn = bus_withdrawals(case, sol);
    let mut values = Vec::new();
    let mut rows = Vec::new();
    for (m, bus) in case.buses().iter().enumerate() {
        if bus.kind != BusKind::Slack {
            values.push(bus.p_net() - withdrawn[m].0);
            rows.push((m, BalanceKind::Active));
        }
    }
    for (m, bus) in case.buses().iter().enumerate() {
        if bus.kind == BusKind::Pq {
            values.push(-bus.q_load - withdrawn[m].1);
            rows.push((m, BalanceKind::Reactive));
        }
    }
    let inf_norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    ResidualVector {
        values,
        rows,
        inf_norm,
    }
}

// ---------------------------------------------------------------------------
// Newton refinement in rectangular coordinates

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-10,
            max_halvings: 10,
        }
    }
}

/// A bus held at a fixed complex voltage during refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pin {
    pub bus: usize,
    pub value: Complex64,
}

impl Pin {
    pub fn grounded(bus: usize) -> Self {
        Self {
            bus,
            value: Complex64::new(0.0, 0.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: RectState,
    pub solution: PolarSolution,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum NewtonFailure {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        last: RectState,
        iterations: usize,
        residual: f64,
    },
    #[error("singular Jacobian after {iterations} iterations")]
    Singular { last: RectState, iterations: usize },
    #[error("guess contains non-finite entries")]
    NonFinite,
}

/// Square rectangular power-flow system with pinned buses removed.
pub struct RectSystem<'a> {
    case: &'a NetworkCase,
    ybus: AdmittanceMatrix,
    /// Internal indices of unpinned buses; unknowns are `[e(free); f(free)]`.
    free: Vec<usize>,
    pins: Vec<Pin>,
}

impl<'a> RectSystem<'a> {
    /// The slack bus is always pinned at its setpoint.
    pub fn new(case: &'a NetworkCase, extra_pins: &[Pin]) -> Self {
        let slack = case.slack_index();
        let sb = &case.buses()[slack];
        let mut pins = vec![Pin {
            bus: slack,
            value: Complex64::from_polar(sb.v_set.unwrap(), sb.theta_set.unwrap()),
        }];
        pins.extend(extra_pins.iter().filter(|p| p.bus != slack).copied());
        let free = (0..case.n_buses())
            .filter(|m| pins.iter().all(|p| p.bus != *m))
            .collect();
        Self {
            case,
            ybus: build_ybus(case),
            free,
            pins,
        }
    }

    pub fn n_unknowns(&self) -> usize {
        2 * self.free.len()
    }

    pub fn ybus(&self) -> &AdmittanceMatrix {
        &self.ybus
    }

    pub fn free_buses(&self) -> &[usize] {
        &self.free
    }

    /// Full state with pins applied and unknowns taken from `z`.
    pub fn assemble(&self, z: &[f64]) -> RectState {
        let mut x = RectState::zeros(self.case.n_buses());
        for p in &self.pins {
            x.set(p.bus, p.value);
        }
        let k = self.free.len();
        for (i, &m) in self.free.iter().enumerate() {
            x.set(m, Complex64::new(z[i], z[k + i]));
        }
        x
    }

    pub fn unknowns(&self, x: &RectState) -> Vec<f64> {
        let mut z: Vec<f64> = self.free.iter().map(|&m| x.e(m)).collect();
        z.extend(self.free.iter().map(|&m| x.f(m)));
        z
    }

    /// Residual `F(z)`: injections minus schedule, and `|V|² - v_set²` for PV rows.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let v = self.assemble(z).voltages();
        let s = self.ybus.injections(&v);
        let mut out = Vec::with_capacity(self.n_unknowns());
        for &m in &self.free {
            out.push(s[m].re - self.case.buses()[m].p_net());
        }
        for &m in &self.free {
            let bus = &self.case.buses()[m];
            match bus.kind {
                BusKind::Pv => {
                    let vs = bus.v_set.unwrap();
                    out.push(v[m].norm_sqr() - vs * vs);
                }
                _ => out.push(s[m].im + bus.q_load),
            }
        }
        out
    }

    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let v = self.assemble(z).voltages();
        let current = self.ybus.currents(&v);
        let k = self.free.len();
        let mut jac = DMatrix::zeros(2 * k, 2 * k);
        for (col, &b) in self.free.iter().enumerate() {
            for (dir, d) in [(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.0, 1.0))] {
                let c = col + dir * k;
                for (row, &m) in self.free.iter().enumerate() {
                    // δS_m = [m == b] d conj(I_m) + V_m conj(Y_mb d)
                    let mut ds = v[m] * (self.ybus.get(m, b) * d).conj();
                    if m == b {
                        ds += d * current[m].conj();
                    }
                    jac[(row, c)] = ds.re;
                    let bus = &self.case.buses()[m];
                    jac[(k + row, c)] = if bus.kind == BusKind::Pv {
                        if m == b {
                            2.0 * if dir == 0 { v[m].re } else { v[m].im }
                        } else {
                            0.0
                        }
                    } else {
                        ds.im
                    };
                }
            }
        }
        jac
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Newton's method on the rectangular power-flow equations.
///
/// The slack bus and every entry of `pins` are held fixed. On success the
/// returned state satisfies `‖F‖∞ < opts.tol`.
pub fn newton_refine(
    case: &NetworkCase,
    guess: &RectState,
    pins: &[Pin],
    opts: NewtonOptions,
) -> Result<NewtonOutcome, NewtonFailure> {
    if !guess.as_slice().iter().all(|v| v.is_finite()) {
        return Err(NewtonFailure::NonFinite);
    }
    let sys = RectSystem::new(case, pins);
    let mut z = sys.unknowns(guess);
    let mut f = sys.residual(&z);
    let mut norm = inf_norm(&f);
    let mut iterations = 0;
    while norm >= opts.tol {
        if iterations == opts.max_iter || !norm.is_finite() {
            return Err(NewtonFailure::NotConverged {
                last: sys.assemble(&z),
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let jac = sys.jacobian(&z);
        let scale = jac.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lu = jac.lu();
        let pivot_min = lu.u().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let step = match lu.solve(&DVector::from_column_slice(&f)) {
            Some(s) if pivot_min > 1e-13 * scale.max(1.0) => s,
            _ => {
                return Err(NewtonFailure::Singular {
                    last: sys.assemble(&z),
                    iterations,
                })
            }
        };
        let mut alpha = 1.0;
        let mut trial: Vec<f64>;
        let mut trial_f: Vec<f64>;
        let mut halvings = 0;
        loop {
            trial = z.iter().zip(step.iter()).map(|(a, s)| a - alpha * s).collect();
            trial_f = sys.residual(&trial);
            let trial_norm = inf_norm(&trial_f);
            if trial_norm < norm || halvings == opts.max_halvings {
                break;
            }
            alpha *= 0.5;
            halvings += 1;
        }
        z = trial;
        f = trial_f;
        norm = inf_norm(&f);
    }
    let state = sys.assemble(&z);
    Ok(NewtonOutcome {
        solution: PolarSolution::from_rect(case, sys.ybus(), &state),
        state,
        iterations,
        residual: norm,
    })
}

/// Flat start: setpoint magnitudes at PV/Slack buses, 1.0 elsewhere, zero angles
/// (slack keeps its angle).
pub fn flat_start(case: &NetworkCase) -> RectState {
    let v: Vec<Complex64> = case
        .buses()
        .iter()
        .map(|b| Complex64::from_polar(b.v_set.unwrap_or(1.0), b.theta_set.unwrap_or(0.0)))
        .collect();
    RectState::from_voltages(&v)
}
