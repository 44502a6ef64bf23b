//! Rectangular-coordinate quadratic program for power flow.
//!
//! The state is `x = [e_1..e_N, f_1..f_N]` with `V_m = e_m + j f_m`. Every
//! bus power injection is a homogeneous quadratic form `xᵀ Z x = tr(x xᵀ Z)`,
//! so each power-flow equation becomes one constraint `tr(X Z_k) = c_k`
//! with `X = x xᵀ`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{build_ybus, AdmittanceMatrix, BusKind, NetworkCase};

#[derive(Debug, Error)]
pub enum QcpfError {
    #[error("vmax = {vmax} must exceed every voltage setpoint (largest is {largest})")]
    BoxTooSmall { vmax: f64, largest: f64 },
}

/// Rectangular voltage state `[e; f]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RectState {
    x: Vec<f64>,
}

impl RectState {
    pub fn new(x: Vec<f64>) -> Self {
        assert!(x.len() % 2 == 0, "rectangular state has even length");
        Self { x }
    }

    pub fn zeros(n_bus: usize) -> Self {
        Self::new(vec![0.0; 2 * n_bus])
    }

    pub fn from_voltages(v: &[Complex64]) -> Self {
        let mut x: Vec<f64> = v.iter().map(|c| c.re).collect();
        x.extend(v.iter().map(|c| c.im));
        Self { x }
    }

    pub fn from_polar(v_mag: &[f64], theta: &[f64]) -> Self {
        let v: Vec<Complex64> = v_mag
            .iter()
            .zip(theta)
            .map(|(&m, &t)| Complex64::from_polar(m, t))
            .collect();
        Self::from_voltages(&v)
    }

    pub fn n_bus(&self) -> usize {
        self.x.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }

    pub fn e(&self, m: usize) -> f64 {
        self.x[m]
    }

    pub fn f(&self, m: usize) -> f64 {
        self.x[self.n_bus() + m]
    }

    pub fn set(&mut self, m: usize, v: Complex64) {
        let n = self.n_bus();
        self.x[m] = v.re;
        self.x[n + m] = v.im;
    }

    pub fn voltage(&self, m: usize) -> Complex64 {
        Complex64::new(self.e(m), self.f(m))
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.n_bus()).map(|m| self.voltage(m)).collect()
    }

    pub fn magnitude(&self, m: usize) -> f64 {
        self.e(m).hypot(self.f(m))
    }

    pub fn dist_inf(&self, other: &RectState) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Interval box `lower <= x <= upper` over the rectangular state.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_consistent(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    /// Product of the widths of the coordinates that are not pinned.
    pub fn volume(&self) -> f64 {
        (0..self.dim())
            .filter(|&i| !self.is_pinned(i))
            .map(|i| self.width(i))
            .product()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Split along coordinate `i` at `at`; the two halves share the face.
    pub fn split(&self, i: usize, at: f64) -> (BoxBounds, BoxBounds) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[i] = at;
        right.lower[i] = at;
        (left, right)
    }

    /// Intersection, or `None` if empty.
    pub fn intersect(&self, other: &BoxBounds) -> Option<BoxBounds> {
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).map(|(a, b)| a.min(*b)).collect();
        let out = BoxBounds::new(lower, upper);
        out.is_consistent().then_some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// Active power balance of a PV or PQ bus.
    ActiveBalance,
    /// Reactive power balance of a PQ bus.
    ReactiveBalance,
    /// `e² + f² = v_set²` at a PV bus.
    PvMagnitude,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintKind::ActiveBalance => "P",
            ConstraintKind::ReactiveBalance => "Q",
            ConstraintKind::PvMagnitude => "V",
        }
    }
}

/// One `tr(X Z) = c` row.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticConstraint {
    pub z: DMatrix<f64>,
    pub c: f64,
    pub kind: ConstraintKind,
    /// Internal bus index the row belongs to.
    pub bus: usize,
    upper: Vec<(usize, usize, f64)>,
}

impl QuadraticConstraint {
    pub fn new(z: DMatrix<f64>, c: f64, kind: ConstraintKind, bus: usize) -> Self {
        let n = z.nrows();
        let mut upper = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = z[(i, j)];
                if v != 0.0 {
                    upper.push((i, j, v));
                }
            }
        }
        Self {
            z,
            c,
            kind,
            bus,
            upper,
        }
    }

    /// Nonzeros `(i, j, Z_ij)` with `i <= j`.
    pub fn upper_entries(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    /// `xᵀ Z x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        self.upper
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    v * x[i] * x[i]
                } else {
                    2.0 * v * x[i] * x[j]
                }
            })
            .sum()
    }
}

/// Static description of the quadratic power-flow program.
#[derive(Clone, Debug)]
pub struct QcpfProblem {
    pub constraints: Vec<QuadraticConstraint>,
    pub bounds: BoxBounds,
    pub n_state: usize,
    pub slack: usize,
}

/// Default voltage cap: 20% above the largest setpoint (at least 1.0).
pub fn default_vmax(case: &NetworkCase) -> f64 {
    let largest = case
        .buses()
        .iter()
        .filter_map(|b| b.v_set)
        .fold(1.0, f64::max);
    1.2 * largest
}

/// Real symmetric embedding of a Hermitian form: `V^H H V = xᵀ [[A, -B], [B, A]] x`.
fn hermitian_to_real(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let a = h[(i, j)].re;
            let b = h[(i, j)].im;
            z[(i, j)] = a;
            z[(n + i, n + j)] = a;
            z[(i, n + j)] = -b;
            z[(n + i, j)] = b;
        }
    }
    // exact symmetry, not just up to rounding
    for i in 0..2 * n {
        for j in 0..i {
            let avg = 0.5 * (z[(i, j)] + z[(j, i)]);
            z[(i, j)] = avg;
            z[(j, i)] = avg;
        }
    }
    z
}

/// Quadratic forms of bus `m`'s active and reactive injections.
pub fn injection_forms(y: &AdmittanceMatrix, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = y.dim();
    // A = E_m Y keeps only row m of Y.
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for k in 0..n {
        a[(m, k)] = y.get(m, k);
    }
    let ah = a.adjoint();
    let p = (&a + &ah).map(|v| v * 0.5);
    let q = (&ah - &a).map(|v| v / Complex64::new(0.0, 2.0));
    (hermitian_to_real(&p), hermitian_to_real(&q))
}

pub fn build_qcpf(case: &NetworkCase, vmax: f64) -> Result<QcpfProblem, QcpfError> {
    let largest = case
        .buses()
        .iter()
        .filter(|b| b.kind == BusKind::Pv)
        .filter_map(|b| b.v_set)
        .fold(0.0, f64::max);
    if !(vmax > largest) {
        return Err(QcpfError::BoxTooSmall { vmax, largest });
    }
    let n = case.n_buses();
    let y = build_ybus(case);
    let mut active = Vec::new();
    let mut reactive = Vec::new();
    let mut magnitude = Vec::new();
    for (m, bus) in case.buses().iter().enumerate() {
        if bus.kind == BusKind::Slack {
            continue;
        }
        let (zp, zq) = injection_forms(&y, m);
        active.push(QuadraticConstraint::new(zp, bus.p_net(), ConstraintKind::ActiveBalance, m));
        match bus.kind {
            BusKind::Pq => reactive.push(QuadraticConstraint::new(
                zq,
                -bus.q_load,
                ConstraintKind::ReactiveBalance,
                m,
            )),
            _ => {
                let mut z = DMatrix::zeros(2 * n, 2 * n);
                z[(m, m)] = 1.0;
                z[(n + m, n + m)] = 1.0;
                let v = bus.v_set.expect("PV bus has a setpoint");
                magnitude.push(QuadraticConstraint::new(z, v * v, ConstraintKind::PvMagnitude, m));
            }
        }
    }
    let mut constraints = active;
    constraints.extend(reactive);
    constraints.extend(magnitude);

    let slack = case.slack_index();
    let mut lower = vec![-vmax; 2 * n];
    let mut upper = vec![vmax; 2 * n];
    let sb = &case.buses()[slack];
    let vs = Complex64::from_polar(sb.v_set.unwrap(), sb.theta_set.unwrap());
    lower[slack] = vs.re;
    upper[slack] = vs.re;
    lower[n + slack] = vs.im;
    upper[n + slack] = vs.im;

    Ok(QcpfProblem {
        constraints,
        bounds: BoxBounds::new(lower, upper),
        n_state: 2 * n,
        slack,
    })
}

/// Per-constraint violations `|tr(x xᵀ Z_k) - c_k|` and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub per_constraint: Vec<f64>,
    pub total: f64,
    pub out_of_box: bool,
}

pub fn eval_violation(problem: &QcpfProblem, x: &RectState) -> Violation {
    let xs = x.as_slice();
    let per_constraint: Vec<f64> = problem
        .constraints
        .iter()
        .map(|k| (k.quad(xs) - k.c).abs())
        .collect();
    Violation {
        total: per_constraint.iter().sum(),
        out_of_box: !problem.bounds.contains(xs, 0.0),
        per_constraint,
    }
}

impl QcpfProblem {
    /// Sparse-triplet text dump of all `(Z_k, c_k)`.
    ///
    /// ```text
    /// qcpf <n_state> <n_constraints>
    /// c <k> <P|Q|V> <bus index> <c_k>
    /// z <k> <i> <j> <Z_k[i,j]>        (upper triangle, i <= j, 0-based)
    /// ```
    ///
    /// Values use Rust's shortest round-trip float formatting.
    pub fn to_triplets(&self) -> String {
        let mut out = format!("qcpf {} {}\n", self.n_state, self.constraints.len());
        for (k, row) in self.constraints.iter().enumerate() {
            writeln!(out, "c {k} {} {} {:?}", row.kind.label(), row.bus, row.c).unwrap();
            for &(i, j, v) in row.upper_entries() {
                writeln!(out, "z {k} {i} {j} {v:?}").unwrap();
            }
        }
        out
    }
}
