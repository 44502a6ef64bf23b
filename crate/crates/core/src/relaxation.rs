//! SDP relaxation of the quadratic power-flow program.
//!
//! `X = x xᵀ` is replaced by a positive semidefinite matrix (by default the
//! bordered matrix `[1 xᵀ; x X] ⪰ 0`) together with the RLT envelope of the
//! current box:
//!
//! ```text
//! l xᵀ + x lᵀ - l lᵀ <= X
//! u xᵀ + x uᵀ - u uᵀ <= X
//! X <= x uᵀ + l xᵀ - l uᵀ
//! ```
//!
//! All three are elementwise. The first two are symmetric, so one row per
//! `i <= j`; the third is not, so it contributes a row for every ordered
//! pair `(i, j)`. Coordinates pinned by the box (`l_i = u_i`, e.g. the slack
//! bus) are eliminated by default: `X_ij = x_i x_j` is substituted exactly.

use std::fmt::Write as _;
use std::panic::AssertUnwindSafe;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::qcpf::{BoxBounds, QcpfProblem, RectState};

/// Which matrix carries the semidefinite constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lift {
    /// `[1 xᵀ; x X] ⪰ 0`.
    Bordered,
    /// `X ⪰ 0` only.
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationOptions {
    pub lift: Lift,
    /// Substitute pinned coordinates instead of carrying them as variables.
    pub eliminate_pinned: bool,
    /// Relative gap / feasibility tolerance handed to the conic solver.
    pub solver_tol: f64,
    pub max_iter: u32,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            lift: Lift::Bordered,
            eliminate_pinned: true,
            solver_tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Objective of the conic program.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// `Σ (s⁺ + s⁻)`.
    SlackSum,
    /// `± x_i` subject to `Σ (s⁺ + s⁻) <= eps`; `sign = 1.0` minimizes.
    Coordinate { coord: usize, sign: f64, eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowTag {
    /// `tr(X Z_k) + s⁺ - s⁻ = c_k`.
    Balance,
    /// `[1 xᵀ; x X]_00 = 1` is implicit; kept for completeness of the count.
    RltLower,
    RltUpper,
    RltMixed,
    Box,
    SlackSign,
    SlackBudget,
}

/// Sparse linear row `a·v (= or <=) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub tag: RowTag,
}

/// Index bookkeeping of the variable vector `[x_c; svec(X_c); s⁺; s⁻]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarLayout {
    /// State coordinates that are variables, ascending.
    pub coords: Vec<usize>,
    /// Position of each state coordinate in `coords`, if it is a variable.
    pub position: Vec<Option<usize>>,
    pub n_slack_pairs: usize,
}

impl VarLayout {
    pub fn n_x(&self) -> usize {
        self.coords.len()
    }

    pub fn n_xmat(&self) -> usize {
        let n = self.n_x();
        n * (n + 1) / 2
    }

    pub fn n_vars(&self) -> usize {
        self.n_x() + self.n_xmat() + 2 * self.n_slack_pairs
    }

    pub fn x(&self, i: usize) -> usize {
        i
    }

    /// Variable index of `X_ij` (positions into `coords`), symmetric.
    pub fn xmat(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.n_x() + j * (j + 1) / 2 + i
    }

    pub fn s_plus(&self, k: usize) -> usize {
        self.n_x() + self.n_xmat() + k
    }

    pub fn s_minus(&self, k: usize) -> usize {
        self.n_x() + self.n_xmat() + self.n_slack_pairs + k
    }
}

/// One entry of the semidefinite matrix: constant plus at most one variable term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdEntry {
    pub row: usize,
    pub col: usize,
    pub constant: f64,
    pub var: Option<(usize, f64)>,
}

/// Standard-form conic program:
/// minimize `cᵀv` s.t. equality rows, `<=` rows, and `mat(entries) ⪰ 0`.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    pub n_state: usize,
    pub layout: VarLayout,
    /// Values of the eliminated (pinned) coordinates.
    pub fixed: Vec<(usize, f64)>,
    pub objective: Vec<(usize, f64)>,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
    pub psd_dim: usize,
    /// Upper triangle of the semidefinite matrix, column-major.
    pub psd: Vec<PsdEntry>,
    pub lift: Lift,
}

impl ConicProgram {
    pub fn count(&self, tag: RowTag) -> usize {
        self.equalities
            .iter()
            .chain(&self.inequalities)
            .filter(|r| r.tag == tag)
            .count()
    }

    pub fn rlt_rows(&self) -> usize {
        self.count(RowTag::RltLower) + self.count(RowTag::RltUpper) + self.count(RowTag::RltMixed)
    }

    /// Text dump for cross-checking with an external solver.
    ///
    /// ```text
    /// conic <n_vars> <n_eq> <n_ineq> <psd_dim>
    /// c <var> <coef>                      objective terms
    /// eq <row> <rhs> <var>:<coef> ...     equality rows
    /// le <row> <rhs> <var>:<coef> ...     `<=` rows
    /// psd <r> <c> <const> [<var>:<coef>]  upper-triangle entries, 0-based
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "conic {} {} {} {}\n",
            self.layout.n_vars(),
            self.equalities.len(),
            self.inequalities.len(),
            self.psd_dim
        );
        for &(j, c) in &self.objective {
            writeln!(out, "c {j} {c:?}").unwrap();
        }
        for (name, rows) in [("eq", &self.equalities), ("le", &self.inequalities)] {
            for (r, row) in rows.iter().enumerate() {
                write!(out, "{name} {r} {:?}", row.rhs).unwrap();
                for &(j, a) in &row.coeffs {
                    write!(out, " {j}:{a:?}").unwrap();
                }
                out.push('\n');
            }
        }
        for e in &self.psd {
            write!(out, "psd {} {} {:?}", e.row, e.col, e.constant).unwrap();
            if let Some((j, a)) = e.var {
                write!(out, " {j}:{a:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Accumulates `a·v` terms, merging duplicates.
#[derive(Default)]
struct RowBuilder {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl RowBuilder {
    fn add(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }

    fn finish(mut self, rhs: f64, tag: RowTag) -> LinearRow {
        self.terms.sort_by_key(|t| t.0);
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (j, a) in self.terms {
            match coeffs.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => coeffs.push((j, a)),
            }
        }
        coeffs.retain(|t| t.1 != 0.0);
        LinearRow {
            coeffs,
            rhs: rhs - self.constant,
            tag,
        }
    }
}

/// Relaxation over `bounds` with the slack-sum objective.
pub fn build_relaxation(problem: &QcpfProblem, bounds: &BoxBounds, opts: &RelaxationOptions) -> ConicProgram {
    build_program(problem, bounds, opts, Objective::SlackSum)
}

pub fn build_program(
    problem: &QcpfProblem,
    bounds: &BoxBounds,
    opts: &RelaxationOptions,
    objective: Objective,
) -> ConicProgram {
    assert_eq!(bounds.dim(), problem.n_state);
    assert!(bounds.is_consistent(), "inconsistent box");
    let n_state = problem.n_state;
    let mut position = vec![None; n_state];
    let mut coords = Vec::new();
    let mut fixed = Vec::new();
    for i in 0..n_state {
        if opts.eliminate_pinned && bounds.is_pinned(i) {
            fixed.push((i, bounds.lower[i]));
        } else {
            position[i] = Some(coords.len());
            coords.push(i);
        }
    }
    let fixed_value: Vec<Option<f64>> = {
        let mut v = vec![None; n_state];
        for &(i, x) in &fixed {
            v[i] = Some(x);
        }
        v
    };
    let k_rows = problem.constraints.len();
    let layout = VarLayout {
        coords,
        position,
        n_slack_pairs: k_rows,
    };
    let n = layout.n_x();
    let l: Vec<f64> = layout.coords.iter().map(|&i| bounds.lower[i]).collect();
    let u: Vec<f64> = layout.coords.iter().map(|&i| bounds.upper[i]).collect();

    // tr(X Z_k) + s⁺ - s⁻ = c_k
    let mut equalities = Vec::with_capacity(k_rows);
    for (k, row) in problem.constraints.iter().enumerate() {
        let mut b = RowBuilder::default();
        for &(i, j, z) in row.upper_entries() {
            let mult = if i == j { 1.0 } else { 2.0 };
            match (layout.position[i], layout.position[j]) {
                (Some(pi), Some(pj)) => b.add(layout.xmat(pi, pj), mult * z),
                (Some(p), None) => b.add(layout.x(p), mult * z * fixed_value[j].unwrap()),
                (None, Some(p)) => b.add(layout.x(p), mult * z * fixed_value[i].unwrap()),
                (None, None) => {
                    b.constant += mult * z * fixed_value[i].unwrap() * fixed_value[j].unwrap()
                }
            }
        }
        b.add(layout.s_plus(k), 1.0);
        b.add(layout.s_minus(k), -1.0);
        equalities.push(b.finish(row.c, RowTag::Balance));
    }

    let mut inequalities = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            // X_ij >= l_i x_j + x_i l_j - l_i l_j
            for (bound, tag) in [(&l, RowTag::RltLower), (&u, RowTag::RltUpper)] {
                let mut b = RowBuilder::default();
                b.add(layout.xmat(i, j), -1.0);
                b.add(layout.x(j), bound[i]);
                b.add(layout.x(i), bound[j]);
                inequalities.push(b.finish(bound[i] * bound[j], tag));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            // X_ij <= x_i u_j + l_i x_j - l_i u_j
            let mut b = RowBuilder::default();
            b.add(layout.xmat(i, j), 1.0);
            b.add(layout.x(i), -u[j]);
            b.add(layout.x(j), -l[i]);
            inequalities.push(b.finish(-l[i] * u[j], RowTag::RltMixed));
        }
    }
    for i in 0..n {
        let mut up = RowBuilder::default();
        up.add(layout.x(i), 1.0);
        inequalities.push(up.finish(u[i], RowTag::Box));
        let mut lo = RowBuilder::default();
        lo.add(layout.x(i), -1.0);
        inequalities.push(lo.finish(-l[i], RowTag::Box));
    }
    let mut budget = RowBuilder::default();
    for k in 0..k_rows {
        for var in [layout.s_plus(k), layout.s_minus(k)] {
            let mut b = RowBuilder::default();
            b.add(var, -1.0);
            inequalities.push(b.finish(0.0, RowTag::SlackSign));
            budget.add(var, 1.0);
        }
    }

    let objective = match objective {
        Objective::SlackSum => (0..k_rows)
            .flat_map(|k| [(layout.s_plus(k), 1.0), (layout.s_minus(k), 1.0)])
            .collect(),
        Objective::Coordinate { coord, sign, eps } => {
            inequalities.push(budget.finish(eps, RowTag::SlackBudget));
            match layout.position[coord] {
                Some(p) => vec![(layout.x(p), sign)],
                None => Vec::new(),
            }
        }
    };

    let (psd_dim, offset) = match opts.lift {
        Lift::Bordered => (n + 1, 1),
        Lift::Plain => (n, 0),
    };
    let mut psd = Vec::with_capacity(psd_dim * (psd_dim + 1) / 2);
    for col in 0..psd_dim {
        for row in 0..=col {
            let entry = if offset == 1 && row == 0 && col == 0 {
                PsdEntry { row, col, constant: 1.0, var: None }
            } else if offset == 1 && row == 0 {
                PsdEntry { row, col, constant: 0.0, var: Some((layout.x(col - 1), 1.0)) }
            } else {
                PsdEntry {
                    row,
                    col,
                    constant: 0.0,
                    var: Some((layout.xmat(row - offset, col - offset), 1.0)),
                }
            };
            psd.push(entry);
        }
    }

    ConicProgram {
        n_state,
        layout,
        fixed,
        objective,
        equalities,
        inequalities,
        psd_dim,
        psd,
        lift: opts.lift,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Solved,
    /// Converged to reduced accuracy.
    AlmostSolved,
    Infeasible,
    Failed(String),
}

impl SolveStatus {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveStatus::Solved)
    }
}

#[derive(Clone, Debug)]
pub struct RelaxationResult {
    /// Full-length state (pinned coordinates filled in).
    pub x_opt: Vec<f64>,
    /// Full `n_state × n_state` lifted matrix.
    pub x_mat: DMatrix<f64>,
    /// Objective value; clamped at 0 for the slack-sum objective.
    pub s_cvx: f64,
    /// Dual objective; a lower bound on the optimum up to dual feasibility.
    pub dual_bound: f64,
    /// Slack sum `Σ(s⁺ + s⁻)` at the returned point.
    pub slack_sum: f64,
    /// `λ₂ / λ₁` of `x_mat`.
    pub eig_ratio: f64,
    /// Leading eigenvector of `x_mat` scaled by `√λ₁`, signed to agree with `x_opt`.
    pub extraction: RectState,
    pub status: SolveStatus,
    pub iterations: u32,
}

impl RelaxationResult {
    /// Whether the box can be declared solution-free at threshold `eps`.
    /// A reduced-accuracy solve counts only when both objectives clear the
    /// threshold by a factor of a thousand.
    pub fn proves_positive(&self, eps: f64) -> bool {
        match self.status {
            SolveStatus::Solved => self.s_cvx > eps,
            SolveStatus::AlmostSolved => self.s_cvx.min(self.dual_bound) > 1e3 * eps,
            SolveStatus::Infeasible => true,
            SolveStatus::Failed(_) => false,
        }
    }

    /// `X_ii - x_i²`, how far coordinate `i` is from rank one.
    pub fn diagonal_gap(&self, i: usize) -> f64 {
        (self.x_mat[(i, i)] - self.x_opt[i] * self.x_opt[i]).max(0.0)
    }
}

fn to_clarabel(program: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n_vars = program.layout.n_vars();
    let mut q = vec![0.0; n_vars];
    for &(j, c) in &program.objective {
        q[j] += c;
    }
    // Rows: equalities, inequalities, then the PSD triangle. Clarabel takes
    // A v + s = b with s in the cone, so the PSD slack is
    // s = svec(F0) - A v with A = -svec(F_j).
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();
    let mut r = 0;
    for row in program.equalities.iter().chain(&program.inequalities) {
        for &(j, a) in &row.coeffs {
            triplets.push((r, j, a));
        }
        b.push(row.rhs);
        r += 1;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for e in &program.psd {
        let scale = if e.row == e.col { 1.0 } else { sqrt2 };
        if let Some((j, a)) = e.var {
            triplets.push((r, j, -scale * a));
        }
        b.push(scale * e.constant);
        r += 1;
    }
    let a = csc_from_triplets(r, n_vars, triplets);
    let cones = vec![
        SupportedConeT::ZeroConeT(program.equalities.len()),
        SupportedConeT::NonnegativeConeT(program.inequalities.len()),
        SupportedConeT::PSDTriangleConeT(program.psd_dim),
    ];
    let cones = cones
        .into_iter()
        .filter(|c| match c {
            SupportedConeT::ZeroConeT(0) | SupportedConeT::NonnegativeConeT(0) => false,
            _ => true,
        })
        .collect();
    (a, q, b, cones)
}

fn csc_from_triplets(m: usize, n: usize, mut t: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    t.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(t.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (i, j, v) in t {
        if last == Some((i, j)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(i);
        nzval.push(v);
        colptr[j + 1] += 1;
        last = Some((i, j));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

pub fn solve_relaxation(program: &ConicProgram, opts: &RelaxationOptions) -> RelaxationResult {
    let (a, q, b, cones) = to_clarabel(program);
    let n_vars = program.layout.n_vars();
    let p = CscMatrix::zeros((n_vars, n_vars));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.solver_tol)
        .tol_gap_rel(opts.solver_tol)
        .tol_feas(opts.solver_tol)
        .build()
        .expect("valid solver settings");
    // the PSD cone's eigen-decomposition can panic on badly scaled iterates
    let run = std::panic::catch_unwind(AssertUnwindSafe(|| match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(mut solver) => {
            solver.solve();
            let status = match solver.solution.status {
                SolverStatus::Solved => SolveStatus::Solved,
                SolverStatus::AlmostSolved => SolveStatus::AlmostSolved,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    SolveStatus::Infeasible
                }
                other => SolveStatus::Failed(format!("{other:?}")),
            };
            (
                status,
                solver.solution.x.clone(),
                solver.solution.iterations,
                solver.solution.obj_val,
                solver.solution.obj_val_dual,
            )
        }
        Err(e) => (SolveStatus::Failed(format!("{e:?}")), vec![0.0; n_vars], 0, f64::NAN, f64::NAN),
    }));
    let (status, v, iterations, obj, dual) = run.unwrap_or_else(|_| {
        (SolveStatus::Failed("solver panicked".into()), vec![0.0; n_vars], 0, f64::NAN, f64::NAN)
    });
    assemble_result(program, &v, status, iterations, obj, dual)
}

fn assemble_result(
    program: &ConicProgram,
    v: &[f64],
    status: SolveStatus,
    iterations: u32,
    obj: f64,
    dual_bound: f64,
) -> RelaxationResult {
    let layout = &program.layout;
    let n_state = program.n_state;
    let mut x_opt = vec![0.0; n_state];
    for &(i, val) in &program.fixed {
        x_opt[i] = val;
    }
    for (p, &i) in layout.coords.iter().enumerate() {
        x_opt[i] = v[layout.x(p)];
    }
    let mut x_mat = DMatrix::zeros(n_state, n_state);
    for i in 0..n_state {
        for j in 0..n_state {
            x_mat[(i, j)] = match (layout.position[i], layout.position[j]) {
                (Some(pi), Some(pj)) => v[layout.xmat(pi, pj)],
                _ => x_opt[i] * x_opt[j],
            };
        }
    }
    let slack_sum: f64 = (0..layout.n_slack_pairs)
        .map(|k| v[layout.s_plus(k)].max(0.0) + v[layout.s_minus(k)].max(0.0))
        .sum();
    let eig = SymmetricEigen::new(x_mat.clone());
    let mut order: Vec<usize> = (0..n_state).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    let l2 = if n_state > 1 { eig.eigenvalues[order[1]] } else { 0.0 };
    let eig_ratio = if l1 > 0.0 { l2.max(0.0) / l1 } else { 1.0 };
    let lead = eig.eigenvectors.column(order[0]);
    let scale = l1.max(0.0).sqrt();
    let dot: f64 = lead.iter().zip(&x_opt).map(|(a, b)| a * b).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    let extraction = RectState::new(lead.iter().map(|c| sign * scale * c).collect());
    let s_cvx = if program.objective.len() == 2 * layout.n_slack_pairs && layout.n_slack_pairs > 0 {
        obj.max(0.0)
    } else {
        obj
    };
    RelaxationResult {
        x_opt,
        x_mat,
        s_cvx,
        dual_bound,
        slack_sum,
        eig_ratio,
        extraction,
        status,
        iterations,
    }
}

/// Outcome of one bound-tightening pass.
#[derive(Clone, Debug)]
pub struct ObbtOutcome {
    pub bounds: BoxBounds,
    /// Conic solves performed.
    pub solves: usize,
    /// Subproblems reported infeasible (no relaxed point with `S <= eps`).
    pub infeasible: usize,
    /// Subproblems that failed numerically; their bounds were kept.
    pub failed: usize,
}

/// Margin subtracted from each tightened bound to absorb solver error.
pub const OBBT_MARGIN: f64 = 1e-6;

/// One optimality-based bound-tightening pass over every unpinned coordinate.
///
/// Each coordinate is minimized and maximized over the relaxation of `bounds`
/// restricted to `Σ(s⁺ + s⁻) <= eps`. All subproblems see the same input box,
/// so they run in parallel and the result does not depend on scheduling.
pub fn obbt_tighten(
    problem: &QcpfProblem,
    bounds: &BoxBounds,
    eps: f64,
    opts: &RelaxationOptions,
) -> ObbtOutcome {
    let jobs: Vec<(usize, f64)> = (0..bounds.dim())
        .filter(|&i| !bounds.is_pinned(i))
        .flat_map(|i| [(i, 1.0), (i, -1.0)])
        .collect();
    let results: Vec<(usize, f64, RelaxationResult)> = jobs
        .par_iter()
        .map(|&(coord, sign)| {
            let program = build_program(problem, bounds, opts, Objective::Coordinate { coord, sign, eps });
            (coord, sign, solve_relaxation(&program, opts))
        })
        .collect();
    let mut out = bounds.clone();
    let mut infeasible = 0;
    let mut failed = 0;
    for (coord, sign, r) in &results {
        match r.status {
            SolveStatus::Solved => {
                let value = r.x_opt[*coord];
                if *sign > 0.0 {
                    out.lower[*coord] = out.lower[*coord].max(value - OBBT_MARGIN);
                } else {
                    out.upper[*coord] = out.upper[*coord].min(value + OBBT_MARGIN);
                }
            }
            SolveStatus::Infeasible => infeasible += 1,
            _ => failed += 1,
        }
    }
    for i in 0..out.dim() {
        if out.lower[i] > out.upper[i] {
            // Crossed bounds come from the margins on a nearly pinned coordinate.
            let mid = 0.5 * (out.lower[i] + out.upper[i]);
            out.lower[i] = mid.max(bounds.lower[i]);
            out.upper[i] = mid.min(bounds.upper[i]);
        }
    }
    ObbtOutcome {
        bounds: out,
        solves: results.len(),
        infeasible,
        failed,
    }
}
