//! Branch-and-bound enumeration of power-flow solutions inside a box.
//!
//! Each node solves the relaxation over its box. Nodes with a positive
//! slack bound are pruned; otherwise Newton is started from the relaxed
//! point and every certified root is recorded. Boxes are then tightened
//! (OBBT), tested with the Krawczyk operator, and split. Known roots are
//! removed from later boxes by carving out a small closed cube around them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::case::NetworkCase;
use crate::pf::{newton_refine, residuals, NewtonOptions, PolarSolution, RectSystem};
use crate::qcpf::{build_qcpf, BoxBounds, QcpfProblem, RectState};
use crate::relaxation::{
    build_relaxation, obbt_tighten, solve_relaxation, RelaxationOptions, RelaxationResult, SolveStatus,
};

#[derive(Clone, Debug, PartialEq)]
pub struct EnumConfig {
    /// Slack bound above which a box is declared solution-free.
    pub eps_s: f64,
    /// Boxes narrower than this in every coordinate are not split further.
    pub isolation_floor: f64,
    pub dedup_tol: f64,
    pub exclusion_half_width: f64,
    /// Maximum number of conic solves.
    pub budget: usize,
    pub rank1_tol: f64,
    /// OBBT passes per node.
    pub obbt_passes: usize,
    /// Split points are clamped to this central fraction of the interval.
    pub central_fraction: f64,
    /// Close boxes with the Krawczyk test (no root, or exactly one known root).
    pub krawczyk: bool,
    pub newton: NewtonOptions,
    pub relaxation: RelaxationOptions,
}

impl Default for EnumConfig {
    fn default() -> Self {
        Self {
            eps_s: 1e-6,
            isolation_floor: 1e-3,
            dedup_tol: 1e-4,
            exclusion_half_width: 1e-3,
            budget: 20_000,
            rank1_tol: 1e-6,
            obbt_passes: 1,
            central_fraction: 0.6,
            krawczyk: true,
            newton: NewtonOptions::default(),
            relaxation: RelaxationOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Open,
    Pruned,
    Solution,
    Suspect,
}

#[derive(Clone, Debug)]
pub struct SearchNode {
    pub id: usize,
    pub bounds: BoxBounds,
    /// Lower bound inherited from the parent relaxation.
    pub s_cvx: f64,
    pub depth: usize,
    pub status: NodeStatus,
    /// Number of known roots already carved out of this box.
    carved: usize,
}

impl PartialEq for SearchNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SearchNode {}

impl PartialOrd for SearchNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SearchNode {
    // Max-heap: smallest bound first, then deepest, then newest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .s_cvx
            .total_cmp(&self.s_cvx)
            .then(self.depth.cmp(&other.depth))
            .then(self.id.cmp(&other.id))
    }
}

/// A Newton-certified root.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifiedSolution {
    pub state: RectState,
    pub polar: PolarSolution,
    /// Infinity norm of the power-balance residual.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuspectClass {
    CurveSuspect,
    NumericalDifficulty,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuspectBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub class: SuspectClass,
    pub s_cvx: f64,
    pub eig_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub nodes: usize,
    pub conic_solves: usize,
    pub pruned_relaxation: usize,
    pub pruned_krawczyk: usize,
    pub closed_unique: usize,
    pub closed_exclusion: usize,
    pub solver_failures: usize,
    pub open_nodes: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionSet {
    pub isolated: Vec<CertifiedSolution>,
    pub suspects: Vec<SuspectBox>,
    /// False when the budget ran out with open nodes left.
    pub complete: bool,
    pub stats: SearchStats,
}

impl SolutionSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution set serializes")
    }
}

/// What happened to a node, for the progress log.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeAction {
    Pruned,
    PrunedKrawczyk,
    ClosedUnique,
    ClosedExclusion,
    Carved(usize),
    Found,
    Split { coord: usize, at: f64 },
    Suspect(SuspectClass),
    SolverFailed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeLog {
    pub node: usize,
    pub depth: usize,
    pub digest: u64,
    pub max_width: f64,
    pub s_cvx: Option<f64>,
    pub action: NodeAction,
}

impl fmt::Display for NodeLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {} depth {} box {:016x} width {:.3e}", self.node, self.depth, self.digest, self.max_width)?;
        match self.s_cvx {
            Some(s) => write!(f, " s_cvx {s:.3e}")?,
            None => write!(f, " s_cvx -")?,
        }
        match &self.action {
            NodeAction::Pruned => write!(f, " pruned"),
            NodeAction::PrunedKrawczyk => write!(f, " pruned (krawczyk)"),
            NodeAction::ClosedUnique => write!(f, " closed (unique known root)"),
            NodeAction::ClosedExclusion => write!(f, " closed (exclusion cube)"),
            NodeAction::Carved(n) => write!(f, " carved into {n}"),
            NodeAction::Found => write!(f, " root found"),
            NodeAction::Split { coord, at } => write!(f, " split x{coord} at {at:.6}"),
            NodeAction::Suspect(c) => write!(f, " suspect {c:?}"),
            NodeAction::SolverFailed => write!(f, " solver failed"),
        }
    }
}

/// FNV-1a over the bit patterns of the bounds.
pub fn box_digest(b: &BoxBounds) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in b.lower.iter().chain(&b.upper) {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Cluster representatives under the infinity norm; each representative is
/// the lexicographically smallest state of its cluster. Output is sorted.
pub fn dedup(mut solutions: Vec<CertifiedSolution>, tol: f64) -> Vec<CertifiedSolution> {
    solutions.sort_by(|a, b| lex_cmp(a.state.as_slice(), b.state.as_slice()));
    let n = solutions.len();
    let mut cluster: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if solutions[i].state.dist_inf(&solutions[j].state) < tol {
                let (a, b) = (find(&mut cluster, i), find(&mut cluster, j));
                // keep the smaller index (lexicographically smaller) as root
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                cluster[hi] = lo;
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        if find(&mut cluster, i) == i {
            out.push(solutions[i].clone());
        }
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// `box \ cube`, as disjoint boxes; the part inside the cube is dropped.
fn carve(bounds: &BoxBounds, cube: &BoxBounds) -> Option<Vec<BoxBounds>> {
    let inter = bounds.intersect(cube)?;
    let mut rest = bounds.clone();
    let mut pieces = Vec::new();
    for i in 0..bounds.dim() {
        if bounds.is_pinned(i) {
            continue;
        }
        if rest.lower[i] < inter.lower[i] {
            let mut p = rest.clone();
            p.upper[i] = inter.lower[i];
            pieces.push(p);
            rest.lower[i] = inter.lower[i];
        }
        if rest.upper[i] > inter.upper[i] {
            let mut p = rest.clone();
            p.lower[i] = inter.upper[i];
            pieces.push(p);
            rest.upper[i] = inter.upper[i];
        }
    }
    Some(pieces)
}

/// Whether the intersection has positive width in every unpinned coordinate.
fn overlaps(bounds: &BoxBounds, cube: &BoxBounds) -> bool {
    (0..bounds.dim()).all(|i| {
        if bounds.is_pinned(i) {
            cube.lower[i] <= bounds.lower[i] && bounds.lower[i] <= cube.upper[i]
        } else {
            bounds.lower[i].max(cube.lower[i]) < bounds.upper[i].min(cube.upper[i])
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrawczykVerdict {
    NoRoot,
    UniqueRoot,
    Inconclusive,
}

/// Krawczyk test of the square power-flow system over `bounds`.
///
/// `F` is quadratic, so its Jacobian is affine and the interval Jacobian is
/// exact up to rounding, which is covered by a small inflation.
pub fn krawczyk(sys: &RectSystem<'_>, bounds: &BoxBounds) -> KrawczykVerdict {
    let nb = bounds.dim() / 2;
    let free = sys.free_buses();
    let k = free.len();
    let n = 2 * k;
    let coord = |i: usize| if i < k { free[i] } else { nb + free[i - k] };
    let lo: Vec<f64> = (0..n).map(|i| bounds.lower[coord(i)]).collect();
    let hi: Vec<f64> = (0..n).map(|i| bounds.upper[coord(i)]).collect();
    let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let r: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let jy = sys.jacobian(&y);
    let Some(c) = jy.clone().try_inverse() else {
        return KrawczykVerdict::Inconclusive;
    };
    if !c.iter().all(|v| v.is_finite()) {
        return KrawczykVerdict::Inconclusive;
    }
    // radius of J over the box: Σ_i |∂J/∂z_i| r_i
    let mut j_rad = DMatrix::<f64>::zeros(n, n);
    let mut probe = y.clone();
    for i in 0..n {
        if r[i] == 0.0 {
            continue;
        }
        probe[i] = y[i] + 1.0;
        let d = sys.jacobian(&probe) - &jy;
        probe[i] = y[i];
        j_rad += d.abs() * r[i];
    }
    let fy = DVector::from_vec(sys.residual(&y));
    let center = DVector::from_vec(y.clone()) - &c * fy;
    let m_mid = DMatrix::<f64>::identity(n, n) - &c * &jy;
    let rv = DVector::from_vec(r.clone());
    let rad = m_mid.abs() * &rv + c.abs() * j_rad * &rv;
    let mut inside = true;
    for i in 0..n {
        let slack = 1e-12 * (1.0 + center[i].abs() + rad[i]);
        let kl = center[i] - rad[i] - slack;
        let ku = center[i] + rad[i] + slack;
        if !kl.is_finite() || !ku.is_finite() {
            return KrawczykVerdict::Inconclusive;
        }
        if ku < lo[i] || kl > hi[i] {
            return KrawczykVerdict::NoRoot;
        }
        if !(kl > lo[i] && ku < hi[i]) {
            inside = false;
        }
    }
    if inside {
        KrawczykVerdict::UniqueRoot
    } else {
        KrawczykVerdict::Inconclusive
    }
}

/// Classify a narrow box whose relaxation stays at zero without becoming rank one.
///
/// A root is corrected onto `F = 0` from `start` with minimum-norm
/// Gauss-Newton steps, then followed in both directions of the Jacobian's
/// null space. Three or more distinct certified points inside the box mark
/// the box as lying on a solution curve.
pub fn classify_suspect(
    case: &NetworkCase,
    bounds: &BoxBounds,
    start: &RectState,
    config: &EnumConfig,
) -> SuspectClass {
    let sys = RectSystem::new(case, &[]);
    let tol = config.newton.tol;
    let Some(z0) = correct(&sys, sys.unknowns(start), tol) else {
        return SuspectClass::NumericalDifficulty;
    };
    let inside = |z: &[f64]| bounds.contains(sys.assemble(z).as_slice(), 1e-12);
    if !inside(&z0) {
        return SuspectClass::NumericalDifficulty;
    }
    let step = bounds.max_width() / 8.0;
    let mut points: Vec<Vec<f64>> = vec![z0.clone()];
    let Some(t0) = null_direction(&sys, &z0) else {
        return SuspectClass::NumericalDifficulty;
    };
    for dir in [1.0, -1.0] {
        let mut z = z0.clone();
        let mut prev = t0.clone() * dir;
        for _ in 0..8 {
            let Some(mut t) = null_direction(&sys, &z) else { break };
            if t.dot(&prev) < 0.0 {
                t = -t;
            }
            let pred: Vec<f64> = z.iter().zip(t.iter()).map(|(a, b)| a + step * b).collect();
            prev = t;
            let Some(next) = correct(&sys, pred, tol) else { break };
            if !inside(&next) {
                break;
            }
            z = next;
            let distinct = points
                .iter()
                .all(|p| p.iter().zip(&z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) > config.dedup_tol);
            if distinct {
                points.push(z.clone());
            }
        }
    }
    if points.len() >= 3 {
        SuspectClass::CurveSuspect
    } else {
        SuspectClass::NumericalDifficulty
    }
}

/// Unit vector of the smallest singular value of the Jacobian, when that
/// value is negligible compared to the largest.
fn null_direction(sys: &RectSystem<'_>, z: &[f64]) -> Option<DVector<f64>> {
    let svd = sys.jacobian(z).svd(false, true);
    let vt = svd.v_t?;
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let smax = svd.singular_values.max();
    (*smin <= 1e-6 * smax.max(1.0)).then(|| vt.row(imin).transpose())
}

/// Minimum-norm Gauss-Newton correction onto `F = 0`.
fn correct(sys: &RectSystem<'_>, mut z: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    for _ in 0..30 {
        let f = sys.residual(&z);
        if f.iter().fold(0.0f64, |m, v| m.max(v.abs())) < tol {
            return Some(z);
        }
        let j = sys.jacobian(&z);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd.solve(&DVector::from_vec(f), 1e-9 * smax.max(1.0)).ok()?;
        for (a, s) in z.iter_mut().zip(step.iter()) {
            *a -= s;
        }
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Enumerate the power-flow solutions of `case` inside `initial`.
pub fn enumerate(
    case: &NetworkCase,
    problem: &QcpfProblem,
    initial: &BoxBounds,
    config: &EnumConfig,
    mut progress: impl FnMut(&NodeLog),
) -> SolutionSet {
    let sys = RectSystem::new(case, &[]);
    let mut stats = SearchStats::default();
    let mut found: Vec<CertifiedSolution> = Vec::new();
    let mut cubes: Vec<BoxBounds> = Vec::new();
    let mut suspects = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    let mut push = |heap: &mut BinaryHeap<SearchNode>, bounds: BoxBounds, s_cvx: f64, depth: usize, carved: usize| {
        heap.push(SearchNode {
            id: next_id,
            bounds,
            s_cvx,
            depth,
            status: NodeStatus::Open,
            carved,
        });
        next_id += 1;
    };
    push(&mut heap, initial.clone(), 0.0, 0, 0);

    let try_root = |guess: &RectState, found: &mut Vec<CertifiedSolution>, cubes: &mut Vec<BoxBounds>| -> bool {
        let Ok(out) = newton_refine(case, guess, &[], config.newton) else {
            return false;
        };
        if !initial.contains(out.state.as_slice(), 0.0) {
            return false;
        }
        if found.iter().any(|s| s.state.dist_inf(&out.state) < config.dedup_tol) {
            return false;
        }
        let residual = residuals(case, &out.solution).inf_norm();
        let h = config.exclusion_half_width;
        let x = out.state.as_slice();
        cubes.push(BoxBounds::new(
            x.iter().map(|v| v - h).collect(),
            x.iter().map(|v| v + h).collect(),
        ));
        found.push(CertifiedSolution {
            state: out.state,
            polar: out.solution,
            residual,
        });
        true
    };

    while let Some(mut node) = heap.pop() {
        stats.nodes += 1;
        stats.max_depth = stats.max_depth.max(node.depth);
        let log = |node: &SearchNode, s_cvx: Option<f64>, action: NodeAction| NodeLog {
            node: node.id,
            depth: node.depth,
            digest: box_digest(&node.bounds),
            max_width: node.bounds.max_width(),
            s_cvx,
            action,
        };

        // carve out roots found since this box was created
        if node.carved < cubes.len() {
            let mut closed = false;
            let mut carved_any = None;
            for cube in &cubes[node.carved..] {
                if !overlaps(&node.bounds, cube) {
                    continue;
                }
                let pieces = carve(&node.bounds, cube).unwrap_or_default();
                if pieces.is_empty() {
                    closed = true;
                } else {
                    carved_any = Some(pieces);
                }
                break;
            }
            if closed {
                stats.closed_exclusion += 1;
                progress(&log(&node, None, NodeAction::ClosedExclusion));
                continue;
            }
            if let Some(pieces) = carved_any {
                progress(&log(&node, None, NodeAction::Carved(pieces.len())));
                // pieces may still meet later cubes; they are rechecked from the start
                for p in pieces {
                    push(&mut heap, p, node.s_cvx, node.depth + 1, 0);
                }
                continue;
            }
            node.carved = cubes.len();
        }

        if config.krawczyk {
            match krawczyk(&sys, &node.bounds) {
                KrawczykVerdict::NoRoot => {
                    stats.pruned_krawczyk += 1;
                    progress(&log(&node, None, NodeAction::PrunedKrawczyk));
                    continue;
                }
                KrawczykVerdict::UniqueRoot => {
                    let known = found.iter().any(|s| node.bounds.contains(s.state.as_slice(), 0.0));
                    if known {
                        stats.closed_unique += 1;
                        progress(&log(&node, None, NodeAction::ClosedUnique));
                        continue;
                    }
                    if try_root(&RectState::new(node.bounds.center()), &mut found, &mut cubes) {
                        let last = found.last().unwrap();
                        if node.bounds.contains(last.state.as_slice(), 0.0) {
                            stats.closed_unique += 1;
                            progress(&log(&node, None, NodeAction::ClosedUnique));
                            continue;
                        }
                    }
                }
                KrawczykVerdict::Inconclusive => {}
            }
        }

        if stats.conic_solves >= config.budget {
            heap.push(node);
            break;
        }
        let program = build_relaxation(problem, &node.bounds, &config.relaxation);
        let r = solve_relaxation(&program, &config.relaxation);
        stats.conic_solves += 1;
        if r.proves_positive(config.eps_s) {
            stats.pruned_relaxation += 1;
            progress(&log(&node, Some(r.s_cvx), NodeAction::Pruned));
            continue;
        }
        let usable = matches!(r.status, SolveStatus::Solved | SolveStatus::AlmostSolved);
        if !usable {
            stats.solver_failures += 1;
            progress(&log(&node, Some(r.s_cvx), NodeAction::SolverFailed));
        }

        // primal heuristic: Newton from the relaxed point and the extraction
        let before = found.len();
        if r.x_opt.iter().all(|v| v.is_finite()) {
            try_root(&RectState::new(r.x_opt.clone()), &mut found, &mut cubes);
            try_root(&r.extraction, &mut found, &mut cubes);
        }
        try_root(&RectState::new(node.bounds.center()), &mut found, &mut cubes);
        if found.len() > before {
            progress(&log(&node, Some(r.s_cvx), NodeAction::Found));
            push(&mut heap, node.bounds.clone(), node.s_cvx, node.depth, node.carved);
            continue;
        }

        let mut bounds = node.bounds.clone();
        if usable {
            for _ in 0..config.obbt_passes {
                if stats.conic_solves >= config.budget {
                    break;
                }
                let out = obbt_tighten(problem, &bounds, config.eps_s, &config.relaxation);
                stats.conic_solves += out.solves;
                bounds = out.bounds;
            }
        }

        if bounds.max_width() < config.isolation_floor {
            let class = if usable && r.eig_ratio >= config.rank1_tol {
                classify_suspect(case, &bounds, &r.extraction, config)
            } else {
                SuspectClass::NumericalDifficulty
            };
            suspects.push(SuspectBox {
                lower: bounds.lower.clone(),
                upper: bounds.upper.clone(),
                class,
                s_cvx: r.s_cvx,
                eig_ratio: r.eig_ratio,
            });
            progress(&log(&node, Some(r.s_cvx), NodeAction::Suspect(class)));
            continue;
        }

        let (coord, at) = branch_point(&bounds, &r, usable, config.central_fraction);
        let (a, b) = bounds.split(coord, at);
        progress(&log(&node, Some(r.s_cvx), NodeAction::Split { coord, at }));
        let bound = if usable { r.s_cvx.max(node.s_cvx) } else { node.s_cvx };
        push(&mut heap, a, bound, node.depth + 1, node.carved);
        push(&mut heap, b, bound, node.depth + 1, node.carved);
    }

    stats.open_nodes = heap.len();
    let complete = heap.is_empty();
    let mut isolated = dedup(found, config.dedup_tol);
    isolated.retain(|s| s.residual < config.newton.tol);
    suspects.sort_by(|a, b| lex_cmp(&a.lower, &b.lower));
    SolutionSet {
        isolated,
        suspects,
        complete,
        stats,
    }
}

/// Coordinate with the largest `width × (X_ii - x_i²)`, split at the relaxed
/// value clamped to the central part of the interval.
/// Branch on the widest coordinate once it is this many times wider than the gap-weighted pick.
const WIDTH_RATIO: f64 = 8.0;

fn branch_point(bounds: &BoxBounds, r: &RelaxationResult, usable: bool, central: f64) -> (usize, f64) {
    let free: Vec<usize> = (0..bounds.dim()).filter(|&i| !bounds.is_pinned(i)).collect();
    let widest = *free
        .iter()
        .max_by(|&&a, &&b| bounds.width(a).total_cmp(&bounds.width(b)).then(b.cmp(&a)))
        .expect("box has a free coordinate");
    let mut coord = widest;
    if usable {
        let mut best = 0.0;
        for &i in &free {
            let score = bounds.width(i) * r.diagonal_gap(i);
            if score > best {
                best = score;
                coord = i;
            }
        }
        // a coordinate the relaxation never looks at still has to shrink
        if best < 1e-12 || bounds.width(widest) > WIDTH_RATIO * bounds.width(coord) {
            coord = widest;
        }
    }
    let (l, u) = (bounds.lower[coord], bounds.upper[coord]);
    let w = u - l;
    let margin = 0.5 * (1.0 - central) * w;
    let target = if usable && r.x_opt[coord].is_finite() { r.x_opt[coord] } else { 0.5 * (l + u) };
    (coord, target.clamp(l + margin, u - margin))
}

/// Enumerate over the default box of `case` (`vmax` as in [`build_qcpf`]).
pub fn enumerate_case(
    case: &NetworkCase,
    vmax: f64,
    config: &EnumConfig,
    progress: impl FnMut(&NodeLog),
) -> Result<SolutionSet, crate::qcpf::QcpfError> {
    let problem = build_qcpf(case, vmax)?;
    let initial = problem.bounds.clone();
    Ok(enumerate(case, &problem, &initial, config, progress))
}
