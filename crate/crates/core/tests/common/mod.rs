//! Brute-force reference solvers that share no code with the library:
//! fixtures are read as raw JSON, injections come from the branch list
//! directly, and roots are polished with a finite-difference Newton.

#![allow(dead_code)]

use num_complex::Complex64;
use serde_json::Value;

pub struct RawNetwork {
    pub ids: Vec<u64>,
    pub kinds: Vec<String>,
    /// Scheduled net injection (P, Q) in p.u.; Q is ignored at PV buses.
    pub sched: Vec<(f64, f64)>,
    pub v_set: Vec<f64>,
    pub theta_set: Vec<f64>,
    /// `(from, to, series y, charging b, tap)` with internal indices.
    pub branches: Vec<(usize, usize, Complex64, f64, f64)>,
    pub shunt: Vec<Complex64>,
}

pub fn raw(json: &str) -> RawNetwork {
    let v: Value = serde_json::from_str(json).unwrap();
    let base = v["base_mva"].as_f64().unwrap();
    let buses = v["buses"].as_array().unwrap();
    let ids: Vec<u64> = buses.iter().map(|b| b["id"].as_u64().unwrap()).collect();
    let idx = |id: u64| ids.iter().position(|&x| x == id).unwrap();
    let num = |b: &Value, k: &str| b.get(k).and_then(Value::as_f64).unwrap_or(0.0);
    let mut net = RawNetwork {
        ids: ids.clone(),
        kinds: buses.iter().map(|b| b["type"].as_str().unwrap().to_string()).collect(),
        sched: buses
            .iter()
            .map(|b| ((num(b, "pg_mw") - num(b, "pd_mw")) / base, -num(b, "qd_mvar") / base))
            .collect(),
        v_set: buses.iter().map(|b| b.get("vm_pu").and_then(Value::as_f64).unwrap_or(1.0)).collect(),
        theta_set: buses.iter().map(|b| num(b, "va_deg").to_radians()).collect(),
        branches: Vec::new(),
        shunt: buses
            .iter()
            .map(|b| Complex64::new(num(b, "gs_mw") / base, num(b, "bs_mvar") / base))
            .collect(),
    };
    for br in v["branches"].as_array().unwrap() {
        let tap = br.get("tap").and_then(Value::as_f64).unwrap_or(1.0);
        net.branches.push((
            idx(br["from"].as_u64().unwrap()),
            idx(br["to"].as_u64().unwrap()),
            Complex64::new(num(br, "g_pu"), num(br, "b_pu")),
            num(br, "charging_pu"),
            tap,
        ));
    }
    net
}

impl RawNetwork {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Complex power injected at every bus (network + shunt withdrawals, sign flipped).
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut s: Vec<Complex64> = v
            .iter()
            .zip(&self.shunt)
            .map(|(vm, ys)| vm * (ys * vm).conj())
            .collect();
        for &(f, t, y, bc, tap) in &self.branches {
            let half = Complex64::new(0.0, bc / 2.0);
            let i_f = (y + half) / (tap * tap) * v[f] - y / tap * v[t];
            let i_t = (y + half) * v[t] - y / tap * v[f];
            s[f] += v[f] * i_f.conj();
            s[t] += v[t] * i_t.conj();
        }
        s
    }

    fn slack(&self) -> usize {
        self.kinds.iter().position(|k| k == "slack").unwrap()
    }

    pub fn free(&self) -> Vec<usize> {
        (0..self.n()).filter(|&m| m != self.slack()).collect()
    }

    /// Full voltage vector from `[e(free); f(free)]`.
    pub fn voltages(&self, z: &[f64]) -> Vec<Complex64> {
        let s = self.slack();
        let mut v = vec![Complex64::from_polar(self.v_set[s], self.theta_set[s]); self.n()];
        let free = self.free();
        let k = free.len();
        for (i, &m) in free.iter().enumerate() {
            v[m] = Complex64::new(z[i], z[k + i]);
        }
        v
    }

    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let v = self.voltages(z);
        let s = self.injections(&v);
        let free = self.free();
        let mut r: Vec<f64> = free.iter().map(|&m| s[m].re - self.sched[m].0).collect();
        for &m in &free {
            r.push(if self.kinds[m] == "pv" {
                v[m].norm_sqr() - self.v_set[m] * self.v_set[m]
            } else {
                s[m].im - self.sched[m].1
            });
        }
        r
    }

    /// Finite-difference Newton; `None` unless the residual drops below 1e-12.
    pub fn polish(&self, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let n = z.len();
        for _ in 0..60 {
            let r = self.residual(&z);
            if r.iter().all(|x| x.abs() < 1e-12) {
                return Some(z);
            }
            let mut jac = nalgebra::DMatrix::zeros(n, n);
            for j in 0..n {
                let h = 1e-7 * (1.0 + z[j].abs());
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += h;
                zm[j] -= h;
                let (rp, rm) = (self.residual(&zp), self.residual(&zm));
                for i in 0..n {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let step = jac.lu().solve(&nalgebra::DVector::from_vec(r))?;
            for (a, s) in z.iter_mut().zip(step.iter()) {
                *a -= s;
            }
            if !z.iter().all(|x| x.is_finite()) {
                return None;
            }
        }
        None
    }

    /// Full state `[e_1..e_N, f_1..f_N]` from unknowns.
    pub fn full_state(&self, z: &[f64]) -> Vec<f64> {
        let v = self.voltages(z);
        v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
    }
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn dedup(points: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if out.iter().all(|q| dist_inf(q, &p) >= tol) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Grid local minima of `g` over `[-half, half]²` at spacing `step`, below `cut`.
pub fn grid_minima(half: f64, step: f64, cut: f64, g: impl Fn(f64, f64) -> f64) -> Vec<(f64, f64)> {
    let n = (2.0 * half / step).round() as usize + 1;
    let coord = |i: usize| -half + step * i as f64;
    let mut prev: Vec<f64> = (0..n).map(|j| g(coord(0), coord(j))).collect();
    let mut cur: Vec<f64> = (0..n).map(|j| g(coord(1), coord(j))).collect();
    let mut out = Vec::new();
    for i in 1..n - 1 {
        let next: Vec<f64> = (0..n).map(|j| g(coord(i + 1), coord(j))).collect();
        for j in 1..n - 1 {
            let c = cur[j];
            if !(c < cut) {
                continue;
            }
            let neighbors = [
                prev[j - 1], prev[j], prev[j + 1], cur[j - 1], cur[j + 1], next[j - 1], next[j], next[j + 1],
            ];
            if neighbors.iter().all(|&x| c <= x || x.is_nan()) {
                out.push((coord(i), coord(j)));
            }
        }
        prev = std::mem::replace(&mut cur, next);
    }
    out
}

/// Roots of a two-bus (slack + PQ) network with `|e|, |f| <= half`.
pub fn two_bus_roots(net: &RawNetwork, half: f64) -> Vec<Vec<f64>> {
    let g = |e: f64, f: f64| {
        let r = net.residual(&[e, f]);
        r[0] * r[0] + r[1] * r[1]
    };
    let cands = grid_minima(half, 1e-3, 1e-2, g);
    let roots: Vec<Vec<f64>> = cands
        .into_iter()
        .filter_map(|(e, f)| net.polish(vec![e, f]))
        .filter(|z| z.iter().all(|x| x.abs() <= half))
        .map(|z| net.full_state(&z))
        .collect();
    dedup(roots, 1e-6)
}

/// Roots of the slack + PV(2) + PQ(3) network inside `[-half, half]⁴`.
///
/// For fixed `V_3`, the bus-3 balance is linear in `V_2`, so the grid runs
/// over `(e_3, f_3)` only.
pub fn three_bus_roots(net: &RawNetwork, half: f64) -> Vec<Vec<f64>> {
    assert_eq!(net.kinds, ["slack", "pv", "pq"]);
    let y = |m: usize, k: usize| -> Complex64 {
        let mut v = vec![Complex64::new(0.0, 0.0); 3];
        v[k] = Complex64::new(1.0, 0.0);
        let mut s = Complex64::new(0.0, 0.0);
        for &(f, t, ys, bc, tap) in &net.branches {
            let half_c = Complex64::new(0.0, bc / 2.0);
            if f == m {
                s += (ys + half_c) / (tap * tap) * v[f] - ys / tap * v[t];
            }
            if t == m {
                s += (ys + half_c) * v[t] - ys / tap * v[f];
            }
        }
        s + net.shunt[m] * v[m]
    };
    let (y31, y32, y33) = (y(2, 0), y(2, 1), y(2, 2));
    let v1 = Complex64::from_polar(net.v_set[0], net.theta_set[0]);
    let s3 = Complex64::new(net.sched[2].0, net.sched[2].1);
    let v2_of = |v3: Complex64| -> Complex64 {
        // s3 = v3 conj(y31 v1 + y32 v2 + y33 v3)
        let rhs = (s3 / v3).conj() - y31 * v1 - y33 * v3;
        rhs / y32
    };
    let g = |e3: f64, f3: f64| {
        let v3 = Complex64::new(e3, f3);
        if v3.norm() < 1e-9 {
            return f64::NAN;
        }
        let v2 = v2_of(v3);
        let r = net.residual(&[v2.re, v3.re, v2.im, v3.im]);
        r[0] * r[0] + r[1] * r[1]
    };
    let cands = grid_minima(half, 1e-3, 1e-1, g);
    let roots: Vec<Vec<f64>> = cands
        .into_iter()
        .filter_map(|(e3, f3)| {
            let v3 = Complex64::new(e3, f3);
            let v2 = v2_of(v3);
            net.polish(vec![v2.re, e3, v2.im, f3])
        })
        .filter(|z| z.iter().all(|x| x.abs() <= half))
        .map(|z| net.full_state(&z))
        .collect();
    dedup(roots, 1e-6)
}

// ---------------------------------------------------------------------------
// Seeded check suites shared by the property tests and the acceptance target.

use pfroots::qcpf::{default_vmax, ConstraintKind};
use pfroots::relaxation::{build_relaxation, solve_relaxation, RelaxationOptions, RowTag};
use pfroots::{build_qcpf, eval_violation, residuals, BoxBounds, PolarSolution, QcpfProblem, RectState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> Vec<QcpfProblem> {
    [pfroots::cases::two_bus(), pfroots::cases::three_bus()]
        .iter()
        .map(|c| build_qcpf(c, default_vmax(c)).unwrap())
        .collect()
}

/// Random sub-box of `outer`; pinned coordinates stay pinned.
pub fn sub_box(outer: &BoxBounds, rng: &mut ChaCha8Rng, min_width: f64) -> BoxBounds {
    let mut b = outer.clone();
    for i in 0..b.dim() {
        if outer.is_pinned(i) {
            continue;
        }
        let w = rng.gen_range(min_width.min(outer.width(i))..=outer.width(i));
        let lo = rng.gen_range(outer.lower[i]..=outer.upper[i] - w);
        b.lower[i] = lo;
        b.upper[i] = lo + w;
    }
    b
}

pub fn point_in(b: &BoxBounds, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..b.dim())
        .map(|i| if b.is_pinned(i) { b.lower[i] } else { rng.gen_range(b.lower[i]..=b.upper[i]) })
        .collect()
}

/// `s_cvx <= S(x) + 1e-7` at sampled rank-1 points of random boxes.
/// Returns the largest `s_cvx - S(x)` seen.
pub fn soundness(boxes: usize, seed: u64) -> Result<f64, String> {
    let opts = RelaxationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems = fixtures();
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..boxes {
        let problem = &problems[trial % problems.len()];
        let b = sub_box(&problem.bounds, &mut rng, 0.05);
        let r = solve_relaxation(&build_relaxation(problem, &b, &opts), &opts);
        if !r.status.is_solved() {
            return Err(format!("box {trial}: solver status {:?}", r.status));
        }
        for _ in 0..40 {
            let x = RectState::new(point_in(&b, &mut rng));
            let s = eval_violation(problem, &x).total;
            worst = worst.max(r.s_cvx - s);
            if r.s_cvx > s + 1e-7 {
                return Err(format!("box {trial}: s_cvx {} > S {s}", r.s_cvx));
            }
        }
    }
    Ok(worst)
}

/// Nested box pairs: the inner bound never drops below the outer one by
/// more than the solver tolerance. Returns the largest drop seen.
pub fn monotonicity(pairs: usize, seed: u64) -> Result<f64, String> {
    let opts = RelaxationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems = fixtures();
    let mut worst = 0.0f64;
    for trial in 0..pairs {
        let problem = &problems[trial % problems.len()];
        let outer = sub_box(&problem.bounds, &mut rng, 0.1);
        let inner = sub_box(&outer, &mut rng, 0.02);
        let r_out = solve_relaxation(&build_relaxation(problem, &outer, &opts), &opts);
        let r_in = solve_relaxation(&build_relaxation(problem, &inner, &opts), &opts);
        let drop = r_out.s_cvx - r_in.s_cvx;
        worst = worst.max(drop);
        if drop > opts.solver_tol * (1.0 + r_out.s_cvx.abs()) {
            return Err(format!("pair {trial}: inner {} < outer {}", r_in.s_cvx, r_out.s_cvx));
        }
    }
    Ok(worst)
}

/// Every envelope and box row at `(x, x xᵀ)` for a random box and `x` in it.
/// Returns the largest row excess (`lhs - rhs`).
pub fn envelope_excess(seed: u64, which: usize) -> Result<f64, String> {
    let problem = &fixtures()[which];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = sub_box(&problem.bounds, &mut rng, 0.0);
    let x = point_in(&b, &mut rng);
    let program = build_relaxation(problem, &b, &RelaxationOptions::default());
    let layout = &program.layout;
    let mut v = vec![0.0; layout.n_vars()];
    for (p, &i) in layout.coords.iter().enumerate() {
        v[layout.x(p)] = x[i];
        for (q, &j) in layout.coords.iter().enumerate().skip(p) {
            v[layout.xmat(p, q)] = x[i] * x[j];
        }
    }
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for row in &program.inequalities {
        if matches!(row.tag, RowTag::RltLower | RowTag::RltUpper | RowTag::RltMixed | RowTag::Box) {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * v[j]).sum();
            worst = worst.max(lhs - row.rhs);
            if lhs > row.rhs + 1e-12 {
                return Err(format!("{:?} row: {lhs} > {}", row.tag, row.rhs));
            }
            checked += 1;
        }
    }
    if checked != program.rlt_rows() + 2 * layout.n_x() {
        return Err(format!("checked {checked} rows"));
    }
    Ok(worst)
}

/// Rectangular violations against polar residuals on random IEEE-14
/// voltages. Returns the largest disagreement.
pub fn rect_polar_gap(vectors: usize, seed: u64) -> Result<f64, String> {
    use pfroots::pf::BalanceKind;
    use std::f64::consts::PI;
    let case = pfroots::cases::ieee14();
    let problem = build_qcpf(&case, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..vectors {
        let v_mag: Vec<f64> = (0..14).map(|_| rng.gen_range(0.0..1.3)).collect();
        let theta: Vec<f64> = (0..14).map(|_| rng.gen_range(-PI..PI)).collect();
        let sol = PolarSolution::from_polar(v_mag.clone(), theta.iter().map(|&t| Some(t)).collect());
        let viol = eval_violation(&problem, &RectState::from_polar(&v_mag, &theta));
        let res = residuals(&case, &sol);
        let mut matched = 0;
        for (k, row) in problem.constraints.iter().enumerate() {
            let polar_row = match row.kind {
                ConstraintKind::ActiveBalance => Some(BalanceKind::Active),
                ConstraintKind::ReactiveBalance => Some(BalanceKind::Reactive),
                ConstraintKind::PvMagnitude => None,
            };
            let expected = match polar_row {
                Some(kind) => {
                    let r = res
                        .rows
                        .iter()
                        .position(|&(m, kk)| m == row.bus && kk == kind)
                        .ok_or(format!("no polar row for constraint {k}"))?;
                    matched += 1;
                    res.values[r].abs()
                }
                None => {
                    let v_set = case.buses()[row.bus].v_set.unwrap();
                    (v_mag[row.bus] * v_mag[row.bus] - v_set * v_set).abs()
                }
            };
            let gap = (viol.per_constraint[k] - expected).abs();
            worst = worst.max(gap);
            if gap >= 1e-10 {
                return Err(format!("vector {trial}, row {k}: gap {gap:e}"));
            }
        }
        if matched != res.values.len() {
            return Err(format!("vector {trial}: {matched} of {} polar rows matched", res.values.len()));
        }
    }
    Ok(worst)
}
