//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N ... PASS|FAIL` line before asserting.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde_json::Value;

use pfroots::cases;
use pfroots::pf::{flat_start, newton_refine, NewtonOptions};

fn pfroots(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfroots")).args(args).output().unwrap()
}

fn report(n: u32, title: &str, failures: &[String], detail: &str) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {n} ({title}): {verdict} [{detail}]");
    assert!(failures.is_empty(), "criterion {n}: {}", failures.join("; "));
}

/// Published grounded-bus-7 table: bus, |V| of both solutions, angles in degrees.
const PUBLISHED: [(usize, [f64; 2], Option<[f64; 2]>); 14] = [
    (1, [1.0600, 1.0600], Some([0.0000, 0.0000])),
    (2, [1.0450, 1.0450], Some([-9.6493, -8.4330])),
    (3, [1.0100, 1.0100], Some([-21.7179, -19.6333])),
    (4, [0.7270, 0.7525], Some([-14.7476, -12.5904])),
    (5, [0.7998, 0.8309], Some([-16.7431, -14.0091])),
    (6, [1.0700, 1.0700], Some([-50.5993, -39.2774])),
    (7, [0.0000, 0.0000], None),
    (8, [1.0600, 1.0600], None),
    (9, [0.1090, 0.2592], Some([-70.2622, -37.2568])),
    (10, [0.2420, 0.3814], Some([-59.5697, -39.0664])),
    (11, [0.6378, 0.7118], Some([-51.9195, -38.9400])),
    (12, [0.9824, 0.9950], Some([-52.4829, -40.7917])),
    (13, [0.9008, 0.9280], Some([-51.9006, -40.1235])),
    (14, [0.4022, 0.5130], Some([-59.9679, -42.9334])),
];

struct ContinuumRun {
    json: Value,
    code: i32,
    elapsed: Duration,
}

/// One `continuum` run on the bundled IEEE-14 case with a 360-point angle grid.
fn continuum_run() -> &'static ContinuumRun {
    static RUN: OnceLock<ContinuumRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let out = pfroots(&[
            "--case",
            "builtin:ieee14",
            "--mode",
            "continuum",
            "--format",
            "json",
            "--theta-samples",
            "360",
        ]);
        ContinuumRun {
            json: serde_json::from_slice(&out.stdout).expect("continuum JSON"),
            code: out.status.code().unwrap(),
            elapsed: start.elapsed(),
        }
    })
}

fn curves(run: &ContinuumRun) -> Vec<Value> {
    run.json
        .as_array()
        .and_then(|a| a.first())
        .and_then(|p| p["curves"].as_array().cloned())
        .unwrap_or_default()
}

#[test]
fn c1_reduced_network_curves() {
    let run = continuum_run();
    let ids: Vec<usize> = cases::ieee14().buses().iter().map(|b| b.id).collect();
    let curves = curves(run);
    let mut failures = Vec::new();
    if run.json.as_array().map(Vec::len) != Some(1) {
        failures.push("expected one grounded-bus pattern".to_string());
    }
    if curves.len() != 2 {
        failures.push(format!("{} curves, expected 2", curves.len()));
    }
    let mut worst_v = 0.0f64;
    let mut worst_t = 0.0f64;
    for (k, c) in curves.iter().enumerate().take(2) {
        let sol = &c["full_at_zero"];
        for &(bus, v, t) in &PUBLISHED {
            let m = ids.iter().position(|&i| i == bus).unwrap();
            let vm = sol["v_mag"][m].as_f64().unwrap();
            let va = sol["theta"][m].as_f64();
            match bus {
                7 => {
                    if vm != 0.0 || va.is_some() {
                        failures.push(format!("curve {}: bus 7 is {vm} at {va:?}", k + 1));
                    }
                }
                8 => {}
                _ => {
                    let dv = (vm - v[k]).abs();
                    let dt = (va.unwrap().to_degrees() - t.unwrap()[k]).abs();
                    worst_v = worst_v.max(dv);
                    worst_t = worst_t.max(dt);
                    if dv > 1e-3 || dt > 0.05 {
                        failures.push(format!("curve {} bus {bus}: |V| off {dv:.2e}, angle off {dt:.3}°", k + 1));
                    }
                }
            }
        }
        let q = c["q_pendant"].as_f64().unwrap();
        if (q - 6.7448).abs() > 1e-3 {
            failures.push(format!("curve {}: Q_pendant {q}", k + 1));
        }
    }
    if run.elapsed > Duration::from_secs(600) {
        failures.push(format!("runtime {:.0} s", run.elapsed.as_secs_f64()));
    }
    report(
        1,
        "reduced-network curves",
        &failures,
        &format!(
            "{} curves, max |V| error {worst_v:.1e}, max angle error {worst_t:.1e} deg, {:.0} s, exit {}",
            curves.len(),
            run.elapsed.as_secs_f64(),
            run.code
        ),
    );
}

#[test]
fn c2_curve_sweep() {
    let run = continuum_run();
    let curves = curves(run);
    let mut failures = Vec::new();
    if curves.is_empty() {
        failures.push("no curves".to_string());
    }
    let mut worst = 0.0f64;
    let mut worst_p = 0.0f64;
    for (k, c) in curves.iter().enumerate() {
        let samples = c["samples"].as_array().unwrap();
        if samples.len() != 360 {
            failures.push(format!("curve {}: {} samples", k + 1, samples.len()));
        }
        for s in samples {
            let r = s["residual"].as_f64().unwrap();
            let p = s["p_pendant"].as_f64().unwrap();
            worst = worst.max(r);
            worst_p = worst_p.max(p.abs());
            if !(r < 1e-8) {
                failures.push(format!("curve {}: residual {r:e} at theta {}", k + 1, s["theta"]));
            }
            if p.abs() > 1e-14 {
                failures.push(format!("curve {}: pendant P {p:e}", k + 1));
            }
        }
    }
    report(
        2,
        "curve validity sweep",
        &failures,
        &format!("{} curves x 360 angles, max residual {worst:.1e}, max |P_pendant| {worst_p:.1e}", curves.len()),
    );
}

fn oracle_match(builtin: &str, oracle: &[Vec<f64>]) -> Result<String, String> {
    let out = pfroots(&["--case", builtin, "--mode", "enumerate", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) || v["complete"] != Value::Bool(true) {
        return Err(format!("{builtin}: search did not complete"));
    }
    let found: Vec<Vec<f64>> = v["isolated"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["state"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect();
    if found.len() != oracle.len() {
        return Err(format!("{builtin}: {} roots, oracle {}", found.len(), oracle.len()));
    }
    let mut worst = 0.0f64;
    for root in oracle {
        let d = found.iter().map(|f| common::dist_inf(f, root)).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        if d >= 1e-6 {
            return Err(format!("{builtin}: oracle root {root:?} unmatched ({d:e})"));
        }
    }
    Ok(format!("{builtin} {} roots, max distance {worst:.1e}", found.len()))
}

#[test]
fn c3_oracle_equivalence() {
    let start = Instant::now();
    let two = common::raw(cases::TWO_BUS_JSON);
    let vmax2 = pfroots::qcpf::default_vmax(&cases::two_bus());
    let two_roots: Vec<Vec<f64>> = common::two_bus_roots(&two, 1.5)
        .into_iter()
        .filter(|r| r.iter().all(|x| x.abs() <= vmax2))
        .collect();
    let three = common::raw(cases::THREE_BUS_JSON);
    let three_roots = common::three_bus_roots(&three, pfroots::qcpf::default_vmax(&cases::three_bus()));
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (builtin, oracle) in [("builtin:two-bus", &two_roots), ("builtin:three-bus", &three_roots)] {
        match oracle_match(builtin, oracle) {
            Ok(d) => details.push(d),
            Err(e) => failures.push(e),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        failures.push(format!("runtime {secs:.0} s"));
    }
    details.push(format!("{secs:.1} s"));
    report(3, "oracle equivalence", &failures, &details.join(", "));
}

#[test]
fn c4_relaxation_soundness() {
    let mut failures = Vec::new();
    let sound = common::soundness(50, 4);
    let mono = common::monotonicity(50, 5);
    let detail = format!(
        "50 boxes max s_cvx - S {}, 50 nested pairs max drop {}",
        sound.as_ref().map_or("-".into(), |w| format!("{w:.1e}")),
        mono.as_ref().map_or("-".into(), |w| format!("{w:.1e}")),
    );
    failures.extend(sound.err());
    failures.extend(mono.err());
    report(4, "relaxation soundness", &failures, &detail);
}

#[test]
fn c5_envelope_rows() {
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..1000u64 {
        match common::envelope_excess(0x5eed + k, (k % 2) as usize) {
            Ok(w) => worst = worst.max(w),
            Err(e) => failures.push(format!("pair {k}: {e}")),
        }
    }
    report(5, "envelope rows", &failures, &format!("1000 (box, x) pairs, max excess {worst:.1e}"));
}

#[test]
fn c6_rect_polar_consistency() {
    let r = common::rect_polar_gap(100, 14);
    let detail = r.as_ref().map_or("-".into(), |w| format!("100 vectors, max gap {w:.1e}"));
    report(6, "rectangular/polar consistency", &r.err().into_iter().collect::<Vec<_>>(), &detail);
}

#[test]
fn c7_newton_operating_point() {
    let case = cases::ieee14();
    let mut failures = Vec::new();
    let residual = match newton_refine(&case, &flat_start(&case), &[], NewtonOptions::default()) {
        Ok(out) => out.residual,
        Err(e) => {
            failures.push(format!("Newton failed: {e}"));
            f64::NAN
        }
    };
    if !(residual < 1e-10) {
        failures.push(format!("residual {residual:e}"));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    let path = path.to_str().unwrap();
    let newton = pfroots(&["--case", "builtin:ieee14", "--format", "json", "--out", path]);
    let verify = pfroots(&["--case", "builtin:ieee14", "--mode", "verify", path]);
    let codes = (newton.status.code(), verify.status.code());
    if codes != (Some(0), Some(0)) {
        failures.push(format!("exit codes {codes:?}"));
    }
    report(
        7,
        "Newton operating point",
        &failures,
        &format!("residual {residual:.1e}, newton/verify exit {:?}/{:?}", codes.0, codes.1),
    );
}

#[test]
fn c8_practicality_filter() {
    let run = continuum_run();
    let analysis = run.json.as_array().and_then(|a| a.first()).cloned().unwrap_or(Value::Null);
    let reports = analysis["practicality"].as_array().cloned().unwrap_or_default();
    let mut failures = Vec::new();
    if reports.len() != 2 {
        failures.push(format!("{} annotated curves, expected 2", reports.len()));
    }
    let q_max = cases::ieee14().buses().iter().find(|b| b.id == 8).unwrap().q_gen_limits.unwrap().1;
    for (k, r) in reports.iter().enumerate() {
        let hit = r["violations"].as_array().unwrap().iter().find(|v| v["kind"] == "q-limit" && v["element"] == 8);
        match hit {
            Some(v) if v["value"].as_f64().unwrap() > q_max => {}
            _ => failures.push(format!("curve {}: no Q-limit violation at bus 8", k + 1)),
        }
    }
    report(
        8,
        "practicality filter",
        &failures,
        &format!("{} curves flagged against Q8max = {q_max} p.u.", reports.len()),
    );
}
