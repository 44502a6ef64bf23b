//! `pfroots`: power-flow solving, solution enumeration and continuum analysis.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, ValueEnum};
use serde::Serialize;

use pfroots::cases;
use pfroots::continuum::{analyze, curves_table, CurveOptions, Limits, PatternAnalysis};
use pfroots::enumerator::{enumerate_case, EnumConfig, SolutionSet};
use pfroots::pf::{flat_start, newton_refine, NewtonOptions, PolarSolution};
use pfroots::qcpf::default_vmax;
use pfroots::solutions::{verify_record, SolutionRecord, SolutionsFile, VerifyReport};
use pfroots::{parse_case, NetworkCase};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Newton,
    Enumerate,
    Continuum,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

/// Enumerate AC power-flow solutions and solution curves.
#[derive(Debug, Parser)]
#[command(name = "pfroots", version)]
struct Cli {
    /// Case file (MATPOWER `.m` or JSON), or `builtin:NAME` with NAME one of
    /// ieee14, two-bus, two-bus-no-load, three-bus.
    #[arg(long)]
    case: String,
    #[arg(long, value_enum, default_value = "newton")]
    mode: Mode,
    /// Half-width of the initial voltage box, p.u. [default: 1.2 × max(v_set, 1)]
    #[arg(long)]
    vmax: Option<f64>,
    /// Slack bound above which a box holds no solution.
    #[arg(long, default_value_t = 1e-6)]
    eps_s: f64,
    /// Maximum number of conic solves [default: 20000; 2000 in continuum mode].
    #[arg(long)]
    budget: Option<usize>,
    /// Pendant angles checked per curve.
    #[arg(long, default_value_t = 24)]
    theta_samples: usize,
    /// Pendant magnitude used to assemble curves [default: case setpoint].
    #[arg(long)]
    pendant_v: Option<f64>,
    /// OBBT passes per search node [default: 1; 0 in continuum mode].
    #[arg(long)]
    obbt_passes: Option<usize>,
    /// Residual tolerance for `verify`, p.u.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print one progress line per search node to standard error.
    #[arg(short, long)]
    verbose: bool,
    /// Solutions file for `verify`.
    solutions: Option<PathBuf>,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn fail(code: u8, err: anyhow::Error) -> Failure {
    Failure { code, err }
}

fn main() -> ExitCode {
    // conic solver panics are caught and counted as failed solves
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        if !info.location().is_some_and(|l| l.file().contains("clarabel")) {
            default_hook(info);
        }
    }));
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn check_usage(cli: &Cli) -> Result<(), Failure> {
    let positive = [("--eps-s", cli.eps_s), ("--tol", cli.tol)];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(fail(EXIT_USAGE, anyhow!("{name} must be positive")));
        }
    }
    if let Some(v) = cli.vmax {
        if !(v.is_finite() && v > 0.0) {
            return Err(fail(EXIT_USAGE, anyhow!("--vmax must be positive")));
        }
    }
    if let Some(v) = cli.pendant_v {
        if !(v.is_finite() && v > 0.0) {
            return Err(fail(EXIT_USAGE, anyhow!("--pendant-v must be positive")));
        }
    }
    if cli.budget == Some(0) || cli.theta_samples == 0 {
        return Err(fail(EXIT_USAGE, anyhow!("--budget and --theta-samples must be at least 1")));
    }
    match (cli.mode, &cli.solutions) {
        (Mode::Verify, None) => Err(fail(EXIT_USAGE, anyhow!("verify mode needs a solutions file argument"))),
        (Mode::Verify, Some(_)) | (_, None) => Ok(()),
        (_, Some(_)) => Err(fail(EXIT_USAGE, anyhow!("a solutions file is only used in verify mode"))),
    }
}

fn load_case(spec: &str) -> Result<NetworkCase, Failure> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return match name {
            "ieee14" => Ok(cases::ieee14()),
            "two-bus" => Ok(cases::two_bus()),
            "two-bus-no-load" => Ok(cases::two_bus_no_load()),
            "three-bus" => Ok(cases::three_bus()),
            _ => Err(fail(EXIT_USAGE, anyhow!("unknown builtin case '{name}'"))),
        };
    }
    let text = fs::read_to_string(spec)
        .with_context(|| format!("reading {spec}"))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    parse_case(&text)
        .with_context(|| format!("parsing {spec}"))
        .map_err(|e| fail(EXIT_INPUT, e))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    check_usage(cli)?;
    let case = load_case(&cli.case)?;
    let (text, code) = match cli.mode {
        Mode::Newton => newton_mode(cli, &case)?,
        Mode::Enumerate => enumerate_mode(cli, &case)?,
        Mode::Continuum => continuum_mode(cli, &case)?,
        Mode::Verify => verify_mode(cli, &case)?,
    };
    match &cli.out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(|e| fail(EXIT_INPUT, e))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    Ok(code)
}

/// Search defaults per mode. The reduced networks behind curves have ~22
/// free coordinates, where a full OBBT pass costs ~45 solves per node; a
/// plain best-first search reaches the solutions far sooner.
fn enum_config(cli: &Cli) -> EnumConfig {
    let (budget, obbt_passes) = match cli.mode {
        Mode::Continuum => (2_000, 0),
        _ => (20_000, 1),
    };
    EnumConfig {
        eps_s: cli.eps_s,
        budget: cli.budget.unwrap_or(budget),
        obbt_passes: cli.obbt_passes.unwrap_or(obbt_passes),
        ..EnumConfig::default()
    }
}

fn progress(verbose: bool) -> impl FnMut(&pfroots::enumerator::NodeLog) {
    move |line| {
        if verbose {
            eprintln!("{line}");
        }
    }
}

/// Six significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.5}", x);
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

/// One row per bus: magnitudes of every solution, then angles in degrees.
fn polar_table(case: &NetworkCase, sols: &[&PolarSolution], sep: &str) -> String {
    let mut out = String::new();
    let mut header = vec!["bus".to_string()];
    header.extend((1..=sols.len()).map(|i| format!("v{i}")));
    header.extend((1..=sols.len()).map(|i| format!("theta{i}")));
    out.push_str(&header.join(sep));
    out.push('\n');
    for (m, bus) in case.buses().iter().enumerate() {
        let mut row = vec![bus.id.to_string()];
        row.extend(sols.iter().map(|s| sig6(s.v_mag[m])));
        row.extend(sols.iter().map(|s| match s.theta[m] {
            Some(t) => sig6(t.to_degrees()),
            None => "-".to_string(),
        }));
        out.push_str(&row.join(sep));
        out.push('\n');
    }
    out
}

fn newton_mode(cli: &Cli, case: &NetworkCase) -> Result<(String, u8), Failure> {
    let out = newton_refine(case, &flat_start(case), &[], NewtonOptions::default())
        .map_err(|e| fail(EXIT_VERIFY, anyhow!("flat-start Newton failed: {e}")))?;
    let text = match cli.format {
        Format::Json => json(&SolutionsFile {
            solutions: vec![SolutionRecord::from_solution(case, "newton", &out.solution)],
        }),
        Format::Csv => polar_table(case, &[&out.solution], ","),
        Format::Table => format!(
            "Newton operating point: {} iterations, residual {:.3e} p.u.\n{}",
            out.iterations,
            out.residual,
            polar_table(case, &[&out.solution], "\t")
        ),
    };
    Ok((text, 0))
}

fn enumerate_mode(cli: &Cli, case: &NetworkCase) -> Result<(String, u8), Failure> {
    let vmax = cli.vmax.unwrap_or_else(|| default_vmax(case));
    let set: SolutionSet = enumerate_case(case, vmax, &enum_config(cli), progress(cli.verbose))
        .map_err(|e| fail(EXIT_USAGE, e.into()))?;
    let sols: Vec<&PolarSolution> = set.isolated.iter().map(|s| &s.polar).collect();
    let text = match cli.format {
        Format::Json => {
            let mut s = set.to_json();
            s.push('\n');
            s
        }
        Format::Csv => polar_table(case, &sols, ","),
        Format::Table => {
            let mut s = format!(
                "{} isolated solution(s), {} suspect box(es), search {} ({} nodes, {} conic solves)\n",
                set.isolated.len(),
                set.suspects.len(),
                if set.complete { "complete" } else { "INCOMPLETE: budget exhausted" },
                set.stats.nodes,
                set.stats.conic_solves
            );
            if !sols.is_empty() {
                s.push_str(&polar_table(case, &sols, "\t"));
            }
            s
        }
    };
    if !set.complete {
        eprintln!("warning: node budget exhausted; results are partial");
    }
    Ok((text, if set.complete { 0 } else { EXIT_BUDGET }))
}

fn continuum_mode(cli: &Cli, case: &NetworkCase) -> Result<(String, u8), Failure> {
    let curve_opts = CurveOptions {
        theta_samples: cli.theta_samples,
        pendant_v: cli.pendant_v,
        ..CurveOptions::default()
    };
    let results: Vec<PatternAnalysis> = analyze(
        case,
        cli.vmax,
        &enum_config(cli),
        &curve_opts,
        &Limits::from_case(case),
        progress(cli.verbose),
    )
    .map_err(|e| fail(EXIT_INPUT, e.into()))?;
    let complete = results.iter().all(|r| r.enumeration_complete);
    let text = match cli.format {
        Format::Json => json(&results),
        Format::Csv => results
            .iter()
            .map(|r| curves_table(case, &r.curves, ",", 6))
            .collect::<Vec<_>>()
            .join("\n"),
        Format::Table => {
            let mut s = String::new();
            if results.is_empty() {
                s.push_str("no grounded-bus pattern found\n");
            }
            for r in &results {
                let id = |m: usize| case.buses()[m].id;
                s.push_str(&format!(
                    "pattern: zero bus {}, pendant bus {} (branch {}-{})\n",
                    id(r.pattern.zero_bus),
                    id(r.pattern.pendant_bus),
                    r.pattern.bridge_params.from_bus,
                    r.pattern.bridge_params.to_bus
                ));
                let q = r.curves.first().map_or(r.pattern.q_pendant, |c| c.q_pendant);
                s.push_str(&format!("Q_pendant = {q:.4} p.u.\n"));
                s.push_str(&format!(
                    "reduced network: {} buses, {} solution curve(s), search {} ({} nodes, {} conic solves)\n",
                    r.s2_bus_ids.len(),
                    r.curves.len(),
                    if r.enumeration_complete { "complete" } else { "INCOMPLETE: budget exhausted" },
                    r.stats.nodes,
                    r.stats.conic_solves
                ));
                if !r.curves.is_empty() {
                    s.push_str(&curves_table(case, &r.curves, "\t", 4));
                }
                for (i, p) in r.practicality.iter().enumerate() {
                    s.push_str(&format!("curve {}: {}\n", i + 1, p.summary()));
                }
            }
            s
        }
    };
    if !complete {
        eprintln!("warning: node budget exhausted; results are partial");
    }
    Ok((text, if complete { 0 } else { EXIT_BUDGET }))
}

fn verify_mode(cli: &Cli, case: &NetworkCase) -> Result<(String, u8), Failure> {
    let path = cli.solutions.as_ref().expect("checked in check_usage");
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    let file = SolutionsFile::parse(&text).map_err(|e| fail(EXIT_INPUT, e.into()))?;
    let reports: Vec<VerifyReport> = file
        .solutions
        .iter()
        .map(|r| verify_record(case, r, cli.tol))
        .collect::<Result<_, _>>()
        .map_err(|e| fail(EXIT_INPUT, e.into()))?;
    let all_pass = !reports.is_empty() && reports.iter().all(|r| r.pass);
    let out = match cli.format {
        Format::Json => json(&reports),
        Format::Csv | Format::Table => {
            let sep = if cli.format == Format::Csv { "," } else { "\t" };
            let mut s = ["name", "max_residual", "worst_ratio", "worst_bus", "result"].join(sep);
            s.push('\n');
            for r in &reports {
                let row = [
                    r.name.clone(),
                    format!("{:.3e}", r.max_residual),
                    format!("{:.3e}", r.worst_ratio),
                    r.worst_bus.to_string(),
                    if r.pass { "pass" } else { "FAIL" }.to_string(),
                ];
                s.push_str(&row.join(sep));
                s.push('\n');
            }
            s
        }
    };
    Ok((out, if all_pass { 0 } else { EXIT_VERIFY }))
}
