//! Solutions files: polar voltages per bus, as written by Newton runs and
//! read back for verification.
//!
//! ```json
//! { "solutions": [ { "name": "newton", "decimals": null,
//!     "buses": [ { "id": 1, "vm_pu": 1.06, "va_deg": 0.0 }, ... ] } ] }
//! ```
//!
//! `va_deg` is `null` for a bus without an angle (zero magnitude, or a free
//! pendant angle); such buses are evaluated at angle 0. `decimals`, when
//! present, says the values were printed rounded to that many decimals
//! (magnitudes in p.u., angles in degrees); verification then allows the
//! residual change such rounding can cause.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{build_ybus, NetworkCase};
use crate::pf::{residuals, PolarSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub id: usize,
    pub vm_pu: f64,
    pub va_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub name: String,
    #[serde(default)]
    pub decimals: Option<u32>,
    pub buses: Vec<BusVoltage>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionsFile {
    pub solutions: Vec<SolutionRecord>,
}

#[derive(Debug, Error)]
pub enum SolutionsError {
    #[error("invalid solutions file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("solution '{name}': {msg}")]
    Mismatch { name: String, msg: String },
}

impl SolutionsFile {
    pub fn parse(text: &str) -> Result<Self, SolutionsError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solutions serialize")
    }
}

impl SolutionRecord {
    /// Full-precision record of a solution of `case`.
    pub fn from_solution(case: &NetworkCase, name: &str, sol: &PolarSolution) -> Self {
        let buses = case
            .buses()
            .iter()
            .enumerate()
            .map(|(m, b)| BusVoltage {
                id: b.id,
                vm_pu: sol.v_mag[m],
                va_deg: sol.theta[m].map(f64::to_degrees),
            })
            .collect();
        Self {
            name: name.to_string(),
            decimals: None,
            buses,
        }
    }

    /// Voltages in case bus order. Every case bus must appear exactly once.
    pub fn to_solution(&self, case: &NetworkCase) -> Result<PolarSolution, SolutionsError> {
        let err = |msg: String| SolutionsError::Mismatch {
            name: self.name.clone(),
            msg,
        };
        let n = case.n_buses();
        let mut v = vec![None; n];
        let mut theta = vec![None; n];
        for b in &self.buses {
            let m = case
                .index_of(b.id)
                .ok_or_else(|| err(format!("bus {} is not in the case", b.id)))?;
            if v[m].is_some() {
                return Err(err(format!("bus {} listed twice", b.id)));
            }
            if !(b.vm_pu.is_finite() && b.vm_pu >= 0.0) || !b.va_deg.map_or(true, f64::is_finite) {
                return Err(err(format!("bus {}: invalid voltage", b.id)));
            }
            v[m] = Some(b.vm_pu);
            theta[m] = b.va_deg.map(f64::to_radians);
        }
        let v: Vec<f64> = v
            .into_iter()
            .enumerate()
            .map(|(m, x)| x.ok_or_else(|| err(format!("bus {} missing", case.buses()[m].id))))
            .collect::<Result<_, _>>()?;
        Ok(PolarSolution::from_polar(v, theta))
    }
}

/// Verification outcome for one record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    /// Largest absolute power-balance residual, p.u.
    pub max_residual: f64,
    /// Largest residual-to-allowance ratio; the record passes when it is `<= 1`.
    pub worst_ratio: f64,
    /// Bus id of the worst row.
    pub worst_bus: usize,
    pub pass: bool,
}

/// Bound on how much each bus injection can move when every magnitude is
/// off by at most `dv` and every angle by at most `dtheta` (radians).
///
/// With `d_n` the voltage perturbation, `ΔS_m = V_m conj(Y d)_m + d_m conj(I_m)
/// + d_m conj(Y d)_m` exactly, and `|d_n| <= dv + (|V_n| + dv) dtheta`.
/// Buses without an angle are given a full turn of angle uncertainty.
pub fn rounding_allowance(case: &NetworkCase, sol: &PolarSolution, dv: f64, dtheta: f64) -> Vec<f64> {
    let y = build_ybus(case);
    let v = sol.voltages();
    let current = y.currents(&v);
    let d: Vec<f64> = sol
        .v_mag
        .iter()
        .zip(&sol.theta)
        .map(|(&m, t)| match t {
            Some(_) => dv + (m + dv) * dtheta,
            None => dv + 2.0 * (m + dv),
        })
        .collect();
    (0..case.n_buses())
        .map(|m| {
            let yd: f64 = (0..case.n_buses()).map(|n| y.get(m, n).norm() * d[n]).sum();
            v[m].norm() * yd + d[m] * current[m].norm() + d[m] * yd
        })
        .collect()
}

/// Check a record against the case's power-balance equations.
///
/// Every residual row must satisfy `|r| <= tol + allowance`, where the
/// allowance is zero for full-precision records and the rounding bound of
/// [`rounding_allowance`] when `decimals` is set.
pub fn verify_record(case: &NetworkCase, record: &SolutionRecord, tol: f64) -> Result<VerifyReport, SolutionsError> {
    let sol = record.to_solution(case)?;
    let res = residuals(case, &sol);
    let allowance = match record.decimals {
        Some(d) => {
            let half = 0.5 * 10f64.powi(-(d as i32));
            rounding_allowance(case, &sol, half, half.to_radians())
        }
        None => vec![0.0; case.n_buses()],
    };
    let mut worst_ratio = 0.0f64;
    let mut worst_bus = case.buses()[0].id;
    for (value, (m, _)) in res.values.iter().zip(&res.rows) {
        let ratio = value.abs() / (tol + allowance[*m]);
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_bus = case.buses()[*m].id;
        }
    }
    Ok(VerifyReport {
        name: record.name.clone(),
        max_residual: res.inf_norm(),
        worst_ratio,
        worst_bus,
        pass: worst_ratio <= 1.0,
    })
}
