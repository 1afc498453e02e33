//! Closed-form moment oracles, Monte Carlo estimates and the verification
//! suites built on them.
//!
//! Every check produces a [`VerificationReport`] that carries the check
//! name, its parameters, the oracle value, the estimate and the verdict, so
//! a report can be reproduced from `(name, parameters, seed)`.

mod exact;
mod ito;
mod mc;
mod quadrature;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QbmError, Result};
use crate::scalar::Scalar;

pub use exact::{exact_identity_suite, EXACT_Q, EXACT_SUITES};
pub use ito::{ito_convergence_study, sde_convergence_study, ItoStudy, ITO_DEPTHS};
pub use mc::{
    grid_index, isometry_oracle, isometry_oracle_truncated, mc_isometry, mc_moment, mc_suite, McCheck, McRunner,
    MC_CHECKS, RERUN_SEED_OFFSET,
};
pub use quadrature::{operator_suite, quadrature_suite, QUADRATURE_TOL, NESTED_TOL};

/// Default z-score threshold for Monte Carlo checks.
pub const Z_THRESHOLD: f64 = 4.0;

/// `E(Z^2) = (1-q) / (1 - q^{2r+1}) = 1 / [2r+1]_q` for `Z = int_0^1 s^r d-slash B`.
pub fn oracle_ez2(r: f64, q: f64) -> f64 {
    (1.0 - q) / (1.0 - q.powf(2.0 * r + 1.0))
}

/// `E(Z^4)` for `Z = int_0^1 s^r d-slash B`.
pub fn oracle_ez4(r: f64, q: f64) -> f64 {
    let p = |e: f64| q.powf(e);
    let num = 2.0 + 3.0 * q - 6.0 * p(r + 1.0) + p(r + 2.0) + 4.0 * p(2.0 * r + 1.0) - 3.0 * p(2.0 * r + 2.0)
        - p(3.0 * r + 3.0);
    let den = (1.0 - p(r + 1.0)) * (1.0 - p(2.0 * r + 1.0)).powi(2) * (1.0 + p(2.0 * r + 1.0));
    (1.0 - q).powi(2) * num / den
}

/// `E(Z^4) / E(Z^2)^2`.
pub fn kurtosis_ratio(r: f64, q: f64) -> f64 {
    oracle_ez4(r, q) / oracle_ez2(r, q).powi(2)
}

/// [`oracle_ez2`] for integer `r` in any scalar type.
pub fn oracle_ez2_exact<S: Scalar>(r: u32, q: &S) -> S {
    (S::one() - q.clone()) / (S::one() - q.powu(2 * r + 1))
}

/// [`oracle_ez4`] for integer `r` in any scalar type.
pub fn oracle_ez4_exact<S: Scalar>(r: u32, q: &S) -> S {
    let one = S::one();
    let p = |e: u32| q.powu(e);
    let int = S::from_i64;
    let num = int(2) + int(3) * q.clone() - int(6) * p(r + 1) + p(r + 2) + int(4) * p(2 * r + 1)
        - int(3) * p(2 * r + 2)
        - p(3 * r + 3);
    let den = (one.clone() - p(r + 1))
        * (one.clone() - p(2 * r + 1)).powu(2)
        * (one.clone() + p(2 * r + 1));
    (one - q.clone()).powu(2) * num / den
}

/// Rows `(r, q, E Z^2, E Z^4, ratio)` over a grid of exponents and `q` values.
pub fn kurtosis_table(rs: &[f64], qs: &[f64]) -> Vec<[f64; 5]> {
    let mut rows = Vec::with_capacity(rs.len() * qs.len());
    for &q in qs {
        for &r in rs {
            rows.push([r, q, oracle_ez2(r, q), oracle_ez4(r, q), kurtosis_ratio(r, q)]);
        }
    }
    rows
}

/// Sum in a fixed binary tree, independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// A sample mean compared with its oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub oracle: f64,
    pub z: f64,
}

impl McEstimate {
    /// Mean and standard error of `samples` (at least two).
    pub fn from_samples(samples: &[f64], oracle: f64, seed: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(QbmError::InvalidParameter(format!("a Monte Carlo estimate needs >= 2 samples, got {n}")));
        }
        let mean = pairwise_sum(samples) / n as f64;
        let centered: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let variance = pairwise_sum(&centered) / (n - 1) as f64;
        // A degenerate sample still gets a positive error from rounding.
        let std_error = (variance / n as f64).sqrt().max(f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE));
        Ok(McEstimate { estimate: mean, std_error, n_paths: n, seed, oracle, z: (mean - oracle) / std_error })
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.z.abs() <= threshold
    }
}

/// The outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub oracle: f64,
    pub estimate: f64,
    /// Tolerance on `|estimate - oracle|` for deterministic checks, or the
    /// z-score threshold for Monte Carlo checks.
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mc: Option<McEstimate>,
    /// The second-seed attempt when the first one missed the threshold.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rerun: Option<McEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Parameter list from `(name, value)` pairs.
pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

impl VerificationReport {
    /// A deterministic check: passes iff `|estimate - oracle| <= tolerance`.
    pub fn deterministic(name: &str, params: BTreeMap<String, f64>, oracle: f64, estimate: f64, tolerance: f64) -> Self {
        let passed = (estimate - oracle).abs() <= tolerance;
        VerificationReport { name: name.into(), params, oracle, estimate, tolerance, passed, mc: None, rerun: None, note: None }
    }

    /// A check that `estimate <= bound` (the oracle slot holds the bound).
    pub fn bounded(name: &str, params: BTreeMap<String, f64>, estimate: f64, bound: f64) -> Self {
        VerificationReport {
            name: name.into(),
            params,
            oracle: bound,
            estimate,
            tolerance: 0.0,
            passed: estimate <= bound,
            mc: None,
            rerun: None,
            note: None,
        }
    }

    /// A Monte Carlo check; a failed first attempt may be followed by one rerun.
    pub fn monte_carlo(name: &str, params: BTreeMap<String, f64>, first: McEstimate, rerun: Option<McEstimate>, threshold: f64) -> Self {
        let decisive = rerun.unwrap_or(first);
        VerificationReport {
            name: name.into(),
            params,
            oracle: first.oracle,
            estimate: decisive.estimate,
            tolerance: threshold,
            passed: decisive.passes(threshold),
            mc: Some(first),
            rerun,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// `q=0.5;t=1` style rendering of the parameters.
    pub fn params_string(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }

    /// Standard error and z-score of the decisive Monte Carlo attempt.
    pub fn z_score(&self) -> Option<(f64, f64)> {
        self.rerun.or(self.mc).map(|m| (m.std_error, m.z))
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    params: String,
    oracle: f64,
    estimate: f64,
    stderr: Option<f64>,
    z: Option<f64>,
    pass: bool,
}

/// One CSV row per report: `name,params,oracle,estimate,stderr,z,pass`.
pub fn write_csv(reports: &[VerificationReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let z = r.z_score();
        w.serialize(CsvRow {
            name: &r.name,
            params: r.params_string(),
            oracle: r.oracle,
            estimate: r.estimate,
            stderr: z.map(|z| z.0),
            z: z.map(|z| z.1),
            pass: r.passed,
        })
        .map_err(|e| QbmError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// The reports as a JSON array.
pub fn write_json(reports: &[VerificationReport], out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, reports).map_err(|e| QbmError::Io(e.to_string()))
}

#[cfg(test)]
mod tests;
