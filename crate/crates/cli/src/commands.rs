//! The three suites and the files they write.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use qbm::error::{QbmError, Result};
use qbm::measures::{support_half_width, DensitySpec};
use qbm::process::{simulate_batch, GeometricGrid};
use qbm::qcore::QContext;
use qbm::verify::{
    exact_identity_suite, ito_convergence_study, kurtosis_table, mc_suite, operator_suite, quadrature_suite,
    sde_convergence_study, write_csv, write_json, ItoStudy, VerificationReport, EXACT_SUITES,
};

use crate::config::{Format, RunConfig};

/// Sections of the verify suite, usable with `--only`.
pub const VERIFY_SECTIONS: &[&str] = &["mc", "quadrature", "operators", "ito", "sde"];

/// `q` values of the plot tables, besides the configured one.
const PLOT_Q: [f64; 3] = [0.2, 0.5, 0.8];
const DENSITY_POINTS: usize = 201;

/// Paths and random polynomials of the q-Ito convergence study.
const ITO_PATHS: usize = 20;
const ITO_POLYS: usize = 20;
const ITO_Q: f64 = 0.8;
/// Paths of the stochastic-exponential study (q = a = t = 1/2).
const SDE_PATHS: usize = 100;

/// Whether `name` is selected by the `--only` filter.
fn selected(config: &RunConfig, name: &str) -> bool {
    config.only.as_ref().is_none_or(|only| only.iter().any(|o| o == name))
}

/// Names in `--only` that no suite knows.
pub fn unknown_filters(config: &RunConfig) -> Vec<String> {
    config
        .only
        .iter()
        .flatten()
        .filter(|o| !EXACT_SUITES.contains(&o.as_str()) && !VERIFY_SECTIONS.contains(&o.as_str()))
        .cloned()
        .collect()
}

pub fn write_reports(reports: &[VerificationReport], dir: &Path, stem: &str, format: Format) -> Result<()> {
    let file = BufWriter::new(File::create(dir.join(format!("{stem}.{}", format.extension())))?);
    match format {
        Format::Json => write_json(reports, file),
        Format::Csv => write_csv(reports, file),
    }
}

fn write_json_value(value: &impl Serialize, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value).map_err(|e| QbmError::Io(e.to_string()))
}

/// Exact identity families, filtered by `--only`.
pub fn identities(config: &RunConfig) -> Result<Vec<VerificationReport>> {
    let families: Vec<String> = EXACT_SUITES.iter().filter(|n| selected(config, n)).map(|n| n.to_string()).collect();
    if families.is_empty() {
        return Ok(Vec::new());
    }
    exact_identity_suite(Some(&families), config.seed)
}

/// Writes one `k,t_k,B_k` file per path under `paths/`, plus the plot
/// tables under `plots/`. Returns the number of paths written.
pub fn simulate(config: &RunConfig) -> Result<usize> {
    let ctx = QContext::float(config.q)?;
    let grid = GeometricGrid::new(config.t, config.q, config.depth)?;
    let dir = config.out.join("paths");
    fs::create_dir_all(&dir)?;
    let paths = simulate_batch(&grid, config.simulate_paths(), config.seed, &ctx)?;
    for path in &paths {
        let mut w = csv::Writer::from_path(dir.join(format!("path_{}.csv", path.seed()))).map_err(csv_error)?;
        w.write_record(["k", "t_k", "B_k"]).map_err(csv_error)?;
        for (k, t, b) in path.rows() {
            w.serialize((k, t, b)).map_err(csv_error)?;
        }
        w.flush()?;
    }
    plots(config)?;
    Ok(paths.len())
}

fn csv_error(e: csv::Error) -> QbmError {
    QbmError::Io(e.to_string())
}

fn plot_qs(config: &RunConfig) -> Vec<f64> {
    let mut qs = PLOT_Q.to_vec();
    if !qs.contains(&config.q) {
        qs.push(config.q);
    }
    qs
}

/// `plots/density.csv` (the marginal density at time `t` across `q`) and
/// `plots/kurtosis.csv` (moments of `int s^r d-slash B` against `r`).
fn plots(config: &RunConfig) -> Result<()> {
    let dir = config.out.join("plots");
    fs::create_dir_all(&dir)?;

    let mut w = csv::Writer::from_path(dir.join("density.csv")).map_err(csv_error)?;
    w.write_record(["q", "t", "y", "density"]).map_err(csv_error)?;
    for q in plot_qs(config) {
        let spec = DensitySpec::marginal(config.t, &QContext::float(q)?)?;
        let w_t = support_half_width(config.t, q);
        for i in 0..DENSITY_POINTS {
            let y = -w_t + 2.0 * w_t * i as f64 / (DENSITY_POINTS - 1) as f64;
            w.serialize((q, config.t, y, spec.density(y))).map_err(csv_error)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("kurtosis.csv")).map_err(csv_error)?;
    w.write_record(["r", "q", "ez2", "ez4", "ratio"]).map_err(csv_error)?;
    let rs: Vec<f64> = (0..=30).map(|i| i as f64 / 10.0).collect();
    for row in kurtosis_table(&rs, &plot_qs(config)) {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Monte Carlo, quadrature, operator and convergence checks, filtered by
/// `--only`. The convergence studies are also written to `studies.json`.
pub fn verify(config: &RunConfig) -> Result<Vec<VerificationReport>> {
    let mut reports = Vec::new();
    if selected(config, "quadrature") {
        reports.extend(quadrature_suite()?);
    }
    if selected(config, "operators") {
        reports.extend(operator_suite()?);
    }
    let mut studies: Vec<ItoStudy> = Vec::new();
    if selected(config, "ito") {
        studies.push(ito_convergence_study(ITO_Q, 1.0, ITO_PATHS, ITO_POLYS, config.seed)?);
    }
    if selected(config, "sde") {
        studies.push(sde_convergence_study(0.5, 1.0, 0.5, 0.5, 30, &[20, 40, 60], SDE_PATHS, config.seed)?);
    }
    for s in &studies {
        reports.extend(s.reports());
    }
    if !studies.is_empty() {
        write_json_value(&studies, &config.out.join("studies.json"))?;
    }
    if selected(config, "mc") {
        let n = config.verify_paths();
        if n < 2 {
            return Err(QbmError::InvalidParameter("Monte Carlo checks need at least 2 paths".into()));
        }
        reports.extend(mc_suite(n, config.seed, config.z_threshold)?);
    }
    Ok(reports)
}
