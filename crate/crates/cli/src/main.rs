//! `qbm`: exact identity checks, path simulation and Monte Carlo
//! verification for the q-Brownian motion.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a run
//! cannot complete, 2 when the configuration is rejected.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use qbm::verify::VerificationReport;

use config::{Args, RunConfig, Suite};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Serialize)]
struct SuiteSummary {
    checks: usize,
    failed: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    build: String,
    suites: BTreeMap<&'static str, SuiteSummary>,
}

fn build_id() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    format!("{} {} ({profile}, {}-{})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"), std::env::consts::ARCH, std::env::consts::OS)
}

/// Records a suite's reports, lists its failures and writes its report file.
fn record(
    name: &'static str,
    reports: &[VerificationReport],
    config: &RunConfig,
    suites: &mut BTreeMap<&'static str, SuiteSummary>,
) -> qbm::error::Result<()> {
    let failed: Vec<&VerificationReport> = reports.iter().filter(|r| !r.passed).collect();
    for r in &failed {
        eprintln!("FAIL {name}: {} [{}] oracle {} estimate {}", r.name, r.params_string(), r.oracle, r.estimate);
    }
    println!("{name}: {} checks, {} failed", reports.len(), failed.len());
    commands::write_reports(reports, &config.out, name, config.format)?;
    suites.insert(name, SuiteSummary { checks: reports.len(), failed: failed.len() });
    Ok(())
}

fn run(config: &RunConfig) -> qbm::error::Result<bool> {
    std::fs::create_dir_all(&config.out)?;
    let mut suites = BTreeMap::new();
    let runs = |s: Suite| config.suite == s || config.suite == Suite::All;
    if runs(Suite::Identities) {
        record("identities", &commands::identities(config)?, config, &mut suites)?;
    }
    if runs(Suite::Simulate) {
        let n = commands::simulate(config)?;
        println!("simulate: {n} paths written to {}", config.out.join("paths").display());
    }
    if runs(Suite::Verify) {
        record("verify", &commands::verify(config)?, config, &mut suites)?;
    }
    let manifest = Manifest { config, build: build_id(), suites };
    let file = std::fs::File::create(config.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(file, &manifest).map_err(|e| qbm::error::QbmError::Io(e.to_string()))?;
    Ok(manifest.suites.values().all(|s| s.failed == 0))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let env_seed = std::env::var("QBM_SEED").ok();
    let config = match RunConfig::resolve(args, env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let unknown = commands::unknown_filters(&config);
    if !unknown.is_empty() {
        eprintln!("configuration error: unknown check families {unknown:?}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(&config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
