//! Run configuration: command-line flags layered over an optional
//! `key=value` file, the `QBM_SEED` environment variable and defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use qbm::process::GeometricGrid;
use qbm::qcore::QContext;
use qbm::verify::Z_THRESHOLD;

pub const DEFAULT_Q: f64 = 0.5;
pub const DEFAULT_T: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 1;
/// Paths written by `simulate` unless configured otherwise.
pub const DEFAULT_SIMULATE_PATHS: usize = 10;
/// Paths per Monte Carlo check unless configured otherwise.
pub const DEFAULT_VERIFY_PATHS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Simulate,
    Verify,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Identity checks, path simulation and Monte Carlo verification for the
/// q-Brownian motion.
#[derive(Debug, Parser)]
#[command(name = "qbm", version)]
pub struct Args {
    /// Suite to run.
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Deformation parameter, 0 < q < 1.
    #[arg(long)]
    pub q: Option<f64>,
    /// Horizon of the simulated paths.
    #[arg(long)]
    pub t: Option<f64>,
    /// Grid depth K (default: smallest K with q^K below the grid tail).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Base seed; falls back to QBM_SEED, then to 1.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated check families to run.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// z-score threshold of the Monte Carlo checks.
    #[arg(long)]
    pub z_threshold: Option<f64>,
    /// File of `key=value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// A rejected configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// The resolved configuration, echoed into every manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub suite: Suite,
    pub q: f64,
    pub t: f64,
    pub depth: usize,
    /// `None` means the per-suite default.
    pub paths: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub only: Option<Vec<String>>,
    pub z_threshold: f64,
}

impl RunConfig {
    pub fn simulate_paths(&self) -> usize {
        self.paths.unwrap_or(DEFAULT_SIMULATE_PATHS)
    }

    pub fn verify_paths(&self) -> usize {
        self.paths.unwrap_or(DEFAULT_VERIFY_PATHS)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError(format!("cannot parse `{key}` value `{value}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, ConfigError> {
    T::from_str(value.trim(), true).map_err(|_| ConfigError(format!("invalid `{key}` value `{value}`")))
}

/// Fills the unset fields of `args` from a `key=value` file. Blank lines and
/// lines starting with `#` are ignored; unknown keys are errors.
fn merge_file(args: &mut Args, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "suite" => args.suite = args.suite.or(Some(parse_enum(key, value)?)),
            "q" => args.q = args.q.or(Some(parse(key, value)?)),
            "t" => args.t = args.t.or(Some(parse(key, value)?)),
            "depth" => args.depth = args.depth.or(Some(parse(key, value)?)),
            "paths" => args.paths = args.paths.or(Some(parse(key, value)?)),
            "seed" => args.seed = args.seed.or(Some(parse(key, value)?)),
            "out" => args.out = args.out.take().or_else(|| Some(PathBuf::from(value))),
            "format" => args.format = args.format.or(Some(parse_enum(key, value)?)),
            "only" => {
                args.only = args.only.take().or_else(|| Some(value.split(',').map(|s| s.trim().to_string()).collect()))
            }
            "z_threshold" => args.z_threshold = args.z_threshold.or(Some(parse(key, value)?)),
            other => return Err(ConfigError(format!("{}:{}: unknown key `{other}`", path.display(), n + 1))),
        }
    }
    Ok(())
}

impl RunConfig {
    /// Resolves and validates the configuration. `env_seed` is the value of
    /// `QBM_SEED`, if set.
    pub fn resolve(mut args: Args, env_seed: Option<&str>) -> Result<Self, ConfigError> {
        if let Some(path) = args.config.clone() {
            merge_file(&mut args, &path)?;
        }
        let seed = match (args.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(v)) => parse("QBM_SEED", v)?,
            (None, None) => DEFAULT_SEED,
        };
        let q = args.q.unwrap_or(DEFAULT_Q);
        QContext::float(q).map_err(|e| ConfigError(e.to_string()))?;
        let t = args.t.unwrap_or(DEFAULT_T);
        let depth = args.depth.unwrap_or_else(|| GeometricGrid::default_depth(q));
        GeometricGrid::new(t, q, depth).map_err(|e| ConfigError(e.to_string()))?;
        if args.paths == Some(0) {
            return Err(ConfigError("paths must be at least 1".into()));
        }
        let z_threshold = args.z_threshold.unwrap_or(Z_THRESHOLD);
        if z_threshold.is_nan() || z_threshold <= 0.0 {
            return Err(ConfigError(format!("z_threshold must be positive, got {z_threshold}")));
        }
        Ok(RunConfig {
            suite: args.suite.unwrap_or(Suite::All),
            q,
            t,
            depth,
            paths: args.paths,
            seed,
            out: args.out.unwrap_or_else(|| PathBuf::from("qbm-out")),
            format: args.format.unwrap_or(Format::Json),
            only: args.only,
            z_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::parse_from(std::iter::once("qbm").chain(list.iter().copied()))
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(args(&[]), None).unwrap();
        assert_eq!((c.q, c.t, c.seed, c.suite, c.format), (DEFAULT_Q, DEFAULT_T, DEFAULT_SEED, Suite::All, Format::Json));
        assert_eq!(c.depth, GeometricGrid::default_depth(DEFAULT_Q));
        assert_eq!((c.simulate_paths(), c.verify_paths()), (DEFAULT_SIMULATE_PATHS, DEFAULT_VERIFY_PATHS));
    }

    #[test]
    fn seed_precedence_is_flag_then_environment() {
        assert_eq!(RunConfig::resolve(args(&["--seed", "3"]), Some("9")).unwrap().seed, 3);
        assert_eq!(RunConfig::resolve(args(&[]), Some("9")).unwrap().seed, 9);
        assert!(RunConfig::resolve(args(&[]), Some("nine")).is_err());
    }

    #[test]
    fn invalid_q_is_rejected() {
        assert!(RunConfig::resolve(args(&["--q", "1.2"]), None).is_err());
        assert!(RunConfig::resolve(args(&["--q", "0"]), None).is_err());
    }

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# run\nq = 0.25\nt=2\nonly = wdw, recurrence\nformat=csv\n").unwrap();
        let c = RunConfig::resolve(args(&["--config", path.to_str().unwrap(), "--t", "3"]), None).unwrap();
        assert_eq!((c.q, c.t, c.format), (0.25, 3.0, Format::Csv));
        assert_eq!(c.only, Some(vec!["wdw".to_string(), "recurrence".to_string()]));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "colour=blue\n").unwrap();
        assert!(RunConfig::resolve(args(&["--config", path.to_str().unwrap()]), None).is_err());
    }
}
