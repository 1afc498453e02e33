//! Convergence of the q-Ito formula and of the stochastic-exponential
//! equation with grid depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{params, VerificationReport};
use crate::error::Result;
use crate::poly::Poly;
use crate::process::{GeometricGrid, PathSimulator};
use crate::qcore::QContext;
use crate::qhermite::QPolynomial;
use crate::qito::ito_residual;
use crate::stochint::sde_residual;

/// Grid depths of the q-Ito convergence study.
pub const ITO_DEPTHS: [usize; 3] = [20, 40, 80];

/// Residuals of one formula over a set of paths and grid depths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItoStudy {
    pub name: String,
    pub q: f64,
    pub horizon: f64,
    pub depths: Vec<usize>,
    /// Number of (path, function) pairs per depth.
    pub cases: usize,
    pub seed: u64,
    /// Mean residual at each depth.
    pub mean_residual: Vec<f64>,
    /// Largest residual at each depth.
    pub max_residual: Vec<f64>,
    /// Largest `residual / bound` at each depth.
    pub max_bound_ratio: Vec<f64>,
    /// Cases whose residual exceeds its bound, at each depth.
    pub violations: Vec<usize>,
}

impl ItoStudy {
    fn new(name: &str, q: f64, horizon: f64, depths: &[usize], seed: u64) -> Self {
        let n = depths.len();
        ItoStudy {
            name: name.into(),
            q,
            horizon,
            depths: depths.to_vec(),
            cases: 0,
            seed,
            mean_residual: vec![0.0; n],
            max_residual: vec![0.0; n],
            max_bound_ratio: vec![0.0; n],
            violations: vec![0; n],
        }
    }

    fn record(&mut self, i: usize, residual: f64, bound: f64) {
        self.mean_residual[i] += residual;
        self.max_residual[i] = self.max_residual[i].max(residual);
        self.max_bound_ratio[i] = self.max_bound_ratio[i].max(residual / bound.max(f64::MIN_POSITIVE));
        if residual > bound {
            self.violations[i] += 1;
        }
    }

    fn finish(mut self, cases: usize) -> Self {
        self.cases = cases;
        for m in &mut self.mean_residual {
            *m /= cases.max(1) as f64;
        }
        self
    }

    /// Whether the mean residual strictly decreases along the depths.
    pub fn decreasing(&self) -> bool {
        self.mean_residual.windows(2).all(|w| w[1] < w[0])
    }

    /// Whether every residual stays within its bound.
    pub fn within_bounds(&self) -> bool {
        self.violations.iter().all(|&v| v == 0)
    }

    /// One report per depth for the bound, plus one for the decrease.
    pub fn reports(&self) -> Vec<VerificationReport> {
        let mut out: Vec<VerificationReport> = self
            .depths
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let p = params(&[("q", self.q), ("t", self.horizon), ("K", k as f64), ("cases", self.cases as f64)]);
                VerificationReport::bounded(&format!("{}-bound", self.name), p, self.max_bound_ratio[i], 1.0).with_note(format!(
                    "mean residual {:e}, max residual {:e}, {} of {} cases above bound",
                    self.mean_residual[i], self.max_residual[i], self.violations[i], self.cases
                ))
            })
            .collect();
        let p = params(&[("q", self.q), ("t", self.horizon), ("cases", self.cases as f64)]);
        let means = self.mean_residual.iter().map(|m| format!("{m:e}")).collect::<Vec<_>>().join(" > ");
        let mut decrease = VerificationReport::deterministic(
            &format!("{}-decrease", self.name),
            p,
            1.0,
            if self.decreasing() { 1.0 } else { 0.0 },
            0.0,
        );
        decrease = decrease.with_note(format!("mean residual by depth {:?}: {means}", self.depths));
        out.push(decrease);
        out
    }
}

/// A polynomial `sum_{j <= d} c_j(t) x^j` with `d <= max_degree`, and time
/// coefficients of degree at most 1 with entries uniform on `[-1, 1]`.
fn random_polynomial(rng: &mut impl Rng, max_degree: usize) -> QPolynomial<f64> {
    let degree = rng.random_range(0..=max_degree);
    QPolynomial::monomial(
        (0..=degree).map(|_| Poly::from_coeffs(vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])).collect(),
    )
}

/// The q-Ito residual for `n_polys` random polynomials of degree at most 6
/// on `n_paths` seeded paths, at every depth of [`ITO_DEPTHS`] (each
/// shallower path is a prefix of the deepest one).
pub fn ito_convergence_study(q: f64, horizon: f64, n_paths: usize, n_polys: usize, seed: u64) -> Result<ItoStudy> {
    let ctx = QContext::float(q)?;
    let deepest = *ITO_DEPTHS.iter().max().unwrap_or(&0);
    let sim = PathSimulator::new(GeometricGrid::new(horizon, q, deepest)?, &ctx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys: Vec<QPolynomial<f64>> = (0..n_polys).map(|_| random_polynomial(&mut rng, 6)).collect();
    let mut study = ItoStudy::new("ito-residual", q, horizon, &ITO_DEPTHS, seed);
    for path in sim.batch(n_paths, seed)? {
        for (i, &k) in ITO_DEPTHS.iter().enumerate() {
            let truncated = path.truncate(k)?;
            for f in &polys {
                let r = ito_residual(f, &truncated, &ctx, None)?;
                study.record(i, r.value, r.tail_bound + r.rounding_bound);
            }
        }
    }
    Ok(study.finish(n_paths * n_polys))
}

/// Residual of `Z = c + a int Z d-slash B` for the degree-`degree` prefix
/// of the stochastic exponential, on `n_paths` seeded paths at each depth.
#[allow(clippy::too_many_arguments)]
pub fn sde_convergence_study(
    a: f64,
    c: f64,
    q: f64,
    horizon: f64,
    degree: usize,
    depths: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<ItoStudy> {
    let ctx = QContext::float(q)?;
    let deepest = *depths.iter().max().unwrap_or(&0);
    let sim = PathSimulator::new(GeometricGrid::new(horizon, q, deepest)?, &ctx)?;
    let mut study = ItoStudy::new("sde-residual", q, horizon, depths, seed);
    for path in sim.batch(n_paths, seed)? {
        for (i, &k) in depths.iter().enumerate() {
            let r = sde_residual(a, c, degree, &path.truncate(k)?, &ctx)?;
            // The sums themselves round at the level of eps times the terms.
            let rounding = 64.0 * f64::EPSILON * (k as f64 + 1.0) * c.abs().max(1.0);
            study.record(i, r.value, r.series_tail + r.grid_tail + rounding);
        }
    }
    Ok(study.finish(n_paths))
}
