//! Monte Carlo checks: path statistics whose expectations are known in
//! closed form.

use std::collections::BTreeMap;

use super::{oracle_ez2, oracle_ez4, params, McEstimate, VerificationReport, Z_THRESHOLD};
use crate::error::{QbmError, Result};
use crate::process::{GeometricGrid, GeometricPath, PathSimulator};
use crate::qcore::{jackson_integral, q_factorial, q_factorials, QContext};
use crate::qhermite::{hermite_values_f64, QPolynomial};
use crate::scalar::Scalar;
use crate::stochint::{exponential_radius, integrate_def, stochastic_exponential, PolynomialIntegrand};

/// Offset between the first seed and the seed of the single rerun.
pub const RERUN_SEED_OFFSET: u64 = 1 << 40;

/// Names accepted by [`mc_moment`].
pub const MC_CHECKS: &[&str] = &[
    "ez2",
    "ez4",
    "increment-4th",
    "cross-22",
    "cross-13",
    "exponential-mean",
    "martingale-grid",
    "hermite-increment-2nd",
    "hermite-increment-cov",
];

type Statistic = Box<dyn Fn(&GeometricPath) -> f64 + Send + Sync>;

/// A statistic of one path together with the oracle for its mean.
pub struct McCheck {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub oracle: f64,
    statistic: Statistic,
    note: Option<String>,
}

/// Index `k` with `t q^k = time` on `grid`.
pub fn grid_index(grid: &GeometricGrid, time: f64) -> Result<usize> {
    (0..=grid.depth())
        .find(|&k| (grid.time(k) - time).abs() <= 1e-12 * grid.horizon())
        .ok_or_else(|| QbmError::InvalidParameter(format!("time {time} is not on the grid {} q^k", grid.horizon())))
}

/// `E[(int f d-slash B)^2] = sum_m 1/[m]! int_0^t b_m(s)^2 s^m d_q s`.
pub fn isometry_oracle<S: Scalar>(f: &PolynomialIntegrand<S>, t: &S, ctx: &QContext<S>) -> Result<S> {
    let b = f.coefficients().b();
    let fact = q_factorials(b.len(), ctx);
    let mut acc = S::zero();
    for (m, bm) in b.iter().enumerate() {
        let integrand = (bm * bm).shift(m);
        acc = acc + jackson_integral(&integrand, t, ctx)? / fact[m].clone();
    }
    Ok(acc)
}

/// The same expectation for the integral truncated to the cells `k < K`.
pub fn isometry_oracle_truncated(f: &PolynomialIntegrand<f64>, grid: &GeometricGrid, ctx: &QContext<f64>) -> f64 {
    let b = f.coefficients().b();
    let fact = q_factorials(b.len(), ctx);
    let q = grid.q();
    (0..grid.depth())
        .map(|k| {
            let s = grid.time(k);
            let cell: f64 = b.iter().enumerate().map(|(m, bm)| bm.eval(&s).powi(2) * s.powi(m as i32) / fact[m]).sum();
            (1.0 - q) * s * cell
        })
        .sum()
}

fn z_series(path: &GeometricPath, r: f64) -> f64 {
    let grid = path.grid();
    let v = path.values();
    (0..grid.depth()).map(|k| grid.q().powf(k as f64 * r) * (v[k] - v[k + 1])).sum()
}

fn require_unit_horizon(grid: &GeometricGrid) -> Result<()> {
    if (grid.horizon() - 1.0).abs() > 1e-12 {
        return Err(QbmError::InvalidParameter(format!("this check needs horizon 1, got {}", grid.horizon())));
    }
    Ok(())
}

impl McCheck {
    pub fn new(
        name: &str,
        params: BTreeMap<String, f64>,
        oracle: f64,
        statistic: impl Fn(&GeometricPath) -> f64 + Send + Sync + 'static,
    ) -> Self {
        McCheck { name: name.into(), params, oracle, statistic: Box::new(statistic), note: None }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }

    pub fn evaluate(&self, path: &GeometricPath) -> f64 {
        (self.statistic)(path)
    }

    /// Second moment of `int_0^T f d-slash B` against the isometry.
    pub fn isometry(label: &str, f: &QPolynomial<f64>, grid: &GeometricGrid, ctx: &QContext<f64>) -> Result<Self> {
        let t = grid.horizon();
        let integrand = PolynomialIntegrand::from_polynomial(f, ctx);
        let oracle = isometry_oracle(&integrand, &t, ctx)?;
        let bias = oracle - isometry_oracle_truncated(&integrand, grid, ctx);
        let c = ctx.clone();
        let name = format!("isometry-{label}");
        Ok(McCheck::new(&name, params(&[("q", grid.q()), ("t", t), ("K", grid.depth() as f64)]), oracle, move |p| {
            integrate_def(&integrand, p, t, &c).map(|r| r.value * r.value).unwrap_or(f64::NAN)
        })
        .with_note(format!("truncation bias {bias:.3e}")))
    }

    /// `E(Z^2)` for `Z = int_0^1 s^r d-slash B`.
    pub fn ez2(r: f64, grid: &GeometricGrid) -> Result<Self> {
        require_unit_horizon(grid)?;
        let q = grid.q();
        let bias = q.powf(grid.depth() as f64 * (2.0 * r + 1.0)) * oracle_ez2(r, q);
        Ok(McCheck::new("ez2", params(&[("q", q), ("r", r), ("K", grid.depth() as f64)]), oracle_ez2(r, q), move |p| {
            z_series(p, r).powi(2)
        })
        .with_note(format!("truncation bias {bias:.3e}")))
    }

    /// `E(Z^4)` for `Z = int_0^1 s^r d-slash B`.
    pub fn ez4(r: f64, grid: &GeometricGrid) -> Result<Self> {
        require_unit_horizon(grid)?;
        let q = grid.q();
        Ok(McCheck::new("ez4", params(&[("q", q), ("r", r), ("K", grid.depth() as f64)]), oracle_ez4(r, q), move |p| {
            z_series(p, r).powi(4)
        }))
    }

    /// `E[(B_t - B_s)^4] = (t-s)((q+2)t - 3qs)` for grid times `s < t`.
    pub fn increment_fourth(t: f64, s: f64, grid: &GeometricGrid) -> Result<Self> {
        let (it, is) = (grid_index(grid, t)?, grid_index(grid, s)?);
        if !(s < t) {
            return Err(QbmError::InvalidParameter(format!("increment needs s < t, got s = {s}, t = {t}")));
        }
        let q = grid.q();
        let oracle = (t - s) * ((q + 2.0) * t - 3.0 * q * s);
        Ok(McCheck::new("increment-4th", params(&[("q", q), ("t", t), ("s", s)]), oracle, move |p| {
            (p.value(it) - p.value(is)).powi(4)
        }))
    }

    fn cross_indices(grid: &GeometricGrid, times: [f64; 4]) -> Result<[usize; 4]> {
        let [t1, t2, u1, u2] = times;
        if !(t1 < t2 && t2 <= u1 && u1 < u2) {
            return Err(QbmError::InvalidParameter(format!("cross moments need t1 < t2 <= u1 < u2, got {times:?}")));
        }
        Ok([grid_index(grid, t1)?, grid_index(grid, t2)?, grid_index(grid, u1)?, grid_index(grid, u2)?])
    }

    /// `E[(B_{t2} - B_{t1})^2 (B_{u2} - B_{u1})^2] = (u2-u1)(t2-t1)`.
    pub fn cross22(times: [f64; 4], grid: &GeometricGrid) -> Result<Self> {
        let [a, b, c, d] = Self::cross_indices(grid, times)?;
        let [t1, t2, u1, u2] = times;
        let p = params(&[("q", grid.q()), ("t1", t1), ("t2", t2), ("u1", u1), ("u2", u2)]);
        Ok(McCheck::new("cross-22", p, (u2 - u1) * (t2 - t1), move |path| {
            (path.value(b) - path.value(a)).powi(2) * (path.value(d) - path.value(c)).powi(2)
        }))
    }

    /// `E[(B_{t2} - B_{t1}) (B_{u2} - B_{u1})^3] = -(1-q)(u2-u1)(t2-t1)`.
    pub fn cross13(times: [f64; 4], grid: &GeometricGrid) -> Result<Self> {
        let [a, b, c, d] = Self::cross_indices(grid, times)?;
        let [t1, t2, u1, u2] = times;
        let q = grid.q();
        let p = params(&[("q", q), ("t1", t1), ("t2", t2), ("u1", u1), ("u2", u2)]);
        Ok(McCheck::new("cross-13", p, -(1.0 - q) * (u2 - u1) * (t2 - t1), move |path| {
            (path.value(b) - path.value(a)) * (path.value(d) - path.value(c)).powi(3)
        }))
    }

    /// `E[Z_T] = c` for the stochastic exponential inside its radius.
    pub fn exponential_mean(a: f64, c: f64, grid: &GeometricGrid, ctx: &QContext<f64>) -> Result<Self> {
        let t = grid.horizon();
        let radius = exponential_radius(a, grid.q());
        if !(t < radius) {
            return Err(QbmError::OutsideRadius { t, radius });
        }
        let ctx = ctx.clone();
        Ok(McCheck::new("exponential-mean", params(&[("q", grid.q()), ("t", t), ("a", a), ("c", c)]), c, move |p| {
            stochastic_exponential(a, c, p.terminal(), t, &ctx).unwrap_or(f64::NAN)
        }))
    }

    /// `E[(B_{t_k} - B_{t_{k+1}}) B_{t_{k+1}}] = 0`: the regression of a
    /// later value on an earlier one has slope one and no residual trend.
    pub fn martingale_grid(k: usize, grid: &GeometricGrid) -> Result<Self> {
        if k >= grid.depth() {
            return Err(QbmError::InvalidParameter(format!("grid index {k} has no earlier neighbour")));
        }
        Ok(McCheck::new("martingale-grid", params(&[("q", grid.q()), ("k", k as f64)]), 0.0, move |p| {
            let (later, earlier) = (p.value(k), p.value(k + 1));
            (later - earlier) * (earlier + earlier.powi(3))
        }))
    }

    /// `E[(h_n(B_t; t) - h_n(B_s; s))^2] = [n]! (t^n - s^n)`.
    pub fn hermite_increment_second(n: usize, t: f64, s: f64, grid: &GeometricGrid, ctx: &QContext<f64>) -> Result<Self> {
        let (it, is) = (grid_index(grid, t)?, grid_index(grid, s)?);
        let q = grid.q();
        let oracle = q_factorial(n, ctx) * (t.powi(n as i32) - s.powi(n as i32));
        Ok(McCheck::new("hermite-increment-2nd", params(&[("q", q), ("n", n as f64), ("t", t), ("s", s)]), oracle, move |p| {
            let h = |x: f64, time: f64| {
                let mut v = vec![0.0; n + 1];
                hermite_values_f64(x, time, q, &mut v);
                v[n]
            };
            (h(p.value(it), t) - h(p.value(is), s)).powi(2)
        }))
    }

    /// Increments of `h_n(B_s; s)` over the disjoint cells `[t1, t2]` and
    /// `[u1, u2]` are uncorrelated.
    pub fn hermite_increment_cov(n: usize, times: [f64; 4], grid: &GeometricGrid) -> Result<Self> {
        let [a, b, c, d] = Self::cross_indices(grid, times)?;
        let q = grid.q();
        let [t1, t2, u1, u2] = times;
        let p = params(&[("q", q), ("n", n as f64), ("t1", t1), ("t2", t2), ("u1", u1), ("u2", u2)]);
        Ok(McCheck::new("hermite-increment-cov", p, 0.0, move |path| {
            let h = |k: usize, time: f64| {
                let mut v = vec![0.0; n + 1];
                hermite_values_f64(path.value(k), time, q, &mut v);
                v[n]
            };
            (h(b, t2) - h(a, t1)) * (h(d, u2) - h(c, u1))
        }))
    }
}

/// Runs a set of checks on one shared batch of paths.
pub struct McRunner {
    simulator: PathSimulator,
    n_paths: usize,
    seed: u64,
    threshold: f64,
}

impl McRunner {
    pub fn new(grid: GeometricGrid, ctx: &QContext<f64>, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths < 2 {
            return Err(QbmError::InvalidParameter(format!("Monte Carlo needs at least 2 paths, got {n_paths}")));
        }
        Ok(McRunner { simulator: PathSimulator::new(grid, ctx)?, n_paths, seed, threshold: Z_THRESHOLD })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn grid(&self) -> &GeometricGrid {
        self.simulator.grid()
    }

    fn estimates(&self, checks: &[&McCheck], seed: u64) -> Result<Vec<McEstimate>> {
        let rows = self.simulator.map_batch(self.n_paths, seed, |p| checks.iter().map(|c| c.evaluate(p)).collect::<Vec<_>>())?;
        (0..checks.len())
            .map(|j| {
                let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                McEstimate::from_samples(&column, checks[j].oracle, seed)
            })
            .collect()
    }

    /// One report per check. Checks that miss the threshold are rerun once,
    /// on a fresh batch with seed `seed + RERUN_SEED_OFFSET`, and the rerun
    /// decides.
    pub fn run(&self, checks: &[McCheck]) -> Result<Vec<VerificationReport>> {
        let all: Vec<&McCheck> = checks.iter().collect();
        let first = self.estimates(&all, self.seed)?;
        let failing: Vec<usize> = (0..checks.len()).filter(|&j| !first[j].passes(self.threshold)).collect();
        let mut reruns = vec![None; checks.len()];
        if !failing.is_empty() {
            let subset: Vec<&McCheck> = failing.iter().map(|&j| &checks[j]).collect();
            let second = self.estimates(&subset, self.seed.wrapping_add(RERUN_SEED_OFFSET))?;
            for (&j, est) in failing.iter().zip(second) {
                reruns[j] = Some(est);
            }
        }
        Ok(checks
            .iter()
            .zip(first)
            .zip(reruns)
            .map(|((c, est), rerun)| {
                let report = VerificationReport::monte_carlo(&c.name, c.params.clone(), est, rerun, self.threshold);
                match &c.note {
                    Some(n) => report.with_note(n.clone()),
                    None => report,
                }
            })
            .collect())
    }
}

/// `E[(int_0^t f d-slash B)^2]` by Monte Carlo against the isometry.
pub fn mc_isometry(f: &QPolynomial<f64>, t: f64, q: f64, n_paths: usize, seed: u64) -> Result<VerificationReport> {
    let ctx = QContext::float(q)?;
    let grid = GeometricGrid::with_default_depth(t, q)?;
    let check = McCheck::isometry("f", f, &grid, &ctx)?;
    Ok(McRunner::new(grid, &ctx, n_paths, seed)?.run(&[check])?.remove(0))
}

fn param(p: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    p.get(key)
        .copied()
        .or(default)
        .ok_or_else(|| QbmError::InvalidParameter(format!("missing parameter `{key}`")))
}

/// A registered moment check by name, on its own batch of paths.
///
/// Times must lie on the grid `T q^k` where `T` is the largest time given
/// (or `t`, default 1); `q` defaults to 1/2.
pub fn mc_moment(name: &str, p: &BTreeMap<String, f64>, n_paths: usize, seed: u64) -> Result<VerificationReport> {
    if !MC_CHECKS.contains(&name) {
        return Err(QbmError::UnknownCheck(name.to_string()));
    }
    let q = param(p, "q", Some(0.5))?;
    let ctx = QContext::float(q)?;
    let horizon = ["t", "u2"].iter().filter_map(|k| p.get(*k).copied()).fold(1.0f64, f64::max);
    let grid = GeometricGrid::with_default_depth(horizon, q)?;
    let cross = || -> Result<[f64; 4]> {
        Ok([param(p, "t1", None)?, param(p, "t2", None)?, param(p, "u1", None)?, param(p, "u2", None)?])
    };
    let check = match name {
        "ez2" => McCheck::ez2(param(p, "r", Some(0.0))?, &grid)?,
        "ez4" => McCheck::ez4(param(p, "r", Some(0.0))?, &grid)?,
        "increment-4th" => McCheck::increment_fourth(param(p, "t", Some(1.0))?, param(p, "s", None)?, &grid)?,
        "cross-22" => McCheck::cross22(cross()?, &grid)?,
        "cross-13" => McCheck::cross13(cross()?, &grid)?,
        "exponential-mean" => McCheck::exponential_mean(param(p, "a", None)?, param(p, "c", Some(1.0))?, &grid, &ctx)?,
        "martingale-grid" => McCheck::martingale_grid(param(p, "k", Some(0.0))? as usize, &grid)?,
        "hermite-increment-2nd" => {
            McCheck::hermite_increment_second(param(p, "n", None)? as usize, param(p, "t", Some(1.0))?, param(p, "s", None)?, &grid, &ctx)?
        }
        "hermite-increment-cov" => McCheck::hermite_increment_cov(param(p, "n", None)? as usize, cross()?, &grid)?,
        _ => unreachable!("registered names are handled above"),
    };
    Ok(McRunner::new(grid, &ctx, n_paths, seed)?.run(&[check])?.remove(0))
}

/// The full Monte Carlo suite: the isometry for `f in {1, x, x^2, x^3}` at
/// `q in {0.2, 0.5, 0.8}`, and at `q = 1/2` the moments of
/// `int s^r d-slash B`, increment and cross moments, the stochastic
/// exponential, the martingale property on the grid and q-Hermite
/// increments. One batch of paths per `q` serves all its checks.
pub fn mc_suite(n_paths: usize, seed: u64, threshold: f64) -> Result<Vec<VerificationReport>> {
    let mut reports = Vec::new();
    for q in [0.2, 0.5, 0.8] {
        let ctx = QContext::float(q)?;
        let grid = GeometricGrid::with_default_depth(1.0, q)?;
        let mut checks = Vec::new();
        for (k, label) in ["1", "x", "x2", "x3"].iter().enumerate() {
            checks.push(McCheck::isometry(label, &QPolynomial::x_pow(k), &grid, &ctx)?);
        }
        if q == 0.5 {
            for r in [0.0, 0.5, 1.0] {
                checks.push(McCheck::ez2(r, &grid)?);
                checks.push(McCheck::ez4(r, &grid)?);
            }
            checks.push(McCheck::increment_fourth(1.0, 0.5, &grid)?);
            let cells = [0.125, 0.25, 0.5, 1.0];
            checks.push(McCheck::cross22(cells, &grid)?);
            checks.push(McCheck::cross13(cells, &grid)?);
            checks.push(McCheck::exponential_mean(0.5, 1.0, &grid, &ctx)?);
            checks.push(McCheck::martingale_grid(0, &grid)?);
            checks.push(McCheck::martingale_grid(3, &grid)?);
            checks.push(McCheck::hermite_increment_second(3, 1.0, 0.25, &grid, &ctx)?);
            checks.push(McCheck::hermite_increment_cov(2, cells, &grid)?);
        }
        reports.extend(McRunner::new(grid, &ctx, n_paths, seed)?.with_threshold(threshold).run(&checks)?);
    }
    Ok(reports)
}
