//! The stochastic integral `int_0^t f(B_s, s) d-slash B_s` for polynomial
//! integrands, and the q-stochastic exponential.
//!
//! With `f = sum_m b_m(t) h_m(x; t) / [m]!` the integral is the sum of
//! Jackson–Stieltjes integrals
//!
//! `sum_m 1/[m+1]! int_0^t b_m(s) d_q h_{m+1}(B_s; s)`.
//!
//! On a path of depth `K` the Jackson sums run over `k = 0..K-1`, i.e. over
//! the cells `[t q^{k+1}, t q^k]` that the path resolves. The omitted part
//! over `[0, t q^K]` is bounded with the growth bound
//! `|h_n(x; s)| <= C_n s^{n/2}` on the support; every result carries that
//! bound.

use serde::{Deserialize, Serialize};

use crate::error::{QbmError, Result};
use crate::measures::support_half_width;
use crate::poly::Poly;
use crate::process::GeometricPath;
use crate::qcore::{q_factorials, QContext, Regularity, TimeFunction};
use crate::qhermite::{growth_constants, hermite_values, hermite_values_f64, to_hermite_basis, HermiteCoefficients, QPolynomial};
use crate::scalar::Scalar;

/// An integrand `f(x, t) = sum_m b_m(t) h_m(x; t) / [m]!` with polynomial
/// coefficients `b_m`; also used for degree-`d` prefixes of series.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialIntegrand<S> {
    coefficients: HermiteCoefficients<S>,
}

impl<S: Scalar> PolynomialIntegrand<S> {
    pub fn from_polynomial(f: &QPolynomial<S>, ctx: &QContext<S>) -> Self {
        PolynomialIntegrand { coefficients: to_hermite_basis(f, ctx) }
    }

    pub fn from_hermite(coefficients: HermiteCoefficients<S>) -> Self {
        PolynomialIntegrand { coefficients }
    }

    /// The degree-`d` prefix of `sum_n b_n h_n(x; t) / [n]!` with constant `b_n`.
    pub fn series_prefix(b: &[S]) -> Self {
        PolynomialIntegrand { coefficients: HermiteCoefficients::constants(b) }
    }

    pub fn coefficients(&self) -> &HermiteCoefficients<S> {
        &self.coefficients
    }

    pub fn degree(&self) -> Option<usize> {
        self.coefficients.degree()
    }

    pub fn to_f64(&self) -> PolynomialIntegrand<f64> {
        PolynomialIntegrand { coefficients: self.coefficients.to_f64() }
    }

    fn terms(&self) -> &[Poly<S>] {
        self.coefficients.b()
    }
}

/// `sum_m 1/[m+1]! sum_{k<K} b_m(t_k) (h_{m+1}(B_k; t_k) - h_{m+1}(B_{k+1}; t_{k+1}))`
/// for grid times `times[k] = t q^k` and values `values[k]`, in any scalar type.
pub fn def_sum<S: Scalar>(f: &PolynomialIntegrand<S>, times: &[S], values: &[S], ctx: &QContext<S>) -> Result<S> {
    check_grid(times, values)?;
    let Some(d) = f.degree() else { return Ok(S::zero()) };
    let fact = q_factorials(d + 1, ctx);
    let h: Vec<Vec<S>> = times.iter().zip(values).map(|(t, x)| hermite_values(x, t, ctx.q(), d + 1)).collect();
    let mut acc = S::zero();
    for (m, b) in f.terms().iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let mut term = S::zero();
        for k in 0..times.len() - 1 {
            term = term + b.eval(&times[k]) * (h[k][m + 1].clone() - h[k + 1][m + 1].clone());
        }
        acc = acc + term / fact[m + 1].clone();
    }
    Ok(acc)
}

/// `sum_m b_m(t) h_{m+1}(B_t; t)/[m+1]! - sum_m 1/[m+1]! sum_{k<K} h_{m+1}(B_{k+1}; t_{k+1}) (b_m(t_k) - b_m(t_{k+1}))`.
pub fn byparts_sum<S: Scalar>(f: &PolynomialIntegrand<S>, times: &[S], values: &[S], ctx: &QContext<S>) -> Result<S> {
    check_grid(times, values)?;
    let Some(d) = f.degree() else { return Ok(S::zero()) };
    let fact = q_factorials(d + 1, ctx);
    let h: Vec<Vec<S>> = times.iter().zip(values).map(|(t, x)| hermite_values(x, t, ctx.q(), d + 1)).collect();
    let mut acc = S::zero();
    for (m, b) in f.terms().iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let mut term = b.eval(&times[0]) * h[0][m + 1].clone();
        for k in 0..times.len() - 1 {
            term = term - h[k + 1][m + 1].clone() * (b.eval(&times[k]) - b.eval(&times[k + 1]));
        }
        acc = acc + term / fact[m + 1].clone();
    }
    Ok(acc)
}

fn check_grid<S>(times: &[S], values: &[S]) -> Result<()> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(QbmError::InvalidParameter(format!(
            "grid needs matching times and values of length >= 2, got {} and {}",
            times.len(),
            values.len()
        )));
    }
    Ok(())
}

/// A pathwise integral together with the bound on its omitted part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticIntegralResult {
    pub value: f64,
    /// Depth `K` of the grid the sums ran over.
    #[serde(rename = "K")]
    pub depth: usize,
    /// Bound on the contribution of `[0, t q^K]`.
    pub tail_bound: f64,
    pub seed: u64,
}

fn check_horizon(horizon: f64, path: &GeometricPath) -> Result<()> {
    let path_horizon = path.grid().horizon();
    if (horizon - path_horizon).abs() > 1e-12 * path_horizon.max(1.0) {
        return Err(QbmError::HorizonMismatch { integrand: horizon, path: path_horizon });
    }
    Ok(())
}

/// Total variation of a polynomial on `[0, h]`, bounded by `sum_{j>=1} |beta_j| h^j`.
fn variation_bound(b: &Poly<f64>, h: f64) -> f64 {
    b.coeffs().iter().enumerate().skip(1).map(|(j, c)| c.abs() * h.powi(j as i32)).sum()
}

struct FloatIntegrand {
    b: Vec<Poly<f64>>,
    fact: Vec<f64>,
    growth: Vec<f64>,
    q: f64,
}

impl FloatIntegrand {
    fn new(f: &PolynomialIntegrand<f64>, q: f64) -> Self {
        let d = f.degree().unwrap_or(0);
        let ctx = QContext::float(q).expect("validated q");
        FloatIntegrand { b: f.terms().to_vec(), fact: q_factorials(d + 1, &ctx), growth: growth_constants(d + 1, q), q }
    }

    fn hermite_rows(&self, path: &GeometricPath) -> Vec<Vec<f64>> {
        let n = self.b.len() + 1;
        path.rows()
            .map(|(_, t, x)| {
                let mut h = vec![0.0; n];
                hermite_values_f64(x, t, self.q, &mut h);
                h
            })
            .collect()
    }

    /// `sum_m C_{m+1} t_K^{(m+1)/2} (|b_m(t_K)| + var b_m) / [m+1]!`; with
    /// `include_boundary = false` the `|b_m(t_K)|` term is dropped.
    fn tail_bound(&self, t_k: f64, include_boundary: bool) -> f64 {
        self.b
            .iter()
            .enumerate()
            .map(|(m, b)| {
                let boundary = if include_boundary { b.eval(&t_k).abs() } else { 0.0 };
                self.growth[m + 1] * t_k.powf((m + 1) as f64 / 2.0) * (boundary + variation_bound(b, t_k)) / self.fact[m + 1]
            })
            .sum()
    }
}

/// The integral in its definition form on one simulated path.
pub fn integrate_def(
    f: &PolynomialIntegrand<f64>,
    path: &GeometricPath,
    horizon: f64,
    ctx: &QContext<f64>,
) -> Result<StochasticIntegralResult> {
    check_horizon(horizon, path)?;
    let fi = FloatIntegrand::new(f, ctx.q_f64());
    let h = fi.hermite_rows(path);
    let times = path.grid().times();
    let mut value = 0.0;
    for (m, b) in fi.b.iter().enumerate() {
        let mut term = 0.0;
        for k in 0..times.len() - 1 {
            term += b.eval(&times[k]) * (h[k][m + 1] - h[k + 1][m + 1]);
        }
        value += term / fi.fact[m + 1];
    }
    let depth = path.grid().depth();
    Ok(StochasticIntegralResult { value, depth, tail_bound: fi.tail_bound(path.grid().time(depth), true), seed: path.seed() })
}

/// The integral in its by-parts form on one simulated path.
pub fn integrate_byparts(
    f: &PolynomialIntegrand<f64>,
    path: &GeometricPath,
    horizon: f64,
    ctx: &QContext<f64>,
) -> Result<StochasticIntegralResult> {
    check_horizon(horizon, path)?;
    let fi = FloatIntegrand::new(f, ctx.q_f64());
    let h = fi.hermite_rows(path);
    let times = path.grid().times();
    let mut value = 0.0;
    for (m, b) in fi.b.iter().enumerate() {
        let mut term = b.eval(&times[0]) * h[0][m + 1];
        for k in 0..times.len() - 1 {
            term -= h[k + 1][m + 1] * (b.eval(&times[k]) - b.eval(&times[k + 1]));
        }
        value += term / fi.fact[m + 1];
    }
    let depth = path.grid().depth();
    Ok(StochasticIntegralResult { value, depth, tail_bound: fi.tail_bound(path.grid().time(depth), false), seed: path.seed() })
}

/// `int_0^t b(s) d_q B_s = sum_{k<K} b(t_k) (B_k - B_{k+1})` for a
/// deterministic integrand.
///
/// The omitted part is at most `2 sup|b| w_K / (1 - sqrt q)` with
/// `w_K = 2 sqrt(t_K) / sqrt(1-q)`; a Hölder declaration
/// `|b(s) - b(0)| <= C s^delta` sharpens it to
/// `w_K (|b(t_K)| + 2 C t_K^delta / (1 - q^delta))`.
pub fn deterministic_integral(b: &impl TimeFunction<f64>, path: &GeometricPath) -> Result<StochasticIntegralResult> {
    let grid = path.grid();
    let q = grid.q();
    let reg = b.regularity(grid.horizon());
    let sup = reg.sup().ok_or(QbmError::UnboundedIntegrand)?;
    let values = path.values();
    let value = (0..grid.depth()).map(|k| b.eval(&grid.time(k)) * (values[k] - values[k + 1])).sum();
    let t_k = grid.time(grid.depth());
    let w_k = support_half_width(t_k, q);
    let mut tail_bound = 2.0 * sup * w_k / (1.0 - q.sqrt());
    if let Regularity::Holder { c, delta, .. } = reg {
        if delta > 0.0 {
            let holder = w_k * (b.eval(&t_k).abs() + 2.0 * c * t_k.powf(delta) / (1.0 - q.powf(delta)));
            tail_bound = tail_bound.min(holder);
        }
    }
    Ok(StochasticIntegralResult { value, depth: grid.depth(), tail_bound, seed: path.seed() })
}

/// `1 / ((1-q) a^2)`, the horizon beyond which the stochastic exponential
/// stops being a martingale (infinite for `a = 0`).
pub fn exponential_radius(a: f64, q: f64) -> f64 {
    if a == 0.0 {
        f64::INFINITY
    } else {
        1.0 / ((1.0 - q) * a * a)
    }
}

/// `c prod_k (1 - (1-q) a q^k x + (1-q) a^2 t q^{2k})^{-1}`, the solution of
/// `Z = c + a int Z d-slash B` evaluated at `B_t = x`.
///
/// The factor `(1-q)` multiplying `a^2 t` makes the product the generating
/// function of `sum_n a^n h_n(x; t) / [n]!`; the product is truncated once
/// both corrections fall below `prod_eps`.
pub fn stochastic_exponential(a: f64, c: f64, x: f64, t: f64, ctx: &QContext<f64>) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(QbmError::InvalidParameter(format!("horizon must be non-negative, got {t}")));
    }
    let q = ctx.q_f64();
    let lin = (1.0 - q) * a * x;
    let quad = (1.0 - q) * a * a * t;
    let mut prod = 1.0;
    let (mut qk, mut q2k) = (1.0, 1.0);
    while qk * lin.abs().max(quad) >= ctx.prod_eps() || qk == 1.0 {
        let factor = 1.0 - lin * qk + quad * q2k;
        if !(factor > 0.0) {
            return Err(QbmError::OutsideSupport { x, time: t, half_width: support_half_width(t, q) });
        }
        prod *= factor;
        qk *= q;
        q2k *= q * q;
    }
    Ok(c / prod)
}

/// The degree-`d` partial sum `c sum_{n<=d} a^n h_n(x; t) / [n]!`.
pub fn stochastic_exponential_series(a: f64, c: f64, x: f64, t: f64, d: usize, ctx: &QContext<f64>) -> f64 {
    let mut h = vec![0.0; d + 1];
    hermite_values_f64(x, t, ctx.q_f64(), &mut h);
    let fact = q_factorials(d, ctx);
    let mut a_n = 1.0;
    let mut acc = 0.0;
    for (hn, f) in h.iter().zip(&fact) {
        acc += a_n * hn / f;
        a_n *= a;
    }
    c * acc
}

/// `sum_{n > d} b_n^2 t^{n+1} / [n+1]!` over `n <= n_max`: the increment of
/// the isometry norm beyond a degree-`d` prefix with constant coefficients.
pub fn series_tail_estimate(b: impl Fn(usize) -> f64, d: usize, n_max: usize, t: f64, ctx: &QContext<f64>) -> f64 {
    let fact = q_factorials(n_max + 1, ctx);
    (d + 1..=n_max).map(|n| b(n).powi(2) * t.powi(n as i32 + 1) / fact[n + 1]).sum()
}

/// Residual of `Z_t = c + a int_0^t Z_s d-slash B_s` on one path, with the
/// integrand replaced by its degree-`d` prefix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeResidual {
    pub value: f64,
    /// Bound on `c sum_{n > d+1} |a|^n |h_n(B_t; t)| / [n]!`.
    pub series_tail: f64,
    /// Bound on `c sum_{1 <= n <= d+1} |a|^n |h_n(B_K; t_K)| / [n]!`.
    pub grid_tail: f64,
    pub degree: usize,
    #[serde(rename = "K")]
    pub depth: usize,
    pub seed: u64,
}

/// `|Z_t - c - a int Z^{(d)} d-slash B|` where `Z^{(d)}` is the degree-`d`
/// prefix of the series and `Z_t` the product form.
pub fn sde_residual(a: f64, c: f64, d: usize, path: &GeometricPath, ctx: &QContext<f64>) -> Result<SdeResidual> {
    let grid = path.grid();
    let t = grid.horizon();
    let q = ctx.q_f64();
    let radius = exponential_radius(a, q);
    if !(t < radius) {
        return Err(QbmError::OutsideRadius { t, radius });
    }
    let z_t = stochastic_exponential(a, c, path.terminal(), t, ctx)?;
    let mut b = Vec::with_capacity(d + 1);
    let mut a_n = c;
    for _ in 0..=d {
        b.push(a_n);
        a_n *= a;
    }
    let integral = integrate_def(&PolynomialIntegrand::series_prefix(&b), path, t, ctx)?;
    let value = (z_t - c - a * integral.value).abs();

    // Series tail: terms n = d+2 .. until they are negligible.
    let n_max = d + 2 + 400;
    let growth = growth_constants(n_max, q);
    let fact = q_factorials(n_max, ctx);
    let term = |n: usize, s: f64| c.abs() * a.abs().powi(n as i32) * growth[n] * s.powf(n as f64 / 2.0) / fact[n];
    let series_tail = (d + 2..=n_max).map(|n| term(n, t)).sum();
    let t_k = grid.time(grid.depth());
    let grid_tail = (1..=d + 1).map(|n| term(n, t_k)).sum();
    Ok(SdeResidual { value, series_tail, grid_tail, degree: d, depth: grid.depth(), seed: path.seed() })
}
