//! The operators of the q-Ito formula
//!
//! `f(B_t, t) - f(0, 0) = int (nabla f)(B_s, s) d-slash B_s
//!     + int (D_{q,s} f)(B_{qs}, s) d_q s + int (Delta f)(B_{qs}, s) d_q s`.
//!
//! `nabla` and `Delta` are exact on polynomials through the q-Hermite basis
//! (`nabla h_{m+1}(.; s) = [m+1] h_m(.; s)`, and `Delta` built from the
//! auxiliary operator `A h_m(.; s) = [m] h_{m-1}(.; qs)`). The numeric
//! versions integrate first and second divided differences against the
//! kernels `nu_{x,s} = P_{q^2 s, s}(qx, .)` and
//! `mu_{x,s}(dy, dz) = P_{qs, s}(x, dy) nu_{y,s}(dz)`; they exist to check
//! that the kernel definitions and the algebra agree.

use serde::{Deserialize, Serialize};

use crate::error::{QbmError, Result};
use crate::measures::{integrate, support_half_width, DensitySpec, Integral, QuadratureOptions};
use crate::poly::Poly;
use crate::process::GeometricPath;
use crate::qcore::{q_int, QContext};
use crate::qhermite::{hermite_table, Basis, QPolynomial};
use crate::scalar::Scalar;
use crate::stochint::{def_sum, integrate_def, PolynomialIntegrand};

/// `nabla` in `x` at fixed time: `h_{m+1}(x; s) -> [m+1] h_m(x; s)`.
/// The result is in the monomial basis.
pub fn nabla_exact<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> QPolynomial<S> {
    let h = f.to_hermite(ctx);
    let lowered = h
        .coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, c)| c.scale(&q_int(m, ctx)))
        .collect();
    QPolynomial::new(Basis::Hermite, lowered).to_monomial(ctx)
}

/// The auxiliary operator `A h_m(x; s) = [m] h_{m-1}(x; qs)`; the time
/// argument of the output polynomials is `s`.
pub fn a_operator<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> QPolynomial<S> {
    let h = f.to_hermite(ctx);
    let Some(d) = h.degree() else { return QPolynomial::zero() };
    let table = hermite_table(d.saturating_sub(1), ctx);
    h.coeffs().iter().enumerate().skip(1).fold(QPolynomial::zero(), |acc, (m, c)| {
        let shifted = table[m - 1].scale_time(ctx.q());
        acc.add(&shifted.mul_time(&c.scale(&q_int(m, ctx))))
    })
}

/// `Delta` in `x` at fixed time: `Delta(x^n) = sum_{k<n} x^k A(x^{n-k-1})`,
/// extended linearly over the time-dependent coefficients.
pub fn delta_exact<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> QPolynomial<S> {
    let f = f.to_monomial(ctx);
    let Some(d) = f.degree() else { return QPolynomial::zero() };
    let a_of_powers: Vec<_> = (0..d).map(|j| a_operator(&QPolynomial::x_pow(j), ctx)).collect();
    let mut out = QPolynomial::zero();
    for (n, c) in f.coeffs().iter().enumerate().skip(2) {
        if c.is_zero() {
            continue;
        }
        let mut delta_n = QPolynomial::zero();
        for k in 0..n {
            let mut term = a_of_powers[n - k - 1].clone();
            for _ in 0..k {
                term = term.mul_x();
            }
            delta_n = delta_n.add(&term);
        }
        out = out.add(&delta_n.mul_time(c));
    }
    out
}

/// The operator `D(x^n) = -sum_j a_j(s) D_{q,s} h_j(x; s)` where
/// `x^n = sum_j a_j(s) h_j(x; s)` and the `a_j` are held fixed; it agrees
/// with [`delta_exact`] on polynomials.
pub fn d_operator<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> QPolynomial<S> {
    let f = f.to_monomial(ctx);
    let Some(d) = f.degree() else { return QPolynomial::zero() };
    let table = hermite_table(d, ctx);
    let dh: Vec<_> = table.iter().map(|h| h.q_derivative_time(ctx)).collect();
    let mut out = QPolynomial::zero();
    for (n, c) in f.coeffs().iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let expansion = QPolynomial::x_pow(n).to_hermite(ctx);
        let d_n = expansion
            .coeffs()
            .iter()
            .zip(&dh)
            .fold(QPolynomial::zero(), |acc, (a, dhj)| acc.sub(&dhj.mul_time(a)));
        out = out.add(&d_n.mul_time(c));
    }
    out
}

/// `D_{q,s} f`, the Jackson derivative in the time variable.
pub fn time_derivative<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> QPolynomial<S> {
    f.to_monomial(ctx).q_derivative_time(ctx)
}

/// A function of the space variable at a fixed time, as seen by the numeric
/// operators.
pub trait SpaceFunction {
    fn eval(&self, x: f64) -> f64;

    /// Monomial coefficients, when the function is a polynomial; used for
    /// exact divided differences at coincident points.
    fn as_poly(&self) -> Option<&[f64]> {
        None
    }
}

/// A polynomial `sum_j c_j x^j` with fixed coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacePolynomial(pub Vec<f64>);

impl SpacePolynomial {
    /// `f(., s)` for a time-dependent polynomial.
    pub fn at_time(f: &QPolynomial<f64>, s: f64, ctx: &QContext<f64>) -> Self {
        SpacePolynomial(f.to_monomial(ctx).at_time(&s))
    }
}

impl SpaceFunction for SpacePolynomial {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn as_poly(&self) -> Option<&[f64]> {
        Some(&self.0)
    }
}

/// Any closure `x -> f(x)`.
pub struct SpaceFn<F>(pub F);

impl<F: Fn(f64) -> f64> SpaceFunction for SpaceFn<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// `sum_n c_n sum_{a+b=n-1} x^a y^b`, the first divided difference of a polynomial.
fn poly_divided_difference(c: &[f64], x: f64, y: f64) -> f64 {
    let mut total = 0.0;
    for (n, &cn) in c.iter().enumerate().skip(1) {
        let mut h = 0.0;
        let mut xa = 1.0;
        for a in 0..n {
            h += xa * y.powi((n - 1 - a) as i32);
            xa *= x;
        }
        total += cn * h;
    }
    total
}

/// `sum_n c_n sum_{a+b+e=n-2} x^a y^b z^e`, the second divided difference.
fn poly_second_divided_difference(c: &[f64], x: f64, y: f64, z: f64) -> f64 {
    let mut total = 0.0;
    for (n, &cn) in c.iter().enumerate().skip(2) {
        let m = n - 2;
        let mut h = 0.0;
        let mut xa = 1.0;
        for a in 0..=m {
            let mut yb = 1.0;
            for b in 0..=m - a {
                h += xa * yb * z.powi((m - a - b) as i32);
                yb *= y;
            }
            xa *= x;
        }
        total += cn * h;
    }
    total
}

/// `(f(y) - f(x)) / (y - x)`, switching to the exact polynomial limit (or a
/// centered difference of step `step`) when `|y - x| < threshold`.
fn divided_difference(f: &impl SpaceFunction, x: f64, y: f64, threshold: f64, step: f64) -> f64 {
    if (y - x).abs() >= threshold {
        return (f.eval(y) - f.eval(x)) / (y - x);
    }
    match f.as_poly() {
        Some(c) => poly_divided_difference(c, x, y),
        None => {
            let m = 0.5 * (x + y);
            (f.eval(m + step) - f.eval(m - step)) / (2.0 * step)
        }
    }
}

/// `[(y-x) f(z) + (x-z) f(y) + (z-y) f(x)] / [(x-y)(y-z)(z-x)]`, with the
/// same coincidence handling as [`divided_difference`].
fn second_divided_difference(f: &impl SpaceFunction, x: f64, y: f64, z: f64, threshold: f64, step: f64) -> f64 {
    let gap = (x - y).abs().min((y - z).abs()).min((z - x).abs());
    if gap >= threshold {
        let num = (y - x) * f.eval(z) + (x - z) * f.eval(y) + (z - y) * f.eval(x);
        return num / ((x - y) * (y - z) * (z - x));
    }
    if let Some(c) = f.as_poly() {
        return poly_second_divided_difference(c, x, y, z);
    }
    // Spread the points to a separation of `step`; the divided difference
    // of a smooth function moves by O(step).
    let mut p = [x, y, z];
    p.sort_by(f64::total_cmp);
    if p[1] - p[0] < step {
        p[1] = p[0] + step;
    }
    if p[2] - p[1] < step {
        p[2] = p[1] + step;
    }
    let [a, b, c] = p;
    let num = (b - a) * f.eval(c) + (a - c) * f.eval(b) + (c - b) * f.eval(a);
    num / ((a - b) * (b - c) * (c - a))
}

/// The kernels `nu_{x,s}` and `mu_{x,s}` at an evaluation point.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    x: f64,
    s: f64,
    ctx: QContext<f64>,
}

impl KernelSpec {
    /// Requires `s > 0` and `x` inside the support at time `qs`.
    pub fn new(x: f64, s: f64, ctx: &QContext<f64>) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(QbmError::InvalidParameter(format!("kernel time must be positive, got {s}")));
        }
        let q = ctx.q_f64();
        let w = support_half_width(q * s, q);
        if !(x.abs() <= w) {
            return Err(QbmError::OutsideSupport { x, time: q * s, half_width: w });
        }
        Ok(KernelSpec { x, s, ctx: ctx.clone() })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `nu_{x,s} = P_{q^2 s, s}(qx, .)`.
    pub fn nu(&self) -> Result<DensitySpec> {
        let q = self.ctx.q_f64();
        DensitySpec::transition(q * self.x, q * q * self.s, self.s, &self.ctx)
    }

    /// The outer kernel `P_{qs, s}(x, .)` of `mu_{x,s}`.
    pub fn mu_outer(&self) -> Result<DensitySpec> {
        let q = self.ctx.q_f64();
        DensitySpec::transition(self.x, q * self.s, self.s, &self.ctx)
    }

    /// The inner kernel `nu_{y,s}` of `mu_{x,s}`; `y` is clamped onto the
    /// support at time `s` to absorb rounding of outer nodes.
    pub fn mu_inner(&self, y: f64) -> Result<DensitySpec> {
        let q = self.ctx.q_f64();
        let w = support_half_width(self.s, q);
        DensitySpec::transition(q * y.clamp(-w, w), q * q * self.s, self.s, &self.ctx)
    }

    /// Width scale used by the coincidence thresholds.
    fn scale(&self) -> f64 {
        support_half_width(self.s, self.ctx.q_f64())
    }

    /// `int 1 d nu` and `int int 1 d mu`.
    pub fn normalization(&self, opts: &QuadratureOptions) -> Result<(f64, f64)> {
        let nu = integrate(|_| 1.0, &self.nu()?, opts)?.value;
        let mu = self.integrate_mu(|_, _| 1.0, opts)?.value;
        Ok((nu, mu))
    }

    /// `int int g(y, z) mu_{x,s}(dy, dz)` by nested adaptive quadrature.
    pub fn integrate_mu(&self, mut g: impl FnMut(f64, f64) -> f64, opts: &QuadratureOptions) -> Result<Integral> {
        let outer = self.mu_outer()?;
        let mut failure = None;
        let result = integrate(
            |y| {
                if failure.is_some() {
                    return 0.0;
                }
                match self.mu_inner(y).and_then(|inner| integrate(|z| g(y, z), &inner, opts)) {
                    Ok(r) => r.value,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            &outer,
            opts,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(result),
        }
    }
}

/// Relative threshold below which first divided differences use their limit.
pub const COINCIDENCE_THRESHOLD: f64 = 1e-8;
/// Relative threshold for second divided differences, whose cancellation
/// grows like `eps / gap^2`; below it polynomials use the exact symmetric sum.
pub const SECOND_COINCIDENCE_THRESHOLD: f64 = 1e-2;
/// Absolute quadrature floor for the numeric operators, relative to the
/// size of `f` on the support; integrands that vanish identically (`nabla`
/// of a constant, `Delta` of a linear function) are rounding noise.
pub const OPERATOR_ABS_TOL: f64 = 1e-14;

/// `max |f|` over the kernel support, sampled at a few points.
fn magnitude(f: &impl SpaceFunction, w: f64) -> f64 {
    (0..=8).map(|i| f.eval(-w + 2.0 * w * i as f64 / 8.0).abs()).fold(0.0, f64::max)
}
/// Relative step of the centered-difference fallback for non-polynomials.
pub const FALLBACK_STEP: f64 = 1e-5;

/// `int (f(y) - f(x)) / (y - x) nu_{x,s}(dy)`.
pub fn nabla_numeric(f: &impl SpaceFunction, x: f64, s: f64, ctx: &QContext<f64>, opts: &QuadratureOptions) -> Result<f64> {
    let kernel = KernelSpec::new(x, s, ctx)?;
    let scale = kernel.scale();
    let nu = kernel.nu()?;
    let opts = opts.with_abs_tol(opts.abs_tol.max(OPERATOR_ABS_TOL * magnitude(f, scale) / scale));
    Ok(integrate(|y| divided_difference(f, x, y, COINCIDENCE_THRESHOLD * scale, FALLBACK_STEP * scale), &nu, &opts)?.value)
}

/// `int int f[x, y, z] mu_{x,s}(dy, dz)` with the symmetric second divided
/// difference `f[x, y, z]`.
pub fn delta_numeric(f: &impl SpaceFunction, x: f64, s: f64, ctx: &QContext<f64>, opts: &QuadratureOptions) -> Result<f64> {
    let kernel = KernelSpec::new(x, s, ctx)?;
    let scale = kernel.scale();
    let (threshold, step) = (SECOND_COINCIDENCE_THRESHOLD * scale, FALLBACK_STEP * scale);
    let opts = opts.with_abs_tol(opts.abs_tol.max(OPERATOR_ABS_TOL * magnitude(f, scale) / (scale * scale)));
    Ok(kernel.integrate_mu(|y, z| second_divided_difference(f, x, y, z, threshold, step), &opts)?.value)
}

/// The pieces of the q-Ito formula on one path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    /// `|LHS - RHS|`.
    pub value: f64,
    /// `f(B_t, t) - f(0, 0)`.
    pub lhs: f64,
    pub stochastic: f64,
    pub time_term: f64,
    pub delta_term: f64,
    /// Bound on `|f(B_K, t_K) - f(0, 0)|`, the part of the formula carried
    /// by `[0, t q^K]`.
    pub tail_bound: f64,
    /// Allowance for floating-point rounding in the sums.
    pub rounding_bound: f64,
    #[serde(rename = "K")]
    pub depth: usize,
    pub seed: u64,
}

impl ItoResidual {
    pub fn within_bound(&self) -> bool {
        self.value <= self.tail_bound + self.rounding_bound
    }
}

/// `sum_j sup_{[0,h]} |c_j| w^j` for `f = sum_j c_j(t) x^j`.
fn sup_bound(f: &QPolynomial<f64>, h: f64, w: f64) -> f64 {
    f.coeffs().iter().enumerate().map(|(j, c)| c.abs_bound(h) * w.powi(j as i32)).sum()
}

/// Residual of the q-Ito formula for `f` on one path.
///
/// All three integrals run over the cells `k < K` of the path's grid, and
/// `B_{qs}` at `s = t q^k` is the grid value at `k + 1`. On each cell the
/// formula holds exactly, so the residual is the omitted contribution
/// `f(B_K, t_K) - f(0, 0)` plus rounding; the tail bound is the supremum of
/// that difference over the support at time `t_K`. With `tolerance` set, a
/// tail bound above it is a [`QbmError::GridTooShallow`] error.
pub fn ito_residual(f: &QPolynomial<f64>, path: &GeometricPath, ctx: &QContext<f64>, tolerance: Option<f64>) -> Result<ItoResidual> {
    let grid = path.grid();
    let (q, t, depth) = (ctx.q_f64(), grid.horizon(), grid.depth());
    let f = f.to_monomial(ctx);
    let t_k = grid.time(depth);
    let f00 = f.coeff(0).eval(&0.0);
    let w_k = support_half_width(t_k, q);
    let tail_bound = (f.coeff(0).eval(&t_k) - f00).abs()
        + f.coeffs().iter().enumerate().skip(1).map(|(j, c)| c.eval(&t_k).abs() * w_k.powi(j as i32)).sum::<f64>();
    if let Some(tol) = tolerance {
        if tail_bound > tol {
            return Err(QbmError::GridTooShallow { depth, bound: tail_bound, tolerance: tol });
        }
    }

    let nabla = nabla_exact(&f, ctx);
    let dtime = time_derivative(&f, ctx);
    let delta = delta_exact(&f, ctx);
    let values = path.values();
    let lhs = f.eval(&values[0], &t, ctx) - f00;
    let stochastic = integrate_def(&PolynomialIntegrand::from_polynomial(&nabla, ctx), path, t, ctx)?.value;
    let (mut time_term, mut delta_term) = (0.0, 0.0);
    for k in 0..depth {
        let s = grid.time(k);
        let weight = (1.0 - q) * s;
        time_term += weight * dtime.eval(&values[k + 1], &s, ctx);
        delta_term += weight * delta.eval(&values[k + 1], &s, ctx);
    }
    let value = (lhs - stochastic - time_term - delta_term).abs();

    // Every term is a sum of at most ~K products of polynomial values on the
    // support; bound their rounding by a generous multiple of eps.
    let w = support_half_width(t, q);
    let magnitude = sup_bound(&f, t, w)
        + (depth as f64) * (sup_bound(&nabla, t, w) * 2.0 * w + t * (sup_bound(&dtime, t, w) + sup_bound(&delta, t, w)));
    let rounding_bound = 64.0 * f64::EPSILON * (depth as f64 + 1.0) * magnitude;
    Ok(ItoResidual { value, lhs, stochastic, time_term, delta_term, tail_bound, rounding_bound, depth, seed: path.seed() })
}

/// `f(B_0, t_0) - f(B_K, t_K)` minus the three q-Ito sums over the cells
/// `k < K` of a geometric grid, in any scalar type; identically zero.
pub fn ito_defect<S: Scalar>(f: &QPolynomial<S>, times: &[S], values: &[S], ctx: &QContext<S>) -> Result<S> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(QbmError::InvalidParameter("grid needs matching times and values of length >= 2".into()));
    }
    let f = f.to_monomial(ctx);
    let nabla = nabla_exact(&f, ctx);
    let dtime = time_derivative(&f, ctx);
    let delta = delta_exact(&f, ctx);
    let last = times.len() - 1;
    let mut defect = f.eval(&values[0], &times[0], ctx) - f.eval(&values[last], &times[last], ctx);
    defect = defect - def_sum(&PolynomialIntegrand::from_polynomial(&nabla, ctx), times, values, ctx)?;
    let one_minus_q = S::one() - ctx.q().clone();
    for k in 0..last {
        let weight = one_minus_q.clone() * times[k].clone();
        let g = dtime.eval(&values[k + 1], &times[k], ctx) + delta.eval(&values[k + 1], &times[k], ctx);
        defect = defect - weight * g;
    }
    Ok(defect)
}

/// `D_{q,s}(b h) - b D_{q,s} h - h(q .) D_{q,s} b` for polynomials in time;
/// identically zero.
pub fn q_product_defect<S: Scalar>(b: &Poly<S>, h: &Poly<S>, ctx: &QContext<S>) -> Poly<S> {
    let q = ctx.q();
    let lhs = (b * h).q_derivative(q);
    let rhs = &(b * &h.q_derivative(q)) + &(&h.scale_arg(q) * &b.q_derivative(q));
    &lhs - &rhs
}
