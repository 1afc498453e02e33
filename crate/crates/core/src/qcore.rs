//! q-numbers, the Jackson derivative and Jackson integration.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;

use crate::error::{QbmError, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;

pub const DEFAULT_PROD_EPS: f64 = 1e-16;
pub const DEFAULT_TAIL_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExactRational,
    Float,
}

/// The deformation parameter `q` together with truncation thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct QContext<S> {
    q: S,
    prod_eps: f64,
    tail_eps: f64,
}

impl<S: Scalar> QContext<S> {
    pub fn new(q: S) -> Result<Self> {
        Self::with_tolerances(q, DEFAULT_PROD_EPS, DEFAULT_TAIL_EPS)
    }

    pub fn with_tolerances(q: S, prod_eps: f64, tail_eps: f64) -> Result<Self> {
        if !(q > S::zero() && q < S::one()) {
            return Err(QbmError::InvalidQ(q.to_string()));
        }
        if !(prod_eps > 0.0 && tail_eps > 0.0) {
            return Err(QbmError::InvalidParameter(format!(
                "truncation thresholds must be positive (prod_eps = {prod_eps}, tail_eps = {tail_eps})"
            )));
        }
        Ok(QContext { q, prod_eps, tail_eps })
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    pub fn q_f64(&self) -> f64 {
        self.q.to_f64()
    }

    pub fn prod_eps(&self) -> f64 {
        self.prod_eps
    }

    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    pub fn mode(&self) -> Mode {
        if S::EXACT {
            Mode::ExactRational
        } else {
            Mode::Float
        }
    }

    /// The same context in floating point.
    pub fn to_float(&self) -> QContext<f64> {
        QContext { q: self.q.to_f64(), prod_eps: self.prod_eps, tail_eps: self.tail_eps }
    }
}

impl QContext<BigRational> {
    pub fn exact(q: BigRational) -> Result<Self> {
        Self::new(q)
    }
}

impl QContext<f64> {
    pub fn float(q: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(QbmError::InvalidQ(q.to_string()));
        }
        Self::new(q)
    }
}

/// `[n]_q = 1 + q + ... + q^{n-1}`
pub fn q_int<S: Scalar>(n: usize, ctx: &QContext<S>) -> S {
    let mut acc = S::zero();
    let mut pow = S::one();
    for _ in 0..n {
        acc = acc + pow.clone();
        pow = pow * ctx.q.clone();
    }
    acc
}

/// `[n]_q! = [1]_q [2]_q ... [n]_q`
pub fn q_factorial<S: Scalar>(n: usize, ctx: &QContext<S>) -> S {
    q_factorials(n, ctx).pop().unwrap_or_else(S::one)
}

/// `[0]!, [1]!, ..., [n]!`
pub fn q_factorials<S: Scalar>(n: usize, ctx: &QContext<S>) -> Vec<S> {
    let mut out = Vec::with_capacity(n + 1);
    let mut fact = S::one();
    let mut qint = S::zero();
    let mut pow = S::one();
    out.push(fact.clone());
    for _ in 1..=n {
        qint = qint + pow.clone();
        pow = pow * ctx.q.clone();
        fact = fact * qint.clone();
        out.push(fact.clone());
    }
    out
}

/// Gaussian binomial coefficient `[n choose k]_q`.
pub fn q_binomial<S: Scalar>(n: usize, k: usize, ctx: &QContext<S>) -> S {
    if k > n {
        return S::zero();
    }
    let f = q_factorials(n, ctx);
    f[n].clone() / (f[k].clone() * f[n - k].clone())
}

/// What the caller asserts about a function near `s = 0`.
///
/// The constants are hypotheses supplied by the caller; they are never
/// estimated from samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularity {
    /// `|a(s)| <= sup` on the integration range.
    Bounded { sup: f64 },
    /// Bounded by `sup`, and `|b(s) - b(0)| <= c s^delta` near 0.
    Holder { c: f64, delta: f64, sup: f64 },
    Unbounded,
}

impl Regularity {
    pub fn sup(&self) -> Option<f64> {
        match *self {
            Regularity::Bounded { sup } | Regularity::Holder { sup, .. } => Some(sup),
            Regularity::Unbounded => None,
        }
    }
}

/// A real function of the time variable the Jackson machinery can consume.
pub trait TimeFunction<S: Scalar> {
    fn eval(&self, s: &S) -> S;

    /// Declared behaviour on `[0, horizon]`.
    fn regularity(&self, horizon: f64) -> Regularity;

    /// Exact polynomial form, when the function has one.
    fn as_poly(&self) -> Option<&Poly<S>> {
        None
    }
}

impl<S: Scalar> TimeFunction<S> for Poly<S> {
    fn eval(&self, s: &S) -> S {
        Poly::eval(self, s)
    }

    fn regularity(&self, horizon: f64) -> Regularity {
        let h = horizon.max(0.0);
        let c: f64 = self
            .coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, a)| a.to_f64().abs() * h.powi(j as i32 - 1))
            .sum();
        Regularity::Holder { c, delta: 1.0, sup: self.abs_bound(h) }
    }

    fn as_poly(&self) -> Option<&Poly<S>> {
        Some(self)
    }
}

/// A function given by an evaluation rule plus a declared regularity.
#[derive(Clone)]
pub struct SampledFunction<S> {
    rule: Arc<dyn Fn(&S) -> S + Send + Sync>,
    regularity: Regularity,
}

impl<S: Scalar> SampledFunction<S> {
    pub fn new(rule: impl Fn(&S) -> S + Send + Sync + 'static, regularity: Regularity) -> Self {
        SampledFunction { rule: Arc::new(rule), regularity }
    }

    pub fn bounded(rule: impl Fn(&S) -> S + Send + Sync + 'static, sup: f64) -> Self {
        Self::new(rule, Regularity::Bounded { sup })
    }

    pub fn holder(rule: impl Fn(&S) -> S + Send + Sync + 'static, c: f64, delta: f64, sup: f64) -> Self {
        Self::new(rule, Regularity::Holder { c, delta, sup })
    }
}

impl<S> fmt::Debug for SampledFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFunction").field("regularity", &self.regularity).finish()
    }
}

impl<S: Scalar> TimeFunction<S> for SampledFunction<S> {
    fn eval(&self, s: &S) -> S {
        (self.rule)(s)
    }

    fn regularity(&self, _horizon: f64) -> Regularity {
        self.regularity
    }
}

/// `(f(s) - f(qs)) / ((1-q) s)` for `s > 0`.
pub fn q_derivative<S: Scalar>(f: &impl TimeFunction<S>, s: &S, ctx: &QContext<S>) -> Result<S> {
    if !(*s > S::zero()) {
        return Err(QbmError::InvalidParameter(format!("q-derivative needs s > 0, got {s}")));
    }
    let qs = ctx.q.clone() * s.clone();
    Ok((f.eval(s) - f.eval(&qs)) / ((S::one() - ctx.q.clone()) * s.clone()))
}

/// Smallest `K` with `q^K * scale < eps`.
pub(crate) fn geometric_cutoff(q: f64, scale: f64, eps: f64) -> usize {
    if scale <= eps {
        return 0;
    }
    ((eps / scale).ln() / q.ln()).floor() as usize + 1
}

/// `int_0^t a(s) d_q s = (1-q) t sum_k q^k a(q^k t)`.
///
/// Polynomials use the closed form `t^{n+1}/[n+1]_q`; other functions are
/// summed to the first `K` with `q^K max(1, sup|a|) t < tail_eps`.
pub fn jackson_integral<S: Scalar>(a: &impl TimeFunction<S>, t: &S, ctx: &QContext<S>) -> Result<S> {
    if *t < S::zero() {
        return Err(QbmError::InvalidParameter(format!("Jackson integral needs t >= 0, got {t}")));
    }
    if let Some(p) = a.as_poly() {
        return Ok(jackson_integral_poly(p, t, ctx));
    }
    let sup = a.regularity(t.to_f64()).sup().ok_or(QbmError::UnboundedIntegrand)?;
    let k_max = geometric_cutoff(ctx.q_f64(), sup.max(1.0) * t.to_f64(), ctx.tail_eps);
    let mut acc = S::zero();
    let mut pow = S::one();
    for _ in 0..k_max {
        acc = acc + pow.clone() * a.eval(&(pow.clone() * t.clone()));
        pow = pow * ctx.q.clone();
    }
    Ok((S::one() - ctx.q.clone()) * t.clone() * acc)
}

fn jackson_integral_poly<S: Scalar>(p: &Poly<S>, t: &S, ctx: &QContext<S>) -> S {
    let mut acc = S::zero();
    let mut tpow = t.clone();
    let mut qint = S::one();
    let mut qpow = S::one();
    for c in p.coeffs() {
        acc = acc + c.clone() * tpow.clone() / qint.clone();
        tpow = tpow * t.clone();
        qpow = qpow * ctx.q.clone();
        qint = qint + qpow.clone();
    }
    acc
}

/// `int_0^t a(s) d_q b(s) = sum_k a(q^k t) (b(q^k t) - b(q^{k+1} t))`.
///
/// `b` must carry a Hölder declaration near 0. For two polynomials the
/// geometric series is summed in closed form; otherwise the sum stops at the
/// first `K` with `2 sup|a| C (q^K t)^delta / (1 - q^delta) < tail_eps`.
pub fn jackson_stieltjes<S: Scalar>(
    a: &impl TimeFunction<S>,
    b: &impl TimeFunction<S>,
    t: &S,
    ctx: &QContext<S>,
) -> Result<S> {
    if *t < S::zero() {
        return Err(QbmError::InvalidParameter(format!("Jackson integral needs t >= 0, got {t}")));
    }
    let horizon = t.to_f64();
    let Regularity::Holder { c, delta, .. } = b.regularity(horizon) else {
        return Err(QbmError::MissingHolder);
    };
    let sup_a = a.regularity(horizon).sup().ok_or(QbmError::UnboundedIntegrand)?;
    if let (Some(pa), Some(pb)) = (a.as_poly(), b.as_poly()) {
        return Ok(jackson_stieltjes_poly(pa, pb, t, ctx));
    }
    let q = ctx.q_f64();
    let k_max = if delta > 0.0 {
        let scale = 2.0 * sup_a * c * horizon.powf(delta) / (1.0 - q.powf(delta));
        geometric_cutoff(q.powf(delta), scale, ctx.tail_eps)
    } else {
        return Err(QbmError::InvalidParameter(format!("Hölder exponent must be positive, got {delta}")));
    };
    let mut acc = S::zero();
    let mut point = t.clone();
    let mut b_here = b.eval(&point);
    for _ in 0..k_max {
        let next = ctx.q.clone() * point.clone();
        let b_next = b.eval(&next);
        acc = acc + a.eval(&point) * (b_here - b_next.clone());
        point = next;
        b_here = b_next;
    }
    Ok(acc)
}

/// Closed form for polynomials:
/// `sum_{i, j>=1} alpha_i beta_j t^{i+j} (1 - q^j) / (1 - q^{i+j})`.
fn jackson_stieltjes_poly<S: Scalar>(a: &Poly<S>, b: &Poly<S>, t: &S, ctx: &QContext<S>) -> S {
    let q = ctx.q.clone();
    let mut acc = S::zero();
    for (i, alpha) in a.coeffs().iter().enumerate() {
        if alpha.is_zero() {
            continue;
        }
        for (j, beta) in b.coeffs().iter().enumerate().skip(1) {
            if beta.is_zero() {
                continue;
            }
            let num = S::one() - q.powu(j as u32);
            let den = S::one() - q.powu((i + j) as u32);
            acc = acc + alpha.clone() * beta.clone() * t.powu((i + j) as u32) * num / den;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn half() -> QContext<BigRational> {
        QContext::exact(rational(1, 2)).unwrap()
    }

    fn poly(c: &[i64]) -> Poly<BigRational> {
        Poly::from_coeffs(c.iter().map(|&v| rational(v, 1)).collect())
    }

    #[test]
    fn rejects_q_outside_unit_interval() {
        assert!(QContext::exact(rational(6, 5)).is_err());
        assert!(QContext::exact(rational(0, 1)).is_err());
        assert!(QContext::exact(rational(1, 1)).is_err());
        assert!(QContext::float(f64::NAN).is_err());
        assert!(QContext::with_tolerances(0.5, 0.0, 1e-3).is_err());
    }

    #[test]
    fn q_numbers() {
        let ctx = half();
        assert_eq!(q_int(0, &ctx), rational(0, 1));
        assert_eq!(q_int(3, &ctx), rational(7, 4));
        assert_eq!(q_int(1, &QContext::exact(rational(4, 5)).unwrap()), rational(1, 1));
        assert_eq!(q_factorial(0, &ctx), rational(1, 1));
        assert_eq!(q_factorial(2, &ctx), rational(3, 2));
        // 1 * 3/2 * 7/4 * 15/8
        assert_eq!(q_factorial(4, &ctx), rational(315, 64));
        assert_eq!(q_binomial(4, 2, &ctx), q_factorial(4, &ctx) / (q_factorial(2, &ctx) * q_factorial(2, &ctx)));
    }

    #[test]
    fn q_derivative_examples() {
        let ctx = half();
        let one = rational(1, 1);
        assert_eq!(q_derivative(&poly(&[0, 1]), &one, &ctx).unwrap(), one);
        assert_eq!(q_derivative(&poly(&[0, 0, 1]), &one, &ctx).unwrap(), rational(3, 2));
        assert_eq!(q_derivative(&poly(&[5]), &rational(3, 7), &ctx).unwrap(), rational(0, 1));
        assert!(q_derivative(&poly(&[0, 1]), &rational(0, 1), &ctx).is_err());
    }

    #[test]
    fn jackson_integral_examples() {
        let ctx = half();
        let one = rational(1, 1);
        assert_eq!(jackson_integral(&poly(&[1]), &one, &ctx).unwrap(), one);
        assert_eq!(jackson_integral(&poly(&[0, 0, 1]), &one, &ctx).unwrap(), rational(4, 7));
        // s^n -> t^{n+1}/[n+1]
        let t = rational(3, 2);
        for n in 0..6 {
            let got = jackson_integral(&Poly::monomial(rational(1, 1), n), &t, &ctx).unwrap();
            assert_eq!(got, t.powu(n as u32 + 1) / q_int(n + 1, &ctx));
        }
    }

    #[test]
    fn truncated_jackson_sum_matches_closed_form() {
        let ctx = QContext::float(0.5).unwrap();
        let f = SampledFunction::bounded(|s: &f64| s * s, 1.0);
        let got = jackson_integral(&f, &1.0, &ctx).unwrap();
        assert!((got - 4.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn unbounded_declaration_is_rejected() {
        let ctx = QContext::float(0.5).unwrap();
        let f = SampledFunction::new(|s: &f64| 1.0 / s, Regularity::Unbounded);
        assert_eq!(jackson_integral(&f, &1.0, &ctx), Err(QbmError::UnboundedIntegrand));
        let b = SampledFunction::bounded(|s: &f64| *s, 1.0);
        let a = SampledFunction::bounded(|_: &f64| 1.0, 1.0);
        assert_eq!(jackson_stieltjes(&a, &b, &1.0, &ctx), Err(QbmError::MissingHolder));
    }

    #[test]
    fn stieltjes_examples() {
        let ctx = half();
        let s = poly(&[0, 1]);
        assert_eq!(jackson_stieltjes(&s, &s, &rational(1, 1), &ctx).unwrap(), rational(2, 3));

        // a = 1 telescopes to b(t) - b(0)
        let fctx = QContext::float(0.5).unwrap();
        let one = SampledFunction::bounded(|_: &f64| 1.0, 1.0);
        let b = SampledFunction::holder(|s: &f64| s.sqrt() + 2.0, 1.0, 0.5, 3.0);
        let got = jackson_stieltjes(&one, &b, &1.0, &fctx).unwrap();
        assert!((got - 1.0).abs() < fctx.tail_eps());
    }

    #[test]
    fn sampled_and_polynomial_routes_agree() {
        let ctx = QContext::float(0.7).unwrap();
        let a = Poly::from_coeffs(vec![1.0, -2.0, 0.5]);
        let b = Poly::from_coeffs(vec![0.3, 1.0, 0.0, 2.0]);
        let exact = jackson_stieltjes(&a, &b, &1.3, &ctx).unwrap();
        let (a2, b2) = (a.clone(), b.clone());
        let sa = SampledFunction::bounded(move |s: &f64| a2.eval(s), a.abs_bound(1.3));
        let Regularity::Holder { c, delta, sup } = TimeFunction::regularity(&b, 1.3) else { unreachable!() };
        let sb = SampledFunction::holder(move |s: &f64| b2.eval(s), c, delta, sup);
        let summed = jackson_stieltjes(&sa, &sb, &1.3, &ctx).unwrap();
        assert!((exact - summed).abs() < 1e-12);
    }

    #[test]
    fn jackson_approaches_riemann_as_q_goes_to_one() {
        let ctx = QContext::float(0.999).unwrap();
        let p = Poly::from_coeffs(vec![1.0, 2.0, -3.0, 1.0]);
        let riemann = 1.25; // int_0^1
        let (p2, sup) = (p.clone(), p.abs_bound(1.0));
        let f = SampledFunction::bounded(move |s: &f64| p2.eval(s), sup);
        let got = jackson_integral(&f, &1.0, &ctx).unwrap();
        let closed = jackson_integral(&p, &1.0, &ctx).unwrap();
        assert!((got - closed).abs() < 1e-10);
        assert!(((got - riemann) / riemann).abs() < 1e-2);
    }

    fn small_poly() -> impl Strategy<Value = Poly<BigRational>> {
        prop::collection::vec(-5i64..=5, 0..=8)
            .prop_map(|c| Poly::from_coeffs(c.into_iter().map(|v| rational(v, 1)).collect()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn by_parts_holds_exactly(a in small_poly(), b in small_poly(), qn in 1i64..10, tn in 1i64..9) {
            let ctx = QContext::exact(rational(qn, 10)).unwrap();
            let t = rational(tn, 3);
            let zero = rational(0, 1);
            let lhs = jackson_stieltjes(&a, &b, &t, &ctx).unwrap();
            let bq = b.scale_arg(ctx.q());
            let rhs = a.eval(&t) * b.eval(&t) - a.eval(&zero) * b.eval(&zero)
                - jackson_stieltjes(&bq, &a, &t, &ctx).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn anti_derivative_holds_exactly(b in small_poly(), qn in 1i64..10, tn in 1i64..9) {
            let ctx = QContext::exact(rational(qn, 10)).unwrap();
            let t = rational(tn, 4);
            let db = b.q_derivative(ctx.q());
            let lhs = jackson_integral(&db, &t, &ctx).unwrap();
            prop_assert_eq!(lhs, b.eval(&t) - b.eval(&rational(0, 1)));
        }

        #[test]
        fn jackson_integral_is_linear_and_positive(a in small_poly(), b in small_poly(), k in -3i64..3) {
            let ctx = half();
            let t = rational(5, 4);
            let k = rational(k, 1);
            let combo = &a + &b.scale(&k);
            let lhs = jackson_integral(&combo, &t, &ctx).unwrap();
            let rhs = jackson_integral(&a, &t, &ctx).unwrap() + k * jackson_integral(&b, &t, &ctx).unwrap();
            prop_assert_eq!(lhs, rhs);
            let sq = &a * &a;
            prop_assert!(jackson_integral(&sq, &t, &ctx).unwrap() >= rational(0, 1));
        }
    }
}
