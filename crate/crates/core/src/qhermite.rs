//! Monic continuous q-Hermite polynomials `h_n(x; t)` and polynomials in
//! `(x, t)` expressed in either the monomial or the q-Hermite basis.
//!
//! `h_0 = 1`, `h_1 = x`, `x h_n = h_{n+1} + t [n]_q h_{n-1}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QbmError, Result};
use crate::poly::Poly;
use crate::qcore::{q_binomial, q_factorials, QContext};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// `f = sum_j c_j(t) x^j`
    Monomial,
    /// `f = sum_m c_m(t) h_m(x; t)`
    Hermite,
}

/// Polynomial in the space variable `x` whose coefficients are polynomials
/// in the time variable.
#[derive(Clone, Debug, PartialEq)]
pub struct QPolynomial<S> {
    basis: Basis,
    coeffs: Vec<Poly<S>>,
}

impl<S: Scalar> QPolynomial<S> {
    pub fn zero() -> Self {
        QPolynomial { basis: Basis::Monomial, coeffs: Vec::new() }
    }

    pub fn new(basis: Basis, mut coeffs: Vec<Poly<S>>) -> Self {
        while coeffs.last().is_some_and(Poly::is_zero) {
            coeffs.pop();
        }
        QPolynomial { basis, coeffs }
    }

    pub fn monomial(coeffs: Vec<Poly<S>>) -> Self {
        Self::new(Basis::Monomial, coeffs)
    }

    /// Monomial-basis polynomial with constant (time-independent) coefficients.
    pub fn from_constants(coeffs: &[S]) -> Self {
        Self::monomial(coeffs.iter().cloned().map(Poly::constant).collect())
    }

    /// `c(t) x^n`
    pub fn term(c: Poly<S>, n: usize) -> Self {
        let mut coeffs = vec![Poly::zero(); n + 1];
        coeffs[n] = c;
        Self::monomial(coeffs)
    }

    /// `x^n`
    pub fn x_pow(n: usize) -> Self {
        Self::term(Poly::one(), n)
    }

    /// A function of time only.
    pub fn time_only(c: Poly<S>) -> Self {
        Self::monomial(vec![c])
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coeffs(&self) -> &[Poly<S>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Poly<S> {
        self.coeffs.get(j).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree in `x`; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    fn expect_monomial(&self, op: &str) {
        assert_eq!(self.basis, Basis::Monomial, "{op} requires the monomial basis");
    }

    /// `f(x, t) x`
    pub fn mul_x(&self) -> Self {
        self.expect_monomial("mul_x");
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![Poly::zero()];
        coeffs.extend(self.coeffs.iter().cloned());
        Self::monomial(coeffs)
    }

    /// `f(x, t) c(t)`
    pub fn mul_time(&self, c: &Poly<S>) -> Self {
        Self::new(self.basis, self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.basis, self.coeffs.iter().map(|a| a.scale(c)).collect())
    }

    /// `f(x, c t)`; valid in the monomial basis only.
    pub fn scale_time(&self, c: &S) -> Self {
        self.expect_monomial("scale_time");
        Self::monomial(self.coeffs.iter().map(|a| a.scale_arg(c)).collect())
    }

    /// `f(c x, t)`
    pub fn scale_space(&self, c: &S) -> Self {
        self.expect_monomial("scale_space");
        let mut pow = S::one();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for a in &self.coeffs {
            out.push(a.scale(&pow));
            pow = pow * c.clone();
        }
        Self::monomial(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.basis, other.basis, "basis mismatch");
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(self.basis, (0..n).map(|j| &self.coeff(j) + &other.coeff(j)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.basis, other.basis, "basis mismatch");
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(self.basis, (0..n).map(|j| &self.coeff(j) - &other.coeff(j)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.expect_monomial("mul");
        other.expect_monomial("mul");
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Poly::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Self::monomial(out)
    }

    /// Coefficients in `x` at a fixed time.
    pub fn at_time(&self, t: &S) -> Vec<S> {
        self.expect_monomial("at_time");
        self.coeffs.iter().map(|c| c.eval(t)).collect()
    }

    /// Jackson derivative in the time variable, acting on every coefficient.
    pub fn q_derivative_time(&self, ctx: &QContext<S>) -> Self {
        self.expect_monomial("q_derivative_time");
        Self::monomial(self.coeffs.iter().map(|c| c.q_derivative(ctx.q())).collect())
    }

    pub fn eval(&self, x: &S, t: &S, ctx: &QContext<S>) -> S {
        match self.basis {
            Basis::Monomial => self
                .coeffs
                .iter()
                .rev()
                .fold(S::zero(), |acc, c| acc * x.clone() + c.eval(t)),
            Basis::Hermite => {
                let Some(d) = self.degree() else { return S::zero() };
                let h = hermite_values(x, t, ctx.q(), d);
                self.coeffs.iter().zip(h).fold(S::zero(), |acc, (c, hm)| acc + c.eval(t) * hm)
            }
        }
    }

    pub fn to_f64(&self) -> QPolynomial<f64> {
        QPolynomial::new(self.basis, self.coeffs.iter().map(Poly::to_f64).collect())
    }

    /// Converts a Hermite-basis polynomial back to monomials.
    pub fn to_monomial(&self, ctx: &QContext<S>) -> Self {
        match self.basis {
            Basis::Monomial => self.clone(),
            Basis::Hermite => {
                let table = hermite_table(self.coeffs.len().saturating_sub(1), ctx);
                self.coeffs
                    .iter()
                    .zip(&table)
                    .fold(Self::zero(), |acc, (c, h)| acc.add(&h.mul_time(c)))
            }
        }
    }

    /// Exact change to the q-Hermite basis by triangular back-substitution.
    pub fn to_hermite(&self, ctx: &QContext<S>) -> Self {
        match self.basis {
            Basis::Hermite => self.clone(),
            Basis::Monomial => {
                let Some(d) = self.degree() else {
                    return Self::new(Basis::Hermite, Vec::new());
                };
                let table = hermite_table(d, ctx);
                let mut residual = self.coeffs.clone();
                let mut out = vec![Poly::zero(); d + 1];
                for m in (0..=d).rev() {
                    let lead = residual[m].clone();
                    if lead.is_zero() {
                        continue;
                    }
                    for (j, hc) in table[m].coeffs.iter().enumerate() {
                        residual[j] = &residual[j] - &(hc * &lead);
                    }
                    out[m] = lead;
                }
                debug_assert!(residual.iter().all(Poly::is_zero));
                Self::new(Basis::Hermite, out)
            }
        }
    }
}

impl<S: Scalar> fmt::Display for QPolynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match self.basis {
                Basis::Monomial => write!(f, "[{c}] x^{j}")?,
                Basis::Hermite => write!(f, "[{c}] h_{j}")?,
            }
        }
        Ok(())
    }
}

/// Coefficients `b_m(t)` in `f = sum_m b_m(t) h_m(x; t) / [m]!`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteCoefficients<S> {
    b: Vec<Poly<S>>,
}

impl<S: Scalar> HermiteCoefficients<S> {
    pub fn new(mut b: Vec<Poly<S>>) -> Self {
        while b.last().is_some_and(Poly::is_zero) {
            b.pop();
        }
        HermiteCoefficients { b }
    }

    /// Constant coefficients `b_m`.
    pub fn constants(b: &[S]) -> Self {
        Self::new(b.iter().cloned().map(Poly::constant).collect())
    }

    pub fn b(&self) -> &[Poly<S>] {
        &self.b
    }

    pub fn degree(&self) -> Option<usize> {
        self.b.len().checked_sub(1)
    }

    pub fn to_f64(&self) -> HermiteCoefficients<f64> {
        HermiteCoefficients { b: self.b.iter().map(Poly::to_f64).collect() }
    }

    /// Rebuilds `f` in the monomial basis.
    pub fn to_polynomial(&self, ctx: &QContext<S>) -> QPolynomial<S> {
        let fact = q_factorials(self.b.len(), ctx);
        let hermite = self
            .b
            .iter()
            .zip(&fact)
            .map(|(b, f)| b.scale(&(S::one() / f.clone())))
            .collect();
        QPolynomial::new(Basis::Hermite, hermite).to_monomial(ctx)
    }
}

/// `h_n(x; t)` in the monomial basis.
pub fn qhermite<S: Scalar>(n: usize, ctx: &QContext<S>) -> QPolynomial<S> {
    hermite_table(n, ctx).pop().expect("table has n + 1 entries")
}

/// `h_0, ..., h_n` in the monomial basis.
pub fn hermite_table<S: Scalar>(n: usize, ctx: &QContext<S>) -> Vec<QPolynomial<S>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(QPolynomial::x_pow(0));
    if n == 0 {
        return out;
    }
    out.push(QPolynomial::x_pow(1));
    let mut qint = S::one();
    let mut qpow = S::one();
    for k in 1..n {
        // h_{k+1} = x h_k - t [k] h_{k-1}
        let t_qint = Poly::monomial(qint.clone(), 1);
        let next = out[k].mul_x().sub(&out[k - 1].mul_time(&t_qint));
        out.push(next);
        qpow = qpow * ctx.q().clone();
        qint = qint + qpow.clone();
    }
    out
}

/// Values `h_0(x;t), ..., h_n(x;t)` by the recurrence.
pub fn hermite_values<S: Scalar>(x: &S, t: &S, q: &S, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(S::one());
    if n == 0 {
        return out;
    }
    out.push(x.clone());
    let mut qint = S::one();
    let mut qpow = S::one();
    for k in 1..n {
        let next = x.clone() * out[k].clone() - t.clone() * qint.clone() * out[k - 1].clone();
        out.push(next);
        qpow = qpow * q.clone();
        qint = qint + qpow.clone();
    }
    out
}

/// Floating-point `h_0(x;t), ..., h_n(x;t)` written into `out`.
pub fn hermite_values_f64(x: f64, t: f64, q: f64, out: &mut [f64]) {
    let Some(first) = out.first_mut() else { return };
    *first = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = x;
    let mut qint = 1.0;
    let mut qpow = 1.0;
    for k in 1..out.len() - 1 {
        out[k + 1] = x * out[k] - t * qint * out[k - 1];
        qpow *= q;
        qint += qpow;
    }
}

/// Exact change of basis `f = sum_m b_m(t) h_m(x;t) / [m]!`.
pub fn to_hermite_basis<S: Scalar>(f: &QPolynomial<S>, ctx: &QContext<S>) -> HermiteCoefficients<S> {
    let h = f.to_hermite(ctx);
    let fact = q_factorials(h.coeffs.len(), ctx);
    HermiteCoefficients::new(h.coeffs.iter().zip(&fact).map(|(c, f)| c.scale(f)).collect())
}

/// `f(x, t)` for either basis.
pub fn eval<S: Scalar>(f: &QPolynomial<S>, x: &S, t: &S, ctx: &QContext<S>) -> S {
    f.eval(x, t, ctx)
}

/// Checks `h_n(x;t) = t^{n/2} h_n(x/sqrt(t); 1)` in floating point.
pub fn scaling_check(n: usize, x: f64, t: f64, ctx: &QContext<f64>) -> Result<bool> {
    if !(t > 0.0) {
        return Err(QbmError::InvalidParameter(format!("scaling check needs t > 0, got {t}")));
    }
    let mut lhs = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    hermite_values_f64(x, t, ctx.q_f64(), &mut lhs);
    hermite_values_f64(x / t.sqrt(), 1.0, ctx.q_f64(), &mut rhs);
    let a = lhs[n];
    let b = t.powf(n as f64 / 2.0) * rhs[n];
    Ok((a - b).abs() <= 1e-12 * a.abs().max(1.0))
}

/// `C_n t^{n/2}` with `C_n = (1-q)^{-n/2} sum_k [n choose k]_q`, a bound for
/// `|h_n(x; t)|` on `|x| <= 2 sqrt(t) / sqrt(1-q)`.
pub fn growth_bound<S: Scalar>(n: usize, t: f64, ctx: &QContext<S>) -> f64 {
    let q = ctx.q_f64();
    let binom_sum: f64 = (0..=n).map(|k| q_binomial(n, k, ctx).to_f64()).sum();
    binom_sum * ((t.max(0.0)) / (1.0 - q)).powf(n as f64 / 2.0)
}

/// Floating-point growth constants `C_0, ..., C_n` (times `t^{m/2}` = 1).
pub fn growth_constants(n: usize, q: f64) -> Vec<f64> {
    // Gaussian binomials by Pascal's rule [n,k] = [n-1,k-1] + q^k [n-1,k].
    let mut row = vec![1.0];
    let mut out = vec![1.0];
    for m in 1..=n {
        let mut next = vec![1.0; m + 1];
        for k in 1..m {
            next[k] = row[k - 1] + q.powi(k as i32) * row[k];
        }
        row = next;
        out.push(row.iter().sum::<f64>() * (1.0 - q).powf(-(m as f64) / 2.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{q_factorial, q_int};
    use crate::scalar::rational;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn ctx(n: i64, d: i64) -> QContext<BigRational> {
        QContext::exact(rational(n, d)).unwrap()
    }

    fn tpoly(c: &[(i64, i64)]) -> Poly<BigRational> {
        Poly::from_coeffs(c.iter().map(|&(n, d)| rational(n, d)).collect())
    }

    #[test]
    fn low_degree_examples() {
        for c in [ctx(1, 5), ctx(1, 2), ctx(4, 5)] {
            let q = c.q().clone();
            let one = rational(1, 1);
            // x^2 - t
            assert_eq!(
                qhermite(2, &c),
                QPolynomial::monomial(vec![Poly::monomial(-one.clone(), 1), Poly::zero(), Poly::one()])
            );
            // x^3 - (2+q) t x
            let two_q = rational(2, 1) + q.clone();
            assert_eq!(
                qhermite(3, &c),
                QPolynomial::monomial(vec![
                    Poly::zero(),
                    Poly::monomial(-two_q, 1),
                    Poly::zero(),
                    Poly::one()
                ])
            );
            // x^4 - (q^2+2q+3) t x^2 + (q^2+q+1) t^2
            let a = q.clone() * q.clone() + rational(2, 1) * q.clone() + rational(3, 1);
            let b = q.clone() * q.clone() + q.clone() + one.clone();
            assert_eq!(
                qhermite(4, &c),
                QPolynomial::monomial(vec![
                    Poly::monomial(b, 2),
                    Poly::zero(),
                    Poly::monomial(-a, 1),
                    Poly::zero(),
                    Poly::one()
                ])
            );
        }
    }

    #[test]
    fn recurrence_holds_exactly() {
        for c in [ctx(1, 5), ctx(1, 2), ctx(4, 5)] {
            let h = hermite_table(13, &c);
            for n in 1..=12 {
                let t_n = Poly::monomial(q_int(n, &c), 1);
                let residual = h[n].mul_x().sub(&h[n + 1]).sub(&h[n - 1].mul_time(&t_n));
                assert!(residual.is_zero(), "n = {n}");
            }
        }
    }

    #[test]
    fn basis_change_examples() {
        let c = ctx(1, 2);
        // x^2 = h_2 + t h_0
        let b = to_hermite_basis(&QPolynomial::x_pow(2), &c);
        assert_eq!(b.b(), &[tpoly(&[(0, 1), (1, 1)]), Poly::zero(), Poly::constant(q_factorial(2, &c))]);
        // h_n -> b_n = [n]!
        for n in 0..6 {
            let b = to_hermite_basis(&qhermite(n, &c), &c);
            let mut expected = vec![Poly::zero(); n + 1];
            expected[n] = Poly::constant(q_factorial(n, &c));
            assert_eq!(b.b(), expected.as_slice());
        }
        // x^3 = h_3 + (2+q) t h_1
        let b = to_hermite_basis(&QPolynomial::x_pow(3), &c);
        assert_eq!(b.b()[1], Poly::monomial(rational(5, 2), 1));
        assert_eq!(b.b()[3], Poly::constant(q_factorial(3, &c)));
        assert!(b.b()[0].is_zero() && b.b()[2].is_zero());
    }

    #[test]
    fn evaluation_examples() {
        let c = ctx(1, 2);
        let one = rational(1, 1);
        assert_eq!(qhermite(2, &c).eval(&one, &one, &c), rational(0, 1));
        assert_eq!(qhermite(1, &c).eval(&rational(7, 3), &rational(5, 1), &c), rational(7, 3));
        assert_eq!(qhermite(3, &c).eval(&rational(2, 1), &one, &c), rational(3, 1));
        // a Hermite-basis polynomial evaluates to the same value as its monomial form
        let f = QPolynomial::new(Basis::Hermite, vec![tpoly(&[(1, 1)]), tpoly(&[(0, 1), (2, 1)]), tpoly(&[(3, 2)])]);
        let (x, t) = (rational(-1, 3), rational(2, 5));
        assert_eq!(f.eval(&x, &t, &c), f.to_monomial(&c).eval(&x, &t, &c));
    }

    #[test]
    fn scaling_identity() {
        let c = QContext::float(0.5).unwrap();
        assert!(scaling_check(2, 1.0, 4.0, &c).unwrap());
        assert!(scaling_check(1, -0.3, 2.0, &c).unwrap());
        assert!(scaling_check(5, 0.7, 0.3, &c).unwrap());
        assert!(scaling_check(2, 1.0, 0.0, &c).is_err());
        let mut h = [0.0; 3];
        hermite_values_f64(1.0, 4.0, 0.5, &mut h);
        assert_eq!(h[2], -3.0);
    }

    #[test]
    fn growth_bound_examples() {
        let c = QContext::float(0.5).unwrap();
        assert_eq!(growth_bound(0, 3.0, &c), 1.0);
        let w = 2.0 * (2.0f64).sqrt() / (0.5f64).sqrt();
        assert!(growth_bound(1, 2.0, &c) >= w - 1e-12);
        let consts = growth_constants(6, 0.5);
        for (n, k) in consts.iter().enumerate() {
            assert!((k - growth_bound(n, 1.0, &c)).abs() < 1e-9 * k);
        }
    }

    #[test]
    fn growth_bound_dominates_grid_maximum() {
        for q in [0.2, 0.5, 0.8] {
            let c = QContext::float(q).unwrap();
            for t in [0.5f64, 1.0, 3.0] {
                let w = 2.0 * t.sqrt() / (1.0 - q).sqrt();
                let mut h = [0.0; 9];
                let mut max = [0.0f64; 9];
                for i in 0..=10_000 {
                    let x = -w + 2.0 * w * i as f64 / 10_000.0;
                    hermite_values_f64(x, t, q, &mut h);
                    for (m, v) in max.iter_mut().zip(&h) {
                        *m = m.max(v.abs());
                    }
                }
                for (n, m) in max.iter().enumerate() {
                    assert!(growth_bound(n, t, &c) >= m * (1.0 - 1e-12), "q={q} t={t} n={n}");
                }
            }
        }
    }

    fn random_qpoly() -> impl Strategy<Value = QPolynomial<BigRational>> {
        prop::collection::vec(prop::collection::vec((-6i64..=6, 1i64..=4), 0..=3), 0..=11).prop_map(|cs| {
            QPolynomial::monomial(
                cs.into_iter()
                    .map(|c| Poly::from_coeffs(c.into_iter().map(|(n, d)| rational(n, d)).collect()))
                    .collect(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn basis_round_trip_is_identity(f in random_qpoly(), qi in 0usize..3) {
            let c = [ctx(1, 5), ctx(1, 2), ctx(4, 5)][qi].clone();
            let b = to_hermite_basis(&f, &c);
            prop_assert_eq!(b.to_polynomial(&c), f.clone());
            prop_assert_eq!(f.to_hermite(&c).to_monomial(&c), f);
        }
    }
}
