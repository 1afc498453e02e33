//! Exact identities checked in rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{oracle_ez2_exact, oracle_ez4_exact, params, VerificationReport};
use crate::error::Result;
use crate::poly::Poly;
use crate::qcore::{jackson_integral, jackson_stieltjes, q_int, QContext};
use crate::qhermite::{hermite_table, hermite_values, QPolynomial};
use crate::qito::{a_operator, d_operator, delta_exact, ito_defect, nabla_exact, q_product_defect};
use crate::scalar::Scalar;
use crate::stochint::{def_sum, PolynomialIntegrand};

/// The values of `q` the exact suite runs at, as `(numerator, denominator)`.
pub const EXACT_Q: [(i64, i64); 3] = [(1, 5), (1, 2), (4, 5)];

/// Names of the identity families, usable as filters.
pub const EXACT_SUITES: &[&str] =
    &["recurrence", "by-parts", "antiderivative", "q-product", "nabla-lemma", "a-lemma", "delta-identification", "wdw", "example-x2", "ito-telescoping", "kurtosis-r0"];

const RANDOM_TRIALS: usize = 24;

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn random_rational(rng: &mut impl Rng) -> BigRational {
    rational(rng.random_range(-9..=9), rng.random_range(1..=7))
}

fn random_time(rng: &mut impl Rng) -> BigRational {
    rational(rng.random_range(1..=9), rng.random_range(1..=7))
}

fn random_poly(rng: &mut impl Rng, max_degree: usize) -> Poly<BigRational> {
    let degree = rng.random_range(0..=max_degree);
    Poly::from_coeffs((0..=degree).map(|_| random_rational(rng)).collect())
}

fn random_qpoly(rng: &mut impl Rng, max_degree: usize) -> QPolynomial<BigRational> {
    let degree = rng.random_range(0..=max_degree);
    QPolynomial::monomial((0..=degree).map(|_| random_poly(rng, 2)).collect())
}

/// Grid `t q^k`, `k = 0..=depth`, with random rational path values.
fn random_grid(rng: &mut impl Rng, q: &BigRational, depth: usize) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut t = rational(rng.random_range(1..=9), rng.random_range(1..=4));
    let mut times = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        times.push(t.clone());
        t *= q.clone();
    }
    let values = (0..=depth).map(|_| random_rational(rng)).collect();
    (times, values)
}

/// Counts failures of `trial` over `cases` and turns them into a report.
fn tally(name: &str, q: f64, cases: usize, mut trial: impl FnMut(usize) -> Result<bool>) -> Result<VerificationReport> {
    let mut failures = 0usize;
    for i in 0..cases {
        if !trial(i)? {
            failures += 1;
        }
    }
    Ok(VerificationReport::deterministic(name, params(&[("q", q), ("cases", cases as f64)]), 0.0, failures as f64, 0.0)
        .with_note(format!("{failures} of {cases} cases differ")))
}

fn suite(name: &str, qn: i64, qd: i64, seed: u64) -> Result<VerificationReport> {
    let q = rational(qn, qd);
    let qf = qn as f64 / qd as f64;
    let ctx = QContext::exact(q.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = rational(0, 1);
    match name {
        "recurrence" => {
            // x h_n = h_{n+1} + t [n] h_{n-1}, symbolic in t, n <= 12
            let table = hermite_table(13, &ctx);
            tally(name, qf, 13, |n| {
                let mut rhs = table[n + 1].clone();
                if n > 0 {
                    rhs = rhs.add(&table[n - 1].mul_time(&Poly::monomial(q_int(n, &ctx), 1)));
                }
                Ok(table[n].mul_x().sub(&rhs).is_zero())
            })
        }
        "by-parts" => tally(name, qf, RANDOM_TRIALS, |_| {
            // int a d_q b = a(t) b(t) - a(0) b(0) - int b(q s) d_q a(s)
            let (a, b, t) = (random_poly(&mut rng, 8), random_poly(&mut rng, 8), random_time(&mut rng));
            let lhs = jackson_stieltjes(&a, &b, &t, &ctx)?;
            let rhs = a.eval(&t) * b.eval(&t) - a.eval(&zero) * b.eval(&zero) - jackson_stieltjes(&b.scale_arg(&q), &a, &t, &ctx)?;
            Ok(lhs == rhs)
        }),
        "antiderivative" => tally(name, qf, RANDOM_TRIALS, |_| {
            let (b, t) = (random_poly(&mut rng, 8), random_time(&mut rng));
            Ok(b.eval(&t) - b.eval(&zero) == jackson_integral(&b.q_derivative(&q), &t, &ctx)?)
        }),
        "q-product" => tally(name, qf, RANDOM_TRIALS, |_| {
            let (b, h) = (random_poly(&mut rng, 8), random_poly(&mut rng, 8));
            Ok(q_product_defect(&b, &h, &ctx).is_zero())
        }),
        "nabla-lemma" => {
            // nabla h_{m+1}(.; s) = [m+1] h_m(.; s), m <= 8
            let table = hermite_table(9, &ctx);
            tally(name, qf, 9, |m| Ok(nabla_exact(&table[m + 1], &ctx) == table[m].scale(&q_int(m + 1, &ctx))))
        }
        "a-lemma" => {
            // D(x h_m) - x D(h_m) = [m] h_{m-1}(.; qs), with D from the time route
            let table = hermite_table(9, &ctx);
            tally(name, qf, 8, |i| {
                let m = i + 1;
                let h = &table[m];
                let commutator = d_operator(&h.mul_x(), &ctx).sub(&d_operator(h, &ctx).mul_x());
                let expected = table[m - 1].scale_time(&q).scale(&q_int(m, &ctx));
                Ok(commutator == expected && a_operator(h, &ctx) == expected)
            })
        }
        "delta-identification" => tally(name, qf, 10 + RANDOM_TRIALS, |i| {
            // Delta (the divided-difference route) equals D (the time route)
            let f = if i < 10 { QPolynomial::x_pow(i) } else { random_qpoly(&mut rng, 8) };
            Ok(delta_exact(&f, &ctx) == d_operator(&f, &ctx))
        }),
        "wdw" => tally(name, qf, RANDOM_TRIALS, |i| {
            // int h_n d-slash B telescopes to (h_{n+1}(B_0) - h_{n+1}(B_K)) / [n+1]
            let n = i % 7;
            let (times, values) = random_grid(&mut rng, &q, 4);
            let f = PolynomialIntegrand::from_polynomial(&hermite_table(n, &ctx)[n], &ctx);
            let h0 = hermite_values(&values[0], &times[0], &q, n + 1);
            let hk = hermite_values(&values[4], &times[4], &q, n + 1);
            Ok(def_sum(&f, &times, &values, &ctx)? == (h0[n + 1].clone() - hk[n + 1].clone()) / q_int(n + 1, &ctx))
        }),
        "example-x2" => tally(name, qf, RANDOM_TRIALS, |i| {
            let (times, values) = random_grid(&mut rng, &q, 5);
            let k = times.len() - 1;
            if i % 2 == 0 {
                // int B d-slash B = (B^2 - t) / (1 + q)
                let f = PolynomialIntegrand::from_polynomial(&QPolynomial::x_pow(1), &ctx);
                let sq = |j: usize| values[j].clone() * values[j].clone() - times[j].clone();
                Ok(def_sum(&f, &times, &values, &ctx)? == (sq(0) - sq(k)) / (rational(1, 1) + q.clone()))
            } else {
                // int B^2 d-slash B = h_3(B; t) / [3] + int s d_q B
                let f = PolynomialIntegrand::from_polynomial(&QPolynomial::x_pow(2), &ctx);
                let c3 = rational(2, 1) + q.clone();
                let h3 = |j: usize| {
                    let x = values[j].clone();
                    x.clone() * x.clone() * x.clone() - c3.clone() * times[j].clone() * x
                };
                let deterministic = (0..k).fold(zero.clone(), |acc, j| acc + times[j].clone() * (values[j].clone() - values[j + 1].clone()));
                Ok(def_sum(&f, &times, &values, &ctx)? == (h3(0) - h3(k)) / q_int(3, &ctx) + deterministic)
            }
        }),
        "ito-telescoping" => tally(name, qf, RANDOM_TRIALS, |_| {
            // the three q-Ito sums reproduce f(B_0, t_0) - f(B_K, t_K) cell by cell
            let f = random_qpoly(&mut rng, 6);
            let (times, values) = random_grid(&mut rng, &q, 5);
            Ok(ito_defect(&f, &times, &values, &ctx)? == zero)
        }),
        "kurtosis-r0" => tally(name, qf, 2, |i| {
            if i == 0 {
                let ratio = oracle_ez4_exact(0, &q) / oracle_ez2_exact(0, &q).powu(2);
                Ok(ratio == rational(2, 1) + q.clone())
            } else {
                // E(Z^2) = 1/[2r+1] at r = 1
                Ok(oracle_ez2_exact(1, &q) == rational(1, 1) / q_int(3, &ctx))
            }
        }),
        other => Err(crate::error::QbmError::UnknownCheck(other.to_string())),
    }
}

/// Runs the exact identity families (all of them, or those named in
/// `only`) at every `q` in [`EXACT_Q`]. Random cases are drawn from `seed`.
pub fn exact_identity_suite(only: Option<&[String]>, seed: u64) -> Result<Vec<VerificationReport>> {
    if let Some(names) = only {
        if let Some(bad) = names.iter().find(|n| !EXACT_SUITES.contains(&n.as_str())) {
            return Err(crate::error::QbmError::UnknownCheck(bad.clone()));
        }
    }
    let mut reports = Vec::new();
    for (i, name) in EXACT_SUITES.iter().enumerate() {
        if only.is_some_and(|names| !names.iter().any(|n| n == name)) {
            continue;
        }
        for (j, &(n, d)) in EXACT_Q.iter().enumerate() {
            reports.push(suite(name, n, d, seed.wrapping_add((i * 16 + j) as u64))?);
        }
    }
    Ok(reports)
}
