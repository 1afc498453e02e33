//! Deterministic checks of the densities and the numeric operators by
//! quadrature.

use super::{params, VerificationReport};
use crate::error::Result;
use crate::measures::{integrate, support_half_width, DensitySpec, QuadratureOptions};
use crate::qcore::QContext;
use crate::qhermite::{growth_bound, hermite_values_f64, qhermite, QPolynomial};
use crate::qito::{delta_exact, delta_numeric, nabla_exact, nabla_numeric, SpacePolynomial};

/// Tolerance of the single-integral checks, relative to the size of the
/// integrand's oracle (at least 1).
pub const QUADRATURE_TOL: f64 = 1e-7;
/// Tolerance of the nested (double-integral) checks.
pub const NESTED_TOL: f64 = 1e-6;

const SWEEP_Q: [f64; 3] = [0.2, 0.5, 0.8];
const SWEEP_T: [f64; 3] = [0.25, 1.0, 4.0];
const MARTINGALE_DEGREE: usize = 6;

/// Start points of the transition sweep: the centre and both support edges.
fn start_points(s: f64, q: f64) -> Vec<f64> {
    if s == 0.0 {
        vec![0.0]
    } else {
        let w = support_half_width(s, q);
        vec![0.0, w, -w]
    }
}

/// Normalization, moments, martingale polynomials and conditional moments
/// of the marginals and transitions over the `(q, s, t, x)` sweep.
pub fn quadrature_suite() -> Result<Vec<VerificationReport>> {
    let opts = QuadratureOptions::default();
    let mut reports = Vec::new();
    let mut h = [0.0; MARTINGALE_DEGREE + 1];
    let mut hx = [0.0; MARTINGALE_DEGREE + 1];
    for q in SWEEP_Q {
        let ctx = QContext::float(q)?;
        for t in SWEEP_T {
            let gamma = DensitySpec::marginal(t, &ctx)?;
            let p = params(&[("q", q), ("t", t)]);
            let moment = |k: i32| -> Result<f64> { Ok(integrate(|y| y.powi(k), &gamma, &opts)?.value) };
            let fourth = (2.0 + q) * t * t;
            reports.push(VerificationReport::deterministic("marginal-normalization", p.clone(), 1.0, moment(0)?, QUADRATURE_TOL));
            reports.push(VerificationReport::deterministic("marginal-variance", p.clone(), t, moment(2)?, QUADRATURE_TOL * t.max(1.0)));
            reports.push(VerificationReport::deterministic("marginal-fourth-moment", p, fourth, moment(4)?, QUADRATURE_TOL * fourth.max(1.0)));

            for s in [0.0, t / 4.0, t / 2.0] {
                for x in start_points(s, q) {
                    let kernel = DensitySpec::transition(x, s, t, &ctx)?;
                    let p = params(&[("q", q), ("t", t), ("s", s), ("x", x)]);
                    let moment = |k: i32| -> Result<f64> { Ok(integrate(|y| y.powi(k), &kernel, &opts)?.value) };

                    reports.push(VerificationReport::deterministic("transition-normalization", p.clone(), 1.0, moment(0)?, QUADRATURE_TOL));

                    hermite_values_f64(x, s, q, &mut hx);
                    for n in 0..=MARTINGALE_DEGREE {
                        let v = integrate(
                            |y| {
                                hermite_values_f64(y, t, q, &mut h);
                                h[n]
                            },
                            &kernel,
                            &opts,
                        )?
                        .value;
                        let mut pn = p.clone();
                        pn.insert("n".into(), n as f64);
                        let scale = growth_bound(n, t, &ctx).max(1.0);
                        reports.push(VerificationReport::deterministic("martingale", pn, hx[n], v, QUADRATURE_TOL * scale));
                    }

                    let d = t - s;
                    let m3 = x.powi(3) + d * (2.0 + q) * x;
                    let m4 = x.powi(4) + d * (3.0 + 2.0 * q + q * q) * x * x + d * ((2.0 + q) * t - (1.0 + q + q * q) * s);
                    let scale = 1.0 + m4.abs();
                    reports.push(VerificationReport::deterministic("conditional-cubic", p.clone(), m3, moment(3)?, QUADRATURE_TOL * scale));
                    reports.push(VerificationReport::deterministic("conditional-quartic", p, m4, moment(4)?, QUADRATURE_TOL * scale));
                }
            }
        }
    }
    Ok(reports)
}

/// `sum_j |c_j(s)| w^j`, the size of a polynomial on `[-w, w]` at time `s`.
fn size_on(f: &QPolynomial<f64>, s: f64, w: f64, ctx: &QContext<f64>) -> f64 {
    SpacePolynomial::at_time(f, s, ctx).0.iter().enumerate().map(|(j, c)| c.abs() * w.powi(j as i32)).sum()
}

/// `nabla` and `Delta` by quadrature against their exact values, for the
/// monomials and q-Hermite polynomials of degree at most 6, at five points
/// inside the kernel support, `q` in the sweep and `s` in `{1/2, 1}`.
pub fn operator_suite() -> Result<Vec<VerificationReport>> {
    let opts = QuadratureOptions::default();
    let mut reports = Vec::new();
    for q in SWEEP_Q {
        let ctx = QContext::float(q)?;
        for s in [0.5, 1.0] {
            let w = support_half_width(q * s, q);
            for degree in 0..=6 {
                for (family, f) in [("monomial", QPolynomial::x_pow(degree)), ("hermite", qhermite(degree, &ctx))] {
                    let fs = SpacePolynomial::at_time(&f, s, &ctx);
                    let nabla = nabla_exact(&f, &ctx);
                    let delta = delta_exact(&f, &ctx);
                    // Tolerances are relative to the size of the exact operator
                    // on the support, floored at 1.
                    let nabla_scale = size_on(&nabla, s, w, &ctx).max(1.0);
                    let delta_scale = size_on(&delta, s, w, &ctx).max(1.0);
                    for frac in [-0.9, -0.45, 0.0, 0.45, 0.9] {
                        let x = frac * w;
                        let p = params(&[("q", q), ("s", s), ("x", x), ("degree", degree as f64)]);
                        let n = nabla_numeric(&fs, x, s, &ctx, &opts)?;
                        reports.push(
                            VerificationReport::deterministic(&format!("nabla-{family}"), p.clone(), nabla.eval(&x, &s, &ctx), n, QUADRATURE_TOL * nabla_scale),
                        );
                        let d = delta_numeric(&fs, x, s, &ctx, &opts)?;
                        reports.push(
                            VerificationReport::deterministic(&format!("delta-{family}"), p, delta.eval(&x, &s, &ctx), d, NESTED_TOL * delta_scale),
                        );
                    }
                }
            }
        }
    }
    Ok(reports)
}
