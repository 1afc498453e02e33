//! q-Gaussian marginals and transition kernels of the q-Brownian motion.
//!
//! Both densities are infinite products. After the substitution
//! `y = w sin(theta)` with `w = 2 sqrt(t) / sqrt(1-q)` the endpoint factor
//! `1/sqrt(4t - (1-q) y^2)` cancels against `dy`, and the density in `theta`
//! becomes `(1/2pi) prod_k F_k(theta)`, a bounded smooth function on
//! `[-pi/2, pi/2]`.

pub mod quadrature;
pub mod sampler;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{QbmError, Result};
use crate::qcore::QContext;

pub use quadrature::{
    integrate, integrate_theta, integrate_theta_split, integrate_with_rule, Integral, QuadratureOptions, QuadratureRule,
};
pub use sampler::{sample, CdfCache, MehlerKernel, TabulatedCdf, CDF_GRID};

/// Half-width `2 sqrt(t) / sqrt(1-q)` of the support of the time-`t` marginal.
pub fn support_half_width(t: f64, q: f64) -> f64 {
    2.0 * t.max(0.0).sqrt() / (1.0 - q).sqrt()
}

/// Number of product factors kept: the smallest `N` with `q^N < prod_eps`.
pub fn product_order(q: f64, prod_eps: f64) -> usize {
    (prod_eps.ln() / q.ln()).floor() as usize + 1
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityKind {
    Marginal { t: f64 },
    Transition { s: f64, t: f64, x: f64 },
}

/// Per-factor constants of the product, in normalized variables
/// `u = sqrt(1-q) y / sqrt(t)`, `v = sqrt(1-q) x / sqrt(s)`:
///
/// `F_k = a (f - e u^2) / (b - c u v + d (u^2 + v^2))`.
#[derive(Clone, Copy, Debug)]
struct Factor {
    a: f64,
    f: f64,
    e: f64,
    b: f64,
    c: f64,
    d: f64,
}

fn factors(q: f64, sigma: f64, n: usize) -> Arc<[Factor]> {
    let rho = sigma.sqrt();
    let mut qk = 1.0;
    (0..n)
        .map(|_| {
            let q2k = qk * qk;
            let fac = Factor {
                a: (1.0 - sigma * qk) * (1.0 - q * qk),
                f: (1.0 + qk) * (1.0 + qk),
                e: qk,
                b: (1.0 - sigma * q2k) * (1.0 - sigma * q2k),
                c: rho * qk * (1.0 + sigma * q2k),
                d: sigma * q2k,
            };
            qk *= q;
            fac
        })
        .collect()
}

/// Parameters of `gamma_{t;q}` or `P_{s,t}(x, .)` plus the product truncation.
#[derive(Clone, Debug)]
pub struct DensitySpec {
    kind: DensityKind,
    q: f64,
    half_width: f64,
    v: f64,
    factors: Arc<[Factor]>,
}

impl DensitySpec {
    pub fn marginal(t: f64, ctx: &QContext<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(QbmError::InvalidParameter(format!("marginal needs t > 0, got {t}")));
        }
        let q = ctx.q_f64();
        let n = product_order(q, ctx.prod_eps());
        Ok(DensitySpec {
            kind: DensityKind::Marginal { t },
            q,
            half_width: support_half_width(t, q),
            v: 0.0,
            factors: factors(q, 0.0, n),
        })
    }

    /// `P_{s,t}(x, .)`; `x` must lie in the support of the time-`s` marginal.
    pub fn transition(x: f64, s: f64, t: f64, ctx: &QContext<f64>) -> Result<Self> {
        if !(s >= 0.0 && s < t && t.is_finite()) {
            return Err(QbmError::InvalidParameter(format!("transition needs 0 <= s < t, got s = {s}, t = {t}")));
        }
        let q = ctx.q_f64();
        let ws = support_half_width(s, q);
        if !(x.abs() <= ws * (1.0 + 1e-12)) {
            return Err(QbmError::OutsideSupport { x, time: s, half_width: ws });
        }
        let v = if s > 0.0 { (x / ws * 2.0).clamp(-2.0, 2.0) } else { 0.0 };
        let n = product_order(q, ctx.prod_eps());
        Ok(DensitySpec {
            kind: DensityKind::Transition { s, t, x },
            q,
            half_width: support_half_width(t, q),
            v,
            factors: factors(q, s / t, n),
        })
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// End time of the kernel (variance of the marginal).
    pub fn time(&self) -> f64 {
        match self.kind {
            DensityKind::Marginal { t } | DensityKind::Transition { t, .. } => t,
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn y_of_theta(&self, theta: f64) -> f64 {
        self.half_width * theta.sin()
    }

    /// Density of `theta` where `y = w sin(theta)`.
    pub fn theta_density(&self, theta: f64) -> f64 {
        let u = 2.0 * theta.sin();
        let u2 = u * u;
        let uv = u * self.v;
        let r2 = u2 + self.v * self.v;
        let mut acc = 1.0;
        for chunk in self.factors.chunks(8) {
            let mut num = 1.0;
            let mut den = 1.0;
            for fk in chunk {
                num *= fk.a * (fk.f - fk.e * u2);
                den *= fk.b - fk.c * uv + fk.d * r2;
            }
            acc *= num / den;
        }
        (acc / (2.0 * PI)).max(0.0)
    }

    /// Density with respect to `dy`; zero outside the support.
    pub fn density(&self, y: f64) -> f64 {
        let w = self.half_width;
        if !(y.abs() < w) {
            return 0.0;
        }
        let theta = (y / w).asin();
        self.theta_density(theta) / (w * theta.cos())
    }
}

/// `gamma_{t;q}(y)`.
pub fn qgauss_density(y: f64, t: f64, ctx: &QContext<f64>) -> Result<f64> {
    Ok(DensitySpec::marginal(t, ctx)?.density(y))
}

/// `P_{s,t}(x, y)` in the absolutely continuous regime `|x| <= 2 sqrt(s)/sqrt(1-q)`.
pub fn transition_density(x: f64, s: f64, t: f64, y: f64, ctx: &QContext<f64>) -> Result<f64> {
    Ok(DensitySpec::transition(x, s, t, ctx)?.density(y))
}

/// `b_m(t) = t^{-m} int f(x, t) h_m(x; t) gamma_t(dx)` by quadrature, for a
/// polynomial given by its `x`-coefficients at time `t`.
pub fn hermite_coefficients_by_quadrature(coeffs: &[f64], t: f64, ctx: &QContext<f64>) -> Result<Vec<f64>> {
    let spec = DensitySpec::marginal(t, ctx)?;
    let q = ctx.q_f64();
    let d = coeffs.len().saturating_sub(1);
    let opts = QuadratureOptions::default();
    (0..coeffs.len())
        .map(|m| {
            let mut h = vec![0.0; d + 1];
            let v = integrate(
                |y| {
                    crate::qhermite::hermite_values_f64(y, t, q, &mut h);
                    let f = coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c);
                    f * h[m]
                },
                &spec,
                &opts,
            )?;
            Ok(v.value / t.powi(m as i32))
        })
        .collect()
}
