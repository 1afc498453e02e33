//! Gauss–Legendre quadrature in the angle variable `theta` of
//! `y = w sin(theta)`.
//!
//! [`integrate`] is adaptive: every panel of `[-pi/2, pi/2]` is integrated at
//! order `M` and `2M`, the difference of the two estimates is the panel's
//! error indicator, and the panel with the largest indicator is bisected
//! until the summed indicators fall below `rel_tol * int |g| d(law)`.
//! Kernels with a small time step concentrate their mass on a short
//! `theta` range, which a single global rule would need tens of thousands
//! of nodes to resolve. The initial panels break at the mean of the law so
//! that nodes always land next to the peak.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use super::DensitySpec;
use crate::error::{QbmError, Result};

/// Gauss–Legendre nodes and weights on `[-pi/2, pi/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule of order `order >= 2`; the weights are positive and sum to `pi`.
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order).map_err(|e| {
            QbmError::InvalidParameter(format!("Gauss-Legendre order {order}: {e}"))
        })?;
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (FRAC_PI_2 * x, FRAC_PI_2 * w))
            .unzip();
        Ok(QuadratureRule { nodes, weights })
    }

    /// Shared immutable copy of the order-`order` rule.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static RULES: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let rules = RULES.get_or_init(Default::default);
        if let Some(rule) = rules.lock().expect("rule cache poisoned").get(&order) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::gauss_legendre(order)?);
        rules.lock().expect("rule cache poisoned").insert(order, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_a^b h(theta) d theta` with the rule mapped onto `[a, b]`;
    /// returns the value and the integral of `|h|`.
    pub fn apply_on(&self, a: f64, b: f64, mut h: impl FnMut(f64) -> f64) -> (f64, f64) {
        let half = 0.5 * (b - a) / FRAC_PI_2;
        let mid = 0.5 * (a + b);
        let (mut value, mut abs) = (0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = w * h(mid + half * x);
            value += v;
            abs += v.abs();
        }
        (value * half, abs * half)
    }
}

/// Controls of the adaptive rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Base order `M`; each panel is evaluated at `M` and `2M`.
    pub order: usize,
    /// Stop once the summed panel differences are below
    /// `rel_tol * int |g| d(law)`.
    pub rel_tol: f64,
    /// Absolute floor on the stopping threshold, for integrands that vanish
    /// up to rounding.
    pub abs_tol: f64,
    /// Panels on each side of the break point before any refinement.
    pub initial_panels: usize,
    /// Panel budget; exceeding it is a non-convergence error.
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 16, rel_tol: 1e-10, abs_tol: 0.0, initial_panels: 2, max_panels: 4096 }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        QuadratureOptions { rel_tol, ..self }
    }

    pub fn with_abs_tol(self, abs_tol: f64) -> Self {
        QuadratureOptions { abs_tol, ..self }
    }
}

/// Value of an integral together with its convergence diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Integral of the absolute value of the integrand.
    pub abs_value: f64,
    /// Summed difference between the order-`M` and order-`2M` panel estimates.
    pub error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// `int g(y) law(dy)` for the marginal or transition law described by `spec`.
pub fn integrate(mut g: impl FnMut(f64) -> f64, spec: &DensitySpec, opts: &QuadratureOptions) -> Result<Integral> {
    let mean = match spec.kind() {
        super::DensityKind::Marginal { .. } => 0.0,
        super::DensityKind::Transition { x, .. } => x,
    };
    let split = (mean / spec.half_width()).clamp(-1.0, 1.0).asin();
    integrate_theta_split(
        split,
        |theta| {
            let p = spec.theta_density(theta);
            if p == 0.0 {
                0.0
            } else {
                g(spec.y_of_theta(theta)) * p
            }
        },
        opts,
    )
}

/// `int g(y) law(dy)` with one fixed rule over the whole angle range.
pub fn integrate_with_rule(mut g: impl FnMut(f64) -> f64, spec: &DensitySpec, rule: &QuadratureRule) -> f64 {
    rule.apply_on(-FRAC_PI_2, FRAC_PI_2, |theta| g(spec.y_of_theta(theta)) * spec.theta_density(theta))
        .0
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    abs: f64,
    error: f64,
}

/// Adaptive integral of a bounded function of `theta` over `[-pi/2, pi/2]`.
pub fn integrate_theta(h: impl FnMut(f64) -> f64, opts: &QuadratureOptions) -> Result<Integral> {
    integrate_theta_split(0.0, h, opts)
}

/// As [`integrate_theta`], with the initial panels broken at `split`.
pub fn integrate_theta_split(split: f64, mut h: impl FnMut(f64) -> f64, opts: &QuadratureOptions) -> Result<Integral> {
    let coarse = QuadratureRule::cached(opts.order)?;
    let fine = QuadratureRule::cached(2 * opts.order)?;
    let per_panel = coarse.order() + fine.order();
    let mut evaluations = 0;
    let mut panel = |a: f64, b: f64, h: &mut dyn FnMut(f64) -> f64| {
        evaluations += per_panel;
        let (lo, _) = coarse.apply_on(a, b, &mut *h);
        let (value, abs) = fine.apply_on(a, b, &mut *h);
        Panel { a, b, value, abs, error: (value - lo).abs() }
    };
    let split = split.clamp(-FRAC_PI_2, FRAC_PI_2);
    let n = opts.initial_panels.max(1);
    let mut panels = Vec::with_capacity(4 * n);
    for (a, b) in [(-FRAC_PI_2, split), (split, FRAC_PI_2)] {
        if b > a {
            let step = (b - a) / n as f64;
            for i in 0..n {
                let hi = if i + 1 == n { b } else { a + step * (i + 1) as f64 };
                panels.push(panel(a + step * i as f64, hi, &mut h));
            }
        }
    }
    loop {
        let abs: f64 = panels.iter().map(|p| p.abs).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let (worst, worst_error) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.error))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        // Below ~1e-15 of the total the indicator is rounding noise.
        if error <= (opts.rel_tol * abs).max(opts.abs_tol) || worst_error <= 1e-15 * abs {
            let value = panels.iter().map(|p| p.value).sum();
            return Ok(Integral { value, abs_value: abs, error, panels: panels.len(), evaluations });
        }
        if panels.len() >= opts.max_panels {
            return Err(QbmError::QuadratureNonConvergence { order: evaluations, change: error / abs.max(f64::MIN_POSITIVE) });
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(panel(p.a, mid, &mut h));
        panels.push(panel(mid, p.b, &mut h));
    }
}
