//! Inverse-CDF sampling from tabulated q-Gaussian and transition laws.
//!
//! The CDF of `theta` (where `y = w sin(theta)`) is tabulated on a uniform
//! grid of [`CDF_GRID`] cells. Between grid points it is interpolated by a
//! cubic Hermite spline whose end slopes are the exact densities, limited
//! cell by cell (Fritsch–Carlson) so the interpolant stays monotone. A draw
//! locates the cell by bisection, starts from the linear interpolant and
//! takes one Newton step on the cubic.
//!
//! [`MehlerKernel`] serves the path simulator. On the geometric grid every
//! transition `P_{s,t}` has the same ratio `s/t`, and by the scaling
//! `B_{ct} ~ sqrt(c) B_t` all of them are copies of one kernel at `t = 1`.
//! Writing that kernel in its orthonormal-polynomial expansion
//!
//! `P_{s,1}(x, dy) = gamma_1(dy) sum_n rho^n p_n(x) p_n(y)`, `rho = sqrt(s)`,
//!
//! separates `x` from `y`, so the CDF at any start point is a dot product of
//! `rho^n p_n(x)` with one precomputed table of `int p_n d gamma_1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gauss_quad::legendre::GaussLegendre;
use rand::Rng;

use super::{support_half_width, DensityKind, DensitySpec};
use crate::error::{QbmError, Result};
use crate::qcore::QContext;

/// Number of cells in every tabulated CDF.
pub const CDF_GRID: usize = 2048;

/// Allowed deviation of the tabulated total mass from 1.
const NORMALIZATION_TOL: f64 = 1e-6;

/// Spacing of the coarse search level of [`MehlerKernel`].
const COARSE_STEP: usize = 32;

/// Per-cell Gauss–Legendre order used to accumulate the CDF.
const CELL_ORDER: usize = 8;

fn grid_step() -> f64 {
    PI / CDF_GRID as f64
}

fn grid_theta(i: usize) -> f64 {
    -FRAC_PI_2 + grid_step() * i as f64
}

/// `(offset, weight)` pairs of the per-cell rule on `[0, 1]`.
fn cell_rule() -> Vec<(f64, f64)> {
    GaussLegendre::new(CELL_ORDER)
        .expect("order >= 2")
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Finds `tau` in `[0, 1]` with `H(tau) = u` for the cubic Hermite
/// interpolant on one cell: linear start, one Newton step.
fn invert_cell(u: f64, f0: f64, f1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    let delta = f1 - f0;
    if !(delta > 0.0) {
        return 0.5;
    }
    let secant = delta / h;
    let (mut m0, mut m1) = (d0.max(0.0) / secant, d1.max(0.0) / secant);
    let r2 = m0 * m0 + m1 * m1;
    if r2 > 9.0 {
        let s = 3.0 / r2.sqrt();
        m0 *= s;
        m1 *= s;
    }
    let tau = ((u - f0) / delta).clamp(0.0, 1.0);
    // H(tau) = f0 + delta * c(tau), with c the normalized cubic.
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let c = (3.0 * t2 - 2.0 * t3) + m0 * (t3 - 2.0 * t2 + tau) + m1 * (t3 - t2);
    let dc = (6.0 * tau - 6.0 * t2) + m0 * (3.0 * t2 - 4.0 * tau + 1.0) + m1 * (3.0 * t2 - 2.0 * tau);
    if dc > 0.0 {
        (tau - (f0 + delta * c - u) / (delta * dc)).clamp(0.0, 1.0)
    } else {
        tau
    }
}

/// Largest `i` with `cdf(i) <= u`, restricted to `0..CDF_GRID`.
fn locate(u: f64, mut cdf: impl FnMut(usize) -> f64) -> usize {
    let (mut lo, mut hi) = (0, CDF_GRID);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cdf(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Tabulated CDF of `theta` for one density.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedCdf {
    half_width: f64,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl TabulatedCdf {
    pub fn build(spec: &DensitySpec) -> Result<Self> {
        let h = grid_step();
        let rule = cell_rule();
        let mut cdf = Vec::with_capacity(CDF_GRID + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..CDF_GRID {
            let a = grid_theta(i);
            acc += h * rule.iter().map(|&(x, w)| w * spec.theta_density(a + h * x)).sum::<f64>();
            cdf.push(acc);
        }
        let total = acc;
        if !((total - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(QbmError::CdfNormalization(total - 1.0));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        let density = (0..=CDF_GRID).map(|i| spec.theta_density(grid_theta(i)) / total).collect();
        Ok(TabulatedCdf { half_width: spec.half_width(), cdf, density })
    }

    /// As [`build`](Self::build), reading and writing `cache` when given.
    pub fn build_cached(spec: &DensitySpec, cache: Option<&CdfCache>) -> Result<Self> {
        let Some(cache) = cache else { return Self::build(spec) };
        let key = CacheKey::of(spec);
        if let Some(table) = cache.load(&key) {
            return Ok(table);
        }
        let table = Self::build(spec)?;
        cache.store(&key, &table)?;
        Ok(table)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Tabulated values at the grid angles.
    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    /// `y` with `F(y) = u`.
    pub fn invert(&self, u: f64) -> f64 {
        let h = grid_step();
        let i = locate(u, |i| self.cdf[i]);
        let tau = invert_cell(u, self.cdf[i], self.cdf[i + 1], self.density[i], self.density[i + 1], h);
        self.half_width * (grid_theta(i) + tau * h).sin()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.invert(rng.random::<f64>())
    }
}

/// One draw from the law described by `spec`. Builds the table each call;
/// keep a [`TabulatedCdf`] for repeated draws.
pub fn sample<R: Rng + ?Sized>(spec: &DensitySpec, rng: &mut R) -> Result<f64> {
    Ok(TabulatedCdf::build(spec)?.sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct CacheKey {
    q: f64,
    s: f64,
    t: f64,
    x: f64,
    prod_order: usize,
}

impl CacheKey {
    fn of(spec: &DensitySpec) -> Self {
        let (s, t, x) = match spec.kind() {
            DensityKind::Marginal { t } => (0.0, t, 0.0),
            DensityKind::Transition { s, t, x } => (s, t, x),
        };
        CacheKey { q: spec.q(), s, t, x, prod_order: spec.n_factors() }
    }

    fn words(&self) -> [u64; 6] {
        [
            self.q.to_bits(),
            self.s.to_bits(),
            self.t.to_bits(),
            self.x.to_bits(),
            self.prod_order as u64,
            CDF_GRID as u64,
        ]
    }

    fn file_name(&self) -> String {
        let w = self.words();
        format!("{:016x}-{:016x}-{:016x}-{:016x}-{}-{}.qcdf", w[0], w[1], w[2], w[3], w[4], w[5])
    }
}

/// On-disk store of tabulated CDFs.
///
/// File layout (little endian): magic `QCDF`, format version `u32`, the key
/// `(q, s, t, x)` as `f64` bit patterns, product order and grid size as
/// `u64`, the half-width, then the `CDF_GRID + 1` CDF values and densities.
/// Values round-trip bit for bit, so cached and fresh tables agree exactly.
#[derive(Clone, Debug)]
pub struct CdfCache {
    dir: PathBuf,
}

impl CdfCache {
    const MAGIC: [u8; 4] = *b"QCDF";
    const VERSION: u32 = 1;

    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(CdfCache { dir: dir.as_ref().to_path_buf() })
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    fn store(&self, key: &CacheKey, table: &TabulatedCdf) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + 16 * (CDF_GRID + 1));
        buf.extend_from_slice(&Self::MAGIC);
        buf.extend_from_slice(&Self::VERSION.to_le_bytes());
        for w in key.words() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        buf.extend_from_slice(&table.half_width.to_le_bytes());
        for v in table.cdf.iter().chain(&table.density) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        // Write to a temporary name first so readers never see a partial file.
        let path = self.path(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// The stored table, or `None` when absent, stale or unreadable.
    fn load(&self, key: &CacheKey) -> Option<TabulatedCdf> {
        let mut bytes = Vec::new();
        fs::File::open(self.path(key)).ok()?.read_to_end(&mut bytes).ok()?;
        let mut words = bytes.chunks_exact(8);
        let header = bytes.get(..8)?;
        if header[..4] != Self::MAGIC || u32::from_le_bytes(header[4..8].try_into().ok()?) != Self::VERSION {
            return None;
        }
        words.next();
        let mut next = || words.next().map(|w| u64::from_le_bytes(w.try_into().expect("8 bytes")));
        for expected in key.words() {
            if next()? != expected {
                return None;
            }
        }
        let half_width = f64::from_bits(next()?);
        let mut read = |n: usize| (0..n).map(|_| next().map(f64::from_bits)).collect::<Option<Vec<_>>>();
        let cdf = read(CDF_GRID + 1)?;
        let density = read(CDF_GRID + 1)?;
        Some(TabulatedCdf { half_width, cdf, density })
    }
}

/// The transition kernel `P_{ratio * t, t}` in normalized form, sampled
/// through its orthonormal-polynomial expansion.
#[derive(Clone, Debug)]
pub struct MehlerKernel {
    q: f64,
    ratio: f64,
    rho: f64,
    prod_eps: f64,
    n_terms: usize,
    /// Half-width of the time-1 support.
    unit_width: f64,
    /// `cum[i * n_terms + n] = int_{-pi/2}^{theta_i} p_n d gamma_1`.
    cum: Vec<f64>,
    /// `(1/sqrt([n+1]), sqrt([n]))` of the orthonormal recurrence.
    recurrence: Vec<(f64, f64)>,
    /// Every `COARSE_STEP`-th row of `cum`, stored contiguously.
    coarse: Vec<f64>,
    /// `dens[i * n_terms + n] = p_n(y_i) gamma_1`-density in `theta` at `theta_i`.
    dens: Vec<f64>,
}

impl MehlerKernel {
    /// Largest expansion length the kernel accepts.
    pub const MAX_TERMS: usize = 4000;
    /// Target for the neglected tail `rho^n sup|p_n|^2`.
    const TAIL_EPS: f64 = 1e-13;

    /// Kernel for transitions from time `ratio * t` to time `t`, `0 <= ratio < 1`.
    pub fn new(q: f64, ratio: f64, prod_eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(QbmError::InvalidParameter(format!("kernel time ratio must lie in [0, 1), got {ratio}")));
        }
        let ctx = QContext::with_tolerances(q, prod_eps, crate::qcore::DEFAULT_TAIL_EPS)?;
        let gamma = DensitySpec::marginal(1.0, &ctx)?;
        let unit_width = support_half_width(1.0, q);
        let rho = ratio.sqrt();
        let h = grid_step();
        let rule = cell_rule();

        // Points: grid angles and per-cell quadrature nodes, with their gamma weights.
        let grid_pts: Vec<f64> = (0..=CDF_GRID).map(grid_theta).collect();
        let grid_w: Vec<f64> = grid_pts.iter().map(|&th| gamma.theta_density(th)).collect();
        let cell_pts: Vec<f64> = (0..CDF_GRID)
            .flat_map(|i| rule.iter().map(move |&(x, _)| grid_theta(i) + h * x))
            .collect();
        let cell_w: Vec<f64> = cell_pts
            .iter()
            .enumerate()
            .map(|(j, &th)| h * rule[j % CELL_ORDER].1 * gamma.theta_density(th))
            .collect();

        // Run the orthonormal recurrence at every point until the tail is small.
        let q_ints = |n: usize| (1.0 - q.powi(n as i32)) / (1.0 - q);
        let mut grid_prev = vec![0.0; grid_pts.len()];
        let mut grid_cur = vec![1.0; grid_pts.len()];
        let mut cell_prev = vec![0.0; cell_pts.len()];
        let mut cell_cur = vec![1.0; cell_pts.len()];
        let grid_y: Vec<f64> = grid_pts.iter().map(|th| unit_width * th.sin()).collect();
        let cell_y: Vec<f64> = cell_pts.iter().map(|th| unit_width * th.sin()).collect();
        let mut cum_rows: Vec<Vec<f64>> = Vec::new();
        let mut dens_rows: Vec<Vec<f64>> = Vec::new();
        let mut rho_n = 1.0;
        let mut quiet = 0;
        for n in 0..Self::MAX_TERMS {
            dens_rows.push(grid_cur.iter().zip(&grid_w).map(|(p, w)| p * w).collect());
            let mut acc = 0.0;
            let mut row = Vec::with_capacity(CDF_GRID + 1);
            row.push(0.0);
            for cell in cell_cur.chunks_exact(CELL_ORDER).zip(cell_w.chunks_exact(CELL_ORDER)) {
                acc += cell.0.iter().zip(cell.1).map(|(p, w)| p * w).sum::<f64>();
                row.push(acc);
            }
            cum_rows.push(row);
            let sup = grid_cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            quiet = if rho_n * sup * sup < Self::TAIL_EPS { quiet + 1 } else { 0 };
            if quiet == 4 {
                break;
            }
            let (a, b) = (q_ints(n + 1).sqrt(), q_ints(n).sqrt());
            for (p, (c, y)) in grid_prev.iter_mut().zip(grid_cur.iter_mut().zip(&grid_y)) {
                let next = (y * *c - b * *p) / a;
                *p = std::mem::replace(c, next);
            }
            for (p, (c, y)) in cell_prev.iter_mut().zip(cell_cur.iter_mut().zip(&cell_y)) {
                let next = (y * *c - b * *p) / a;
                *p = std::mem::replace(c, next);
            }
            rho_n *= rho;
        }
        if quiet < 4 {
            return Err(QbmError::InvalidParameter(format!(
                "time ratio {ratio} is too close to 1 for a {}-term kernel expansion at q = {q}",
                Self::MAX_TERMS
            )));
        }
        let n_terms = cum_rows.len();

        // Store point-major so a CDF value is one contiguous dot product.
        let transpose = |rows: &[Vec<f64>]| {
            let mut out = vec![0.0; (CDF_GRID + 1) * n_terms];
            for (n, row) in rows.iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    out[i * n_terms + n] = *v;
                }
            }
            out
        };
        let cum = transpose(&cum_rows);
        let dens = transpose(&dens_rows);
        let coarse = (0..=CDF_GRID)
            .step_by(COARSE_STEP)
            .flat_map(|i| cum[i * n_terms..(i + 1) * n_terms].iter().copied())
            .collect();
        let total = cum[CDF_GRID * n_terms];
        if !((total - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(QbmError::CdfNormalization(total - 1.0));
        }
        let recurrence = (0..n_terms).map(|n| (1.0 / q_ints(n + 1).sqrt(), q_ints(n).sqrt())).collect();
        Ok(MehlerKernel { q, ratio, rho, prod_eps, n_terms, unit_width, cum, recurrence, coarse, dens })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    /// `rho^n p_n(x_hat)` for a normalized start point.
    fn coefficients(&self, x_hat: f64, rho: f64) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.n_terms);
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut rho_n = 1.0;
        for (inv_a, b) in &self.recurrence {
            c.push(rho_n * cur);
            if rho_n == 0.0 {
                break;
            }
            let next = (x_hat * cur - b * prev) * inv_a;
            prev = cur;
            cur = next;
            rho_n *= rho;
        }
        c.resize(self.n_terms, 0.0);
        c
    }

    fn dot(row: &[f64], c: &[f64]) -> f64 {
        // Independent partial sums let the loop pipeline.
        let mut acc = [0.0; 4];
        let (rows, row_tail) = row.split_at(row.len() / 4 * 4);
        let (cs, c_tail) = c.split_at(rows.len());
        for (r, k) in rows.chunks_exact(4).zip(cs.chunks_exact(4)) {
            for j in 0..4 {
                acc[j] += r[j] * k[j];
            }
        }
        let tail: f64 = row_tail.iter().zip(c_tail).map(|(a, b)| a * b).sum();
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    /// Drops trailing coefficients whose absolute sum is below the tail
    /// target; each tabulated entry is bounded by 1 in absolute value.
    fn trim(c: &mut Vec<f64>) {
        let mut tail = 0.0;
        while let Some(&last) = c.last() {
            if c.len() == 1 || tail + last.abs() >= Self::TAIL_EPS {
                break;
            }
            tail += last.abs();
            c.pop();
        }
    }

    fn invert_normalized(&self, c: &[f64], u: f64) -> f64 {
        let n = self.n_terms;
        let m = c.len();
        let h = grid_step();
        let cum = |i: usize| Self::dot(&self.cum[i * n..i * n + m], c);
        let coarse = |j: usize| Self::dot(&self.coarse[j * n..j * n + m], c);
        // The coarse rows stay cache resident; narrow the cell with them first.
        let (mut lo, mut hi) = (0, CDF_GRID / COARSE_STEP);
        let (mut f_lo, mut f_hi) = (0.0, coarse(hi));
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let v = coarse(mid);
            if v <= u {
                (lo, f_lo) = (mid, v);
            } else {
                (hi, f_hi) = (mid, v);
            }
        }
        let (mut lo, mut hi) = (lo * COARSE_STEP, hi * COARSE_STEP);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let v = cum(mid);
            if v <= u {
                (lo, f_lo) = (mid, v);
            } else {
                (hi, f_hi) = (mid, v);
            }
        }
        let d0 = Self::dot(&self.dens[lo * n..lo * n + m], c);
        let d1 = Self::dot(&self.dens[hi * n..hi * n + m], c);
        let tau = invert_cell(u, f_lo, f_hi, d0, d1, h);
        self.unit_width * (grid_theta(lo) + tau * h).sin()
    }

    /// Draw of `B_t` given `B_{ratio * t} = x`, driven by the uniform `u`.
    /// The start point is clamped onto the support of its marginal.
    pub fn sample_transition(&self, x: f64, t: f64, u: f64) -> f64 {
        let s = self.ratio * t;
        let x_hat = if s > 0.0 { (x / s.sqrt()).clamp(-self.unit_width, self.unit_width) } else { 0.0 };
        let mut c = self.coefficients(x_hat, self.rho);
        Self::trim(&mut c);
        t.sqrt() * self.invert_normalized(&c, u)
    }

    /// Draw from the marginal `gamma_t`, driven by the uniform `u`.
    pub fn sample_marginal(&self, t: f64, u: f64) -> f64 {
        t.sqrt() * self.invert_normalized(&[1.0], u)
    }

    /// Transition density `P_{ratio t, t}(x, y)` from the truncated expansion.
    pub fn density(&self, x: f64, t: f64, y: f64) -> f64 {
        let w = self.unit_width * t.sqrt();
        if !(y.abs() < w) {
            return 0.0;
        }
        let s = self.ratio * t;
        let x_hat = if s > 0.0 { x / s.sqrt() } else { 0.0 };
        let c = self.coefficients(x_hat, self.rho);
        let y_hat = y / t.sqrt();
        let p = self.coefficients(y_hat, 1.0);
        let ctx = QContext::with_tolerances(self.q, self.prod_eps, crate::qcore::DEFAULT_TAIL_EPS).expect("validated q");
        let gamma = DensitySpec::marginal(t, &ctx).expect("t > 0").density(y);
        gamma * Self::dot(&c, &p)
    }
}
