//! The q-Brownian motion on the geometric grid `{t q^k : k = 0..K}`.
//!
//! A path starts with a draw from the marginal at the earliest grid time
//! `t q^K` and moves forward in time through the transition kernels
//! `P_{t q^{k+1}, t q^k}`. Every step has the same time ratio `q`, so all
//! steps share one [`MehlerKernel`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QbmError, Result};
use crate::measures::{support_half_width, DensitySpec, MehlerKernel, TabulatedCdf};
use crate::qcore::QContext;

/// Default bound on `q^K` for the grid depth.
pub const DEFAULT_GRID_TAIL: f64 = 1e-6;

/// The time set `t_k = t q^k`, `k = 0..=K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    horizon: f64,
    q: f64,
    depth: usize,
}

impl GeometricGrid {
    pub fn new(horizon: f64, q: f64, depth: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(QbmError::InvalidParameter(format!("grid horizon must be positive, got {horizon}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(QbmError::InvalidQ(q.to_string()));
        }
        if depth == 0 {
            return Err(QbmError::InvalidParameter("grid depth must be at least 1".into()));
        }
        Ok(GeometricGrid { horizon, q, depth })
    }

    /// Grid with the smallest depth such that `q^K <= DEFAULT_GRID_TAIL`.
    pub fn with_default_depth(horizon: f64, q: f64) -> Result<Self> {
        Self::new(horizon, q, Self::default_depth(q))
    }

    pub fn default_depth(q: f64) -> usize {
        let mut k = 0;
        let mut qk = 1.0;
        while qk > DEFAULT_GRID_TAIL {
            qk *= q;
            k += 1;
        }
        k.max(1)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `t q^k`; also defined for `k > K`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * self.q.powi(k as i32)
    }

    /// `t_0, ..., t_K` (decreasing).
    pub fn times(&self) -> Vec<f64> {
        (0..=self.depth).map(|k| self.time(k)).collect()
    }

    /// The same grid cut at depth `depth`.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth > self.depth {
            return Err(QbmError::InvalidParameter(format!("cannot deepen a grid from {} to {depth}", self.depth)));
        }
        Self::new(self.horizon, self.q, depth)
    }
}

/// One realization of the process on a geometric grid; `values[k]` is the
/// value at time `t q^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricPath {
    grid: GeometricGrid,
    values: Vec<f64>,
    seed: u64,
}

impl GeometricPath {
    /// A path from given values (`values[k]` at `t q^k`).
    pub fn from_values(grid: GeometricGrid, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() != grid.depth + 1 {
            return Err(QbmError::InvalidParameter(format!(
                "a depth-{} grid needs {} values, got {}",
                grid.depth,
                grid.depth + 1,
                values.len()
            )));
        }
        Ok(GeometricPath { grid, values, seed })
    }

    pub fn grid(&self) -> &GeometricGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// `B_t` at the horizon.
    pub fn terminal(&self) -> f64 {
        self.values[0]
    }

    /// `(k, t_k, B_k)` rows in index order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &b)| (k, self.grid.time(k), b))
    }

    /// The path restricted to the coarser grid of depth `depth`.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        let grid = self.grid.truncated(depth)?;
        Ok(GeometricPath { grid, values: self.values[..=depth].to_vec(), seed: self.seed })
    }

    /// Whether `|B_k| <= 2 sqrt(t_k)/sqrt(1-q)` at every grid time.
    pub fn within_support(&self) -> bool {
        self.rows().all(|(_, t, b)| b.abs() <= support_half_width(t, self.grid.q) * (1.0 + 1e-12))
    }
}

#[derive(Clone, Debug)]
enum Stepper {
    Kernel(Arc<MehlerKernel>),
    /// Direct tabulation of each product-form kernel; used when the
    /// expansion would need too many terms.
    Product(QContext<f64>),
}

/// Simulator for one grid; cheap to clone and share across threads.
#[derive(Clone, Debug)]
pub struct PathSimulator {
    grid: GeometricGrid,
    stepper: Stepper,
}

impl PathSimulator {
    pub fn new(grid: GeometricGrid, ctx: &QContext<f64>) -> Result<Self> {
        if (ctx.q_f64() - grid.q).abs() > 0.0 {
            return Err(QbmError::InvalidParameter(format!("grid q = {} differs from context q = {}", grid.q, ctx.q_f64())));
        }
        let stepper = match MehlerKernel::new(grid.q, grid.q, ctx.prod_eps()) {
            Ok(kernel) => Stepper::Kernel(Arc::new(kernel)),
            Err(QbmError::InvalidParameter(_)) => Stepper::Product(ctx.clone()),
            Err(e) => return Err(e),
        };
        Ok(PathSimulator { grid, stepper })
    }

    pub fn grid(&self) -> &GeometricGrid {
        &self.grid
    }

    /// The path determined by `seed`.
    pub fn simulate(&self, seed: u64) -> Result<GeometricPath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k_max = self.grid.depth;
        let mut values = vec![0.0; k_max + 1];
        match &self.stepper {
            Stepper::Kernel(kernel) => {
                values[k_max] = kernel.sample_marginal(self.grid.time(k_max), rng.random());
                for k in (0..k_max).rev() {
                    values[k] = kernel.sample_transition(values[k + 1], self.grid.time(k), rng.random());
                }
            }
            Stepper::Product(ctx) => {
                let start = DensitySpec::marginal(self.grid.time(k_max), ctx)?;
                values[k_max] = TabulatedCdf::build(&start)?.invert(rng.random());
                for k in (0..k_max).rev() {
                    let (s, t) = (self.grid.time(k + 1), self.grid.time(k));
                    let x = values[k + 1].clamp(-support_half_width(s, ctx.q_f64()), support_half_width(s, ctx.q_f64()));
                    let spec = DensitySpec::transition(x, s, t, ctx)?;
                    values[k] = TabulatedCdf::build(&spec)?.invert(rng.random());
                }
            }
        }
        GeometricPath::from_values(self.grid, values, seed)
    }

    /// `f` applied to the paths with seeds `base_seed + i`, `i < n_paths`,
    /// in seed order regardless of scheduling.
    pub fn map_batch<T: Send>(
        &self,
        n_paths: usize,
        base_seed: u64,
        f: impl Fn(&GeometricPath) -> T + Send + Sync,
    ) -> Result<Vec<T>> {
        let one = |i: usize| self.simulate(base_seed.wrapping_add(i as u64)).map(|p| f(&p));
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n_paths).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n_paths).map(one).collect()
        }
    }

    pub fn batch(&self, n_paths: usize, base_seed: u64) -> Result<Vec<GeometricPath>> {
        self.map_batch(n_paths, base_seed, GeometricPath::clone)
    }
}

/// One path on `grid` from `seed`.
pub fn simulate_path(grid: &GeometricGrid, seed: u64, ctx: &QContext<f64>) -> Result<GeometricPath> {
    PathSimulator::new(*grid, ctx)?.simulate(seed)
}

/// `n_paths` paths with seeds `base_seed + i`.
pub fn simulate_batch(grid: &GeometricGrid, n_paths: usize, base_seed: u64, ctx: &QContext<f64>) -> Result<Vec<GeometricPath>> {
    if n_paths == 0 {
        return Err(QbmError::InvalidParameter("a batch needs at least one path".into()));
    }
    PathSimulator::new(*grid, ctx)?.batch(n_paths, base_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(q: f64) -> (GeometricGrid, QContext<f64>) {
        (GeometricGrid::with_default_depth(1.0, q).unwrap(), QContext::float(q).unwrap())
    }

    #[test]
    fn default_depth_meets_the_tail_threshold() {
        for (q, k) in [(0.2, 9), (0.5, 20), (0.8, 62)] {
            assert_eq!(GeometricGrid::default_depth(q), k);
            assert!(q.powi(k as i32) <= DEFAULT_GRID_TAIL);
        }
    }

    #[test]
    fn grid_times_increase_when_read_backwards() {
        let g = GeometricGrid::new(2.0, 0.5, 6).unwrap();
        let times = g.times();
        assert_eq!(times.len(), 7);
        assert_eq!(times[0], 2.0);
        assert!(times.windows(2).all(|w| w[0] > w[1]));
        assert!(GeometricGrid::new(1.0, 1.0, 3).is_err());
        assert!(GeometricGrid::new(0.0, 0.5, 3).is_err());
    }

    #[test]
    fn paths_are_reproducible_and_inside_the_support() {
        let (g, c) = setup(0.5);
        let sim = PathSimulator::new(g, &c).unwrap();
        let a = sim.simulate(42).unwrap();
        let b = sim.simulate(42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sim.simulate(43).unwrap());
        assert!(a.within_support());
        assert_eq!(a.values().len(), g.depth() + 1);
    }

    #[test]
    fn batch_of_one_equals_single_path() {
        let (g, c) = setup(0.2);
        let batch = simulate_batch(&g, 1, 9, &c).unwrap();
        assert_eq!(batch[0], simulate_path(&g, 9, &c).unwrap());
        let other = simulate_batch(&g, 3, 100, &c).unwrap();
        assert!(other.iter().all(|p| p != &batch[0]));
        assert!(simulate_batch(&g, 0, 1, &c).is_err());
    }

    #[test]
    fn truncation_keeps_the_leading_values() {
        let (g, c) = setup(0.5);
        let p = simulate_path(&g, 1, &c).unwrap();
        let t = p.truncate(5).unwrap();
        assert_eq!(t.values(), &p.values()[..6]);
        assert_eq!(t.grid().depth(), 5);
        assert!(p.truncate(g.depth() + 1).is_err());
    }

    #[test]
    fn near_one_ratios_fall_back_to_product_tables() {
        // A kernel with a ratio this close to 1 is outside the expansion's range.
        let q = 0.995;
        let c = QContext::float(q).unwrap();
        let g = GeometricGrid::new(1.0, q, 2).unwrap();
        let sim = PathSimulator::new(g, &c).unwrap();
        assert!(matches!(sim.stepper, Stepper::Product(_)));
        let p = sim.simulate(3).unwrap();
        assert!(p.within_support());
    }

    #[test]
    fn terminal_mean_and_variance_match_the_marginal() {
        let (g, c) = setup(0.5);
        let vals = PathSimulator::new(g, &c).unwrap().map_batch(20_000, 1000, |p| p.terminal()).unwrap();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let m2 = vals.iter().map(|v| v * v).sum::<f64>() / n;
        let var4 = vals.iter().map(|v| (v * v - m2).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * (m2 / n).sqrt());
        assert!((m2 - 1.0).abs() < 4.0 * (var4 / n).sqrt());
    }
}
