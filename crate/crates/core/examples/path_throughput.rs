//! Time to simulate 10^5 paths on the default grid for a few values of q.

use std::time::Instant;

use qbm::process::{GeometricGrid, PathSimulator};
use qbm::qcore::QContext;

fn main() -> Result<(), qbm::error::QbmError> {
    let n_paths = 100_000;
    for q in [0.2, 0.5, 0.8] {
        let ctx = QContext::float(q)?;
        let grid = GeometricGrid::with_default_depth(1.0, q)?;
        let start = Instant::now();
        let terminal = PathSimulator::new(grid, &ctx)?.map_batch(n_paths, 1, |p| p.terminal())?;
        let second_moment = terminal.iter().map(|x| x * x).sum::<f64>() / n_paths as f64;
        println!(
            "q = {q}: K = {}, {n_paths} paths in {:.2?}, mean of B_1^2 = {second_moment:.4}",
            grid.depth(),
            start.elapsed()
        );
    }
    Ok(())
}
