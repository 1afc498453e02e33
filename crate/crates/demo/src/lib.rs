//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export returns a flat `Float64Array` of `(x, y)` pairs ready to
//! plot. The plain-Rust functions behind them are public so they can be
//! tested natively.

use wasm_bindgen::prelude::*;

use qbm::measures::{support_half_width, DensitySpec};
use qbm::process::{GeometricGrid, PathSimulator};
use qbm::qcore::QContext;
use qbm::verify::kurtosis_ratio;

/// Deepest grid the page may request.
pub const MAX_DEPTH: usize = 400;
/// Most points the page may request for one curve.
pub const MAX_POINTS: usize = 10_000;

fn check_points(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must lie in 2..={MAX_POINTS}, got {points}"))
    }
}

/// `(y, density)` pairs of the time-`t` marginal on a uniform grid over its
/// support `|y| <= 2 sqrt(t) / sqrt(1-q)`.
pub fn density_pairs(q: f64, t: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    let spec = DensitySpec::marginal(t, &QContext::float(q).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let w = support_half_width(t, q);
    Ok((0..points)
        .flat_map(|i| {
            let y = -w + 2.0 * w * i as f64 / (points - 1) as f64;
            [y, spec.density(y)]
        })
        .collect())
}

/// `(t_k, B_k)` pairs of one simulated path on the grid `t q^k`, in
/// increasing time.
pub fn path_pairs(q: f64, t: f64, depth: usize, seed: u64) -> Result<Vec<f64>, String> {
    if depth > MAX_DEPTH {
        return Err(format!("depth must be at most {MAX_DEPTH}, got {depth}"));
    }
    let ctx = QContext::float(q).map_err(|e| e.to_string())?;
    let grid = GeometricGrid::new(t, q, depth).map_err(|e| e.to_string())?;
    let path = PathSimulator::new(grid, &ctx).and_then(|s| s.simulate(seed)).map_err(|e| e.to_string())?;
    let mut rows: Vec<(usize, f64, f64)> = path.rows().collect();
    rows.reverse();
    Ok(rows.into_iter().flat_map(|(_, t, b)| [t, b]).collect())
}

/// `(r, E Z^4 / (E Z^2)^2)` pairs for `Z = int_0^1 s^r d-slash B` with
/// `r` uniform on `[0, r_max]`.
pub fn kurtosis_pairs(q: f64, r_max: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    QContext::float(q).map_err(|e| e.to_string())?;
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(format!("r_max must be positive, got {r_max}"));
    }
    Ok((0..points)
        .flat_map(|i| {
            let r = r_max * i as f64 / (points - 1) as f64;
            [r, kurtosis_ratio(r, q)]
        })
        .collect())
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve(q: f64, t: f64, points: usize) -> Result<Vec<f64>, JsError> {
    density_pairs(q, t, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulatePath)]
pub fn simulate_path(q: f64, t: f64, depth: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    path_pairs(q, t, depth, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = kurtosisCurve)]
pub fn kurtosis_curve(q: f64, r_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    kurtosis_pairs(q, r_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = supportHalfWidth)]
pub fn support_half_width_js(q: f64, t: f64) -> f64 {
    support_half_width(t, q)
}
