use num_rational::BigRational;
use proptest::prelude::*;

use super::*;
use crate::qhermite::QPolynomial;
use crate::scalar::rational;

/// `E(Z^2)` and `E(Z^4)` for `Z = sum_k q^{kr} (B_{q^k} - B_{q^{k+1}})`
/// assembled from the moments of the increments over the cells
/// `[q^{k+1}, q^k]` of length `d_k`:
///
/// - `E[D_k^4] = d_k ((q+2) q^k - 3q q^{k+1})`,
/// - `E[D_i^2 D_k^2] = d_i d_k` for distinct cells,
/// - `E[D_i D_k^3] = -(1-q) d_i d_k` for the cell `i` before `k`,
///
/// and every other mixed moment vanishes (the latest increment appearing
/// once, or squared against two distinct earlier ones).
fn increment_sums(r: f64, q: f64, cells: usize) -> (f64, f64) {
    let w = |k: usize| q.powf(k as f64 * r);
    let d = |k: usize| q.powi(k as i32) * (1.0 - q);
    let mut ez2 = 0.0;
    let mut ez4 = 0.0;
    for k in 0..cells {
        let (tk, sk) = (q.powi(k as i32), q.powi(k as i32 + 1));
        ez2 += w(k).powi(2) * d(k);
        ez4 += w(k).powi(4) * d(k) * ((q + 2.0) * tk - 3.0 * q * sk);
        // cells i > k lie before cell k
        for i in k + 1..cells {
            ez4 += 6.0 * w(i).powi(2) * w(k).powi(2) * d(i) * d(k);
            ez4 += 4.0 * w(i) * w(k).powi(3) * (-(1.0 - q)) * d(i) * d(k);
        }
    }
    (ez2, ez4)
}

#[test]
fn ez2_examples() {
    assert_eq!(oracle_ez2(0.0, 0.3), 1.0);
    assert!((oracle_ez2(1.0, 0.5) - 4.0 / 7.0).abs() < 1e-15);
    // (1 - 0.8) / (1 - 0.8^2)
    assert!((oracle_ez2(0.5, 0.8) - 5.0 / 9.0).abs() < 1e-15);
    assert_eq!(oracle_ez2_exact(1, &rational(1, 2)), rational(4, 7));
}

#[test]
fn moment_oracles_match_sums_over_increments() {
    for q in [0.2, 0.5, 0.8] {
        for r in [0.0, 0.5, 1.0, 2.5] {
            let (ez2, ez4) = increment_sums(r, q, 400);
            assert!((oracle_ez2(r, q) - ez2).abs() < 1e-12, "EZ2 r={r} q={q}");
            assert!((oracle_ez4(r, q) - ez4).abs() < 1e-10 * ez4, "EZ4 r={r} q={q}: {} vs {ez4}", oracle_ez4(r, q));
        }
    }
}

#[test]
fn kurtosis_at_r0_is_exactly_two_plus_q() {
    for (n, d) in [(1, 5), (1, 2), (4, 5), (7, 11)] {
        let q: BigRational = rational(n, d);
        let ratio = oracle_ez4_exact(0, &q) / oracle_ez2_exact(0, &q).powu(2);
        assert_eq!(ratio, rational(2, 1) + q);
    }
}

#[test]
fn kurtosis_depends_on_r() {
    assert!((kurtosis_ratio(0.0, 0.5) - kurtosis_ratio(1.0, 0.5)).abs() > 1e-3);
    let table = kurtosis_table(&[0.0, 1.0], &[0.5]);
    assert_eq!(table.len(), 2);
    assert!((table[0][4] - 2.5).abs() < 1e-12);
}

#[test]
fn moments_approach_the_gaussian_limit() {
    // Z tends to a centred Gaussian with variance 1/3
    let ez4 = oracle_ez4(1.0, 0.999);
    assert!((ez4 - 1.0 / 3.0).abs() < 1e-2, "{ez4}");
    assert!((kurtosis_ratio(1.0, 0.999) - 3.0).abs() < 1e-2);
}

proptest! {
    #[test]
    fn float_and_rational_oracles_agree(r in 0u32..4, num in 1i64..20) {
        let q = num as f64 / 20.0;
        let exact = oracle_ez4_exact(r, &rational(num, 20));
        let approx = oracle_ez4(r as f64, q);
        prop_assert!((exact.to_f64() - approx).abs() < 1e-10 * approx.abs().max(1.0));
    }

    #[test]
    fn pairwise_sum_matches_naive_sum_on_integers(xs in proptest::collection::vec(-1000i32..1000, 0..300)) {
        let fs: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(pairwise_sum(&fs), xs.iter().map(|&x| x as i64).sum::<i64>() as f64);
    }
}

#[test]
fn estimates_need_two_samples_and_report_positive_errors() {
    assert!(McEstimate::from_samples(&[1.0], 1.0, 0).is_err());
    let e = McEstimate::from_samples(&[1.0, 3.0], 2.0, 5).unwrap();
    assert_eq!(e.estimate, 2.0);
    assert!((e.std_error - 1.0).abs() < 1e-15);
    assert_eq!(e.z, 0.0);
    let flat = McEstimate::from_samples(&[2.0, 2.0, 2.0], 2.0, 0).unwrap();
    assert!(flat.std_error > 0.0);
}

#[test]
fn reports_serialize_to_csv_and_json() {
    let est = McEstimate::from_samples(&[0.0, 2.0, 1.0, 1.0], 1.0, 9).unwrap();
    let reports = vec![
        VerificationReport::deterministic("exact", params(&[("q", 0.5)]), 0.0, 0.0, 0.0),
        VerificationReport::monte_carlo("mc", params(&[("q", 0.5), ("t", 1.0)]), est, None, Z_THRESHOLD),
    ];
    let mut csv_out = Vec::new();
    write_csv(&reports, &mut csv_out).unwrap();
    let text = String::from_utf8(csv_out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,params,oracle,estimate,stderr,z,pass");
    assert_eq!(lines[1], "exact,q=0.5,0.0,0.0,,,true");
    assert!(lines[2].starts_with("mc,q=0.5;t=1,1.0,1.0,"));

    let mut json_out = Vec::new();
    write_json(&reports, &mut json_out).unwrap();
    let back: Vec<VerificationReport> = serde_json::from_slice(&json_out).unwrap();
    assert_eq!(back, reports);
}

#[test]
fn unknown_checks_are_rejected() {
    assert!(matches!(mc_moment("no-such-check", &params(&[]), 100, 0), Err(QbmError::UnknownCheck(_))));
    assert!(matches!(exact_identity_suite(Some(&["nope".to_string()]), 0), Err(QbmError::UnknownCheck(_))));
}

#[test]
fn exact_identities_hold() {
    let reports = exact_identity_suite(None, 11).unwrap();
    assert_eq!(reports.len(), 11 * EXACT_Q.len());
    for r in &reports {
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn exact_suite_filter_selects_one_family() {
    let reports = exact_identity_suite(Some(&["wdw".to_string()]), 0).unwrap();
    assert_eq!(reports.len(), EXACT_Q.len());
    assert!(reports.iter().all(|r| r.name == "wdw" && r.passed));
}

#[test]
fn increment_fourth_moment_by_monte_carlo() {
    let p = params(&[("q", 0.5), ("t", 1.0), ("s", 0.5)]);
    let r = mc_moment("increment-4th", &p, 4000, 3).unwrap();
    assert!((r.oracle - 0.875).abs() < 1e-15);
    assert!(r.passed, "{r:?}");
}

#[test]
fn small_isometry_runs_are_reproducible() {
    let f = QPolynomial::x_pow(1);
    let a = mc_isometry(&f, 1.0, 0.5, 2000, 42).unwrap();
    let b = mc_isometry(&f, 1.0, 0.5, 2000, 42).unwrap();
    assert_eq!(a, b);
    assert!((a.oracle - 1.0 / 1.5).abs() < 1e-12);
    assert!(a.passed, "{a:?}");
}

#[test]
fn a_wrong_oracle_fails_after_its_rerun() {
    let ctx = crate::qcore::QContext::float(0.5).unwrap();
    let grid = crate::process::GeometricGrid::new(1.0, 0.5, 20).unwrap();
    let check = McCheck::new("biased", params(&[]), 2.0, |p| p.terminal().powi(2));
    let report = McRunner::new(grid, &ctx, 2000, 1).unwrap().run(&[check]).unwrap().remove(0);
    assert!(!report.passed);
    let rerun = report.rerun.expect("a failing check is rerun");
    assert_eq!(rerun.seed, 1 + RERUN_SEED_OFFSET);
}

#[test]
fn grid_index_finds_grid_times_only() {
    let grid = crate::process::GeometricGrid::new(1.0, 0.5, 10).unwrap();
    assert_eq!(grid_index(&grid, 0.125).unwrap(), 3);
    assert!(grid_index(&grid, 0.3).is_err());
}

#[test]
fn ito_study_decreases_and_respects_its_bound() {
    let study = ito_convergence_study(0.8, 1.0, 3, 4, 5).unwrap();
    assert_eq!(study.cases, 12);
    assert!(study.within_bounds(), "{study:?}");
    assert!(study.decreasing(), "{study:?}");
    assert!(study.reports().iter().all(|r| r.passed));
}

#[test]
fn sde_study_decreases_and_respects_its_bound() {
    let study = sde_convergence_study(0.5, 1.0, 0.5, 0.5, 30, &[20, 40, 60], 4, 2).unwrap();
    assert!(study.within_bounds(), "{study:?}");
    assert!(study.decreasing(), "{study:?}");
}
