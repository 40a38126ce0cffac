//! Monte Carlo threshold calibration against the closed forms.

use ippt_core::hypothesis::{
    bt1_threshold, bt1_threshold_closed_form, bt2_threshold, bt2_threshold_closed_form, z_quantile,
};
use ippt_core::normal::{averaged_ratio_limit, bayes_estimator_limit};

const M: usize = 1_000_000;

#[test]
fn limit_maps_are_strictly_increasing() {
    // The closed forms rest on both maps being increasing.
    let points = 1_000_000;
    let step = 20.0 / (points - 1) as f64;
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..points {
        let d = -10.0 + step * i as f64;
        let cur = (bayes_estimator_limit(d), averaged_ratio_limit(d));
        assert!(cur.0 > prev.0 && cur.1 > prev.1, "not increasing at {d}");
        prev = cur;
    }
}

#[test]
fn bt1_monte_carlo_matches_closed_form() {
    // zₑ + f(zₑ)/F(zₑ) = 1.644854 + 0.103136/0.95.
    assert!((bt1_threshold_closed_form(0.05).unwrap() - 1.75342).abs() < 1e-5);
    for eps in [0.05, 0.1, 0.2, 0.4, 0.5] {
        let mc = bt1_threshold(eps, M, 3).unwrap();
        let exact = bt1_threshold_closed_form(eps).unwrap();
        assert!((mc - exact).abs() < 0.01, "epsilon {eps}: {mc} vs {exact}");
    }
    assert!((bt1_threshold(0.05, M, 3).unwrap() - 1.751).abs() < 0.01);
    assert!((bt1_threshold(0.5, M, 3).unwrap() - 0.794).abs() < 0.01);
}

#[test]
fn bt2_thresholds() {
    assert!((bt2_threshold(0.05, M, 3).unwrap() - 9.21).abs() < 0.10);
    assert!((bt2_threshold(0.5, M, 3).unwrap() - 1.2533).abs() < 0.01);
    assert!((bt2_threshold_closed_form(0.05).unwrap() - 0.95 / 0.10313).abs() < 1e-3);
    let eps = [0.5, 0.2, 0.1, 0.05, 0.01];
    let ks: Vec<f64> = eps.iter().map(|&e| bt2_threshold(e, M, 3).unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[0] <= w[1]), "{ks:?}");
}

#[test]
fn normal_quantiles() {
    assert_eq!(z_quantile(0.5).unwrap(), 0.0);
    assert!((z_quantile(0.05).unwrap() - 1.6449).abs() < 5e-5);
    assert!((z_quantile(0.01).unwrap() - 2.3263).abs() < 5e-5);
}
