//! Statistical checks of the path sampler against Poisson theory.

use ippt_core::model::{builtin, paper_model};
use ippt_core::process::{sample_experiment, sample_experiment_par, sample_indexed_path};
use ippt_core::stats::{correlation, mean};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

const REPLICATES: usize = 100_000;

fn counts(model: &str, theta: f64, seed: u64) -> Vec<usize> {
    let m = builtin(model, None).unwrap();
    sample_experiment(&m, theta, REPLICATES, seed).unwrap().paths().iter().map(|p| p.len()).collect()
}

#[test]
fn constant_intensity_mean_count() {
    // λ ≡ 2 on [0, 3].
    let c: Vec<f64> = counts("linear", 2.0, 11).into_iter().map(|k| k as f64).collect();
    assert!((mean(&c) - 6.0).abs() < 0.05, "{}", mean(&c));
}

#[test]
fn paper_model_mean_count() {
    let c: Vec<f64> = counts("paper", 3.0, 12).into_iter().map(|k| k as f64).collect();
    let lambda = 7.5 + 0.25 * 18f64.sin();
    assert!((mean(&c) - lambda).abs() < 0.05, "{} vs {lambda}", mean(&c));
}

#[test]
fn constant_intensity_counts_are_poisson() {
    let c = counts("linear", 2.0, 13);
    let law = Poisson::new(6.0).unwrap();
    // Cells 0..=K-1 plus an upper tail cell, each with expectation ≥ 5.
    let k_max = 16;
    let mut observed = vec![0usize; k_max + 1];
    for k in c {
        observed[k.min(k_max)] += 1;
    }
    let mut expected: Vec<f64> = (0..k_max).map(|k| law.pmf(k as u64) * REPLICATES as f64).collect();
    expected.push(REPLICATES as f64 - expected.iter().sum::<f64>());
    assert!(expected.iter().all(|&e| e >= 5.0));
    let stat: f64 = observed.iter().zip(&expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let critical = ChiSquared::new(k_max as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} ≥ {critical}");
}

#[test]
fn increments_are_uncorrelated() {
    let m = paper_model();
    let e = sample_experiment(&m, 3.0, REPLICATES, 14).unwrap();
    let first: Vec<f64> = e.paths().iter().map(|p| p.count_in(0.0, 1.5) as f64).collect();
    let second: Vec<f64> = e.paths().iter().map(|p| p.count_in(1.5, 3.0) as f64).collect();
    let rho = correlation(&first, &second);
    assert!(rho.abs() < 0.01, "rho = {rho}");
}

#[test]
fn experiment_total_count() {
    let m = paper_model();
    let e = sample_experiment(&m, 3.0, 100, 1).unwrap();
    let expected = 100.0 * (7.5 + 0.25 * 18f64.sin());
    let total = e.total_events() as f64;
    assert!((total - expected).abs() < 4.0 * expected.sqrt(), "{total}");
}

#[test]
fn experiments_are_reproducible() {
    let m = paper_model();
    let a = sample_experiment(&m, 3.0, 5, 42).unwrap();
    let b = sample_experiment(&m, 3.0, 5, 42).unwrap();
    assert_eq!(a, b);
    let mut bytes_a = Vec::new();
    let mut bytes_b = Vec::new();
    a.write_csv(&mut bytes_a).unwrap();
    b.write_csv(&mut bytes_b).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert_ne!(a, sample_experiment(&m, 3.0, 5, 43).unwrap());

    let single = sample_experiment(&m, 3.4, 1, 9).unwrap();
    assert_eq!(single.paths()[0], sample_indexed_path(&m, 3.4, 9, 1).unwrap());
}

#[test]
fn parallel_sampling_matches_serial() {
    let m = paper_model();
    for seed in 0..4 {
        assert_eq!(sample_experiment(&m, 4.0, 300, seed).unwrap(), sample_experiment_par(&m, 4.0, 300, seed).unwrap());
    }
}
