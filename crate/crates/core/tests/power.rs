//! Power harness: interval coverage and scheduling independence.

use ippt_core::model::builtin;
use ippt_core::power::{estimate_power, power_curve};
use ippt_core::TestKind;
use statrs::distribution::{DiscreteCDF, Poisson};

/// On `linear` (λ = θ) the score statistic is an affine function of the
/// total count, so SFT rejects exactly when `Poisson(nθτ)` exceeds a known
/// cut and its power is computable.
#[test]
fn wilson_interval_coverage() {
    let m = builtin("linear", None).unwrap();
    let (n, u, eps, replicates) = (5, 1.0, 0.05, 200);
    let scale = ippt_core::local_scale(&m, n).unwrap();
    let theta = scale.theta_at(u).unwrap();
    let (theta1, tau) = (m.theta1(), m.tau());
    let z = ippt_core::hypothesis::z_quantile(eps).unwrap();
    // Δₙ = (N/θ₁ − nτ) / √(nτ/θ₁) > z  ⇔  N > θ₁(nτ + z√(nτ/θ₁)).
    let cut = theta1 * (n as f64 * tau + z * (n as f64 * tau / theta1).sqrt());
    let beta = 1.0 - Poisson::new(n as f64 * theta * tau).unwrap().cdf(cut.floor() as u64);

    let reps = 1000;
    let covered = (0..reps)
        .filter(|&r| {
            let p = estimate_power(TestKind::Sft, &m, None, eps, u, n, replicates, 1000 + r).unwrap();
            p.ci_lo <= beta && beta <= p.ci_hi
        })
        .count();
    assert!(covered >= 930, "coverage {covered}/1000 of β = {beta}");
}

#[test]
fn curves_do_not_depend_on_thread_count() {
    let m = builtin("paper", None).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| power_curve(TestKind::Glrt, &m, None, 0.1, &[0.0, 1.5, 3.0], 20, 300, 8).unwrap())
    };
    assert_eq!(run(1), run(4));
}
