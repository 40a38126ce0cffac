//! Simulation of inhomogeneous Poisson processes with a one-dimensional
//! parameter, and asymptotically optimal tests of `θ = θ₁` against the
//! one-sided local alternative `θ = θ₁ + uφₙ`, `u > 0`.
//!
//! Five tests are provided: the score function test (SFT), the generalized
//! likelihood ratio test (GLRT), the Wald test on the one-sided MLE, and two
//! Bayes tests (BT1 on the posterior mean, BT2 on the prior-averaged
//! likelihood ratio). The [`power`] module estimates their power functions
//! by Monte Carlo and evaluates the limit curves.
//!
//! ```
//! use ippt_core::{model, process, hypothesis};
//!
//! let m = model::paper_model();
//! let scale = model::local_scale(&m, 50).unwrap();
//! let x = process::sample_experiment(&m, 3.0, 50, 1).unwrap();
//! let d = hypothesis::sft(&m, &scale, &x, 0.05).unwrap();
//! assert_eq!(d.reject, d.statistic > d.threshold);
//! ```

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod hypothesis;
pub mod likelihood;
pub mod model;
pub mod normal;
pub mod numeric;
pub mod power;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{bayes_estimator, mle, EstimateReport, PriorDensity, PriorShape};
pub use hypothesis::{Decision, TestBattery, TestKind, ThresholdSettings, ThresholdTable};
pub use likelihood::{log_likelihood_ratio, score_statistic, z_n, ScoreValue};
pub use model::{cumulative_intensity, fisher_information, local_scale, IntensityModel, LocalScale};
pub use power::{PowerCurve, PowerPoint};
pub use process::{sample_experiment, sample_path, Experiment, PathSample};
