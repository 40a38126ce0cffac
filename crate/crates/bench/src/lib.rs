//! Fixtures shared by the benchmarks.

use ippt_core::model::paper_model;
use ippt_core::process::sample_experiment;
use ippt_core::{Experiment, IntensityModel};

/// Paths per experiment used by the n-dependent benchmarks.
pub const SIZES: [usize; 3] = [10, 100, 800];

/// A null experiment on the paper model.
pub fn null_experiment(n: usize) -> (IntensityModel, Experiment) {
    let model = paper_model();
    let experiment = sample_experiment(&model, model.theta1(), n, 7).expect("paper model samples");
    (model, experiment)
}
