//! Log-likelihood ratio `ln L(θ, θ₁, Xⁿ)`, the normalized likelihood ratio
//! `Zₙ(u)` and the score statistic `Δₙ(θ₁, Xⁿ)`.

use crate::error::{Error, Result};
use crate::model::{cumulative_intensity, IntensityModel, LocalScale, CUMULATIVE_TOL};
use crate::numeric::{adaptive_simpson, compensated_sum};
use crate::process::Experiment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue {
    pub delta_n: f64,
}

fn check_sizes(scale: &LocalScale, experiment: &Experiment) -> Result<()> {
    if scale.n != experiment.n() {
        return Err(Error::domain(format!(
            "local scale built for n = {} but the experiment has {} paths",
            scale.n,
            experiment.n()
        )));
    }
    Ok(())
}

/// `Σⱼ Σᵢ ln(λ(θ,tᵢ)/λ(θ₁,tᵢ)) − n (Λ(θ,τ) − Λ(θ₁,τ))`.
pub fn log_likelihood_ratio(model: &IntensityModel, theta: f64, experiment: &Experiment) -> Result<f64> {
    model.check_theta(theta)?;
    let theta1 = model.theta1();
    if theta == theta1 {
        return Ok(0.0);
    }
    let events = experiment.pooled_events();
    let jumps = model.family().log_ratio_sum(theta, theta1, &events);
    let tau = model.tau();
    let compensator = cumulative_intensity(model, theta, tau)? - cumulative_intensity(model, theta1, tau)?;
    Ok(jumps - experiment.n() as f64 * compensator)
}

/// `Zₙ(u) = L(θ₁ + uφₙ, θ₁, Xⁿ)` on `𝕌ₙ⁺`; `u ≥ u_max` is an error.
pub fn z_n(model: &IntensityModel, scale: &LocalScale, u: f64, experiment: &Experiment) -> Result<f64> {
    Ok(log_z_n(model, scale, u, experiment)?.exp())
}

pub fn log_z_n(model: &IntensityModel, scale: &LocalScale, u: f64, experiment: &Experiment) -> Result<f64> {
    check_sizes(scale, experiment)?;
    let theta = scale.theta_at(u)?;
    log_likelihood_ratio(model, theta, experiment)
}

/// Score statistic with its compensator `∫₀^τ λ̇(θ₁,t) dt` computed once.
#[derive(Debug, Clone, Copy)]
pub struct ScoreEvaluator {
    theta1: f64,
    compensator: f64,
    scale: LocalScale,
}

impl ScoreEvaluator {
    pub fn new(model: &IntensityModel, scale: &LocalScale) -> Result<Self> {
        let theta1 = model.theta1();
        let compensator = adaptive_simpson(|t| model.dlambda(theta1, t), 0.0, model.tau(), CUMULATIVE_TOL)?;
        Ok(ScoreEvaluator { theta1, compensator, scale: *scale })
    }

    pub fn evaluate(&self, model: &IntensityModel, experiment: &Experiment) -> Result<ScoreValue> {
        check_sizes(&self.scale, experiment)?;
        let theta1 = self.theta1;
        let jumps = compensated_sum(
            experiment
                .paths()
                .iter()
                .flat_map(|p| p.events().iter().map(move |&t| model.dlambda(theta1, t) / model.lambda(theta1, t))),
        );
        let n = experiment.n() as f64;
        let delta_n = (jumps - n * self.compensator) / (n * self.scale.fisher).sqrt();
        if !delta_n.is_finite() {
            return Err(Error::numeric("score statistic is not finite"));
        }
        Ok(ScoreValue { delta_n })
    }
}

/// `Δₙ = (n I(θ₁))^{-1/2} [Σⱼ Σᵢ λ̇(θ₁,tᵢ)/λ(θ₁,tᵢ) − n ∫₀^τ λ̇(θ₁,t) dt]`.
pub fn score_statistic(model: &IntensityModel, scale: &LocalScale, experiment: &Experiment) -> Result<ScoreValue> {
    ScoreEvaluator::new(model, scale)?.evaluate(model, experiment)
}
