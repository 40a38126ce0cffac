//! One-sided maximum likelihood estimator on `[θ₁, b)` and the posterior
//! mean under a prior density.
//!
//! Both estimators evaluate `ln L(θ, θ₁, Xⁿ)` on a uniform θ-grid. The
//! experiment-independent compensators `Λ(θ_k, τ) − Λ(θ₁, τ)` are computed
//! once per grid; [`MleGrid`] and [`BayesGrid`] hold them so that a Monte
//! Carlo sweep pays for the quadrature once.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::likelihood::log_likelihood_ratio;
use crate::model::{cumulative_raw, IntensityModel, LocalScale};
use crate::numeric::{golden_section_max, simpson_weights, CompensatedSum, UniformGrid};
use crate::process::Experiment;

/// Default number of coarse-scan points for [`mle`].
pub const MLE_GRID_POINTS: usize = 512;
/// Default number of Simpson intervals for [`bayes_estimator`].
pub const BAYES_QUAD_POINTS: usize = 2048;
/// Absolute θ-tolerance of the golden-section refinement.
pub const MLE_TOL: f64 = 1e-8;
/// Relative gap kept from the open right end `b` by the MLE scan.
pub const RIGHT_GAP: f64 = 1e-6;
const PRIOR_NORMALIZATION_TOL: f64 = 1e-6;

/// Shape of a prior density on `[θ₁, b)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorShape {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    /// Piecewise linear through `(theta, density)` nodes, zero outside.
    Table {
        thetas: Vec<f64>,
        densities: Vec<f64>,
    },
}

impl PriorShape {
    fn density(&self, theta: f64) -> f64 {
        match *self {
            PriorShape::Uniform { lo, hi } => {
                if (lo..=hi).contains(&theta) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            PriorShape::Triangular { lo, mode, hi } => {
                let peak = 2.0 / (hi - lo);
                if theta < lo || theta > hi {
                    0.0
                } else if theta <= mode {
                    if mode == lo {
                        peak
                    } else {
                        peak * (theta - lo) / (mode - lo)
                    }
                } else if mode == hi {
                    peak
                } else {
                    peak * (hi - theta) / (hi - mode)
                }
            }
            PriorShape::Table { ref thetas, ref densities } => {
                if theta < thetas[0] || theta > *thetas.last().unwrap() {
                    return 0.0;
                }
                let i = thetas.partition_point(|&x| x <= theta).clamp(1, thetas.len() - 1) - 1;
                let w = (theta - thetas[i]) / (thetas[i + 1] - thetas[i]);
                densities[i] * (1.0 - w) + densities[i + 1] * w
            }
        }
    }

    /// Points where the density may have a jump or a kink.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            PriorShape::Uniform { lo, hi } => vec![*lo, *hi],
            PriorShape::Triangular { lo, mode, hi } => vec![*lo, *mode, *hi],
            PriorShape::Table { thetas, .. } => thetas.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            PriorShape::Uniform { lo, hi } => lo < hi,
            PriorShape::Triangular { lo, mode, hi } => lo < hi && lo <= mode && mode <= hi,
            PriorShape::Table { thetas, densities } => {
                thetas.len() >= 2
                    && thetas.len() == densities.len()
                    && thetas.windows(2).all(|w| w[0] < w[1])
                    && densities.iter().all(|d| d.is_finite() && *d >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("malformed prior {self:?}")))
        }
    }

    /// CSV with header `theta,density`.
    pub fn table_from_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            theta: f64,
            density: f64,
        }
        let mut csv = csv::Reader::from_reader(reader);
        if csv.headers()?.iter().collect::<Vec<_>>() != ["theta", "density"] {
            return Err(Error::Format("expected header `theta,density`".into()));
        }
        let rows: Vec<Row> = csv.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(PriorShape::Table {
            thetas: rows.iter().map(|r| r.theta).collect(),
            densities: rows.iter().map(|r| r.density).collect(),
        })
    }

    pub fn table_from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::table_from_reader(std::fs::File::open(path)?)
    }
}

/// A prior density supported on the model's `[θ₁, b)`, normalized to 1
/// within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDensity {
    shape: PriorShape,
    theta1: f64,
    b: f64,
}

impl PriorDensity {
    /// Prior usable by the Bayes tests: normalized and `p(θ₁) > 0`.
    pub fn new(shape: PriorShape, model: &IntensityModel) -> Result<Self> {
        let prior = Self::new_unanchored(shape, model)?;
        if !(prior.density(model.theta1()) > 0.0) {
            return Err(Error::InvalidModel(format!("prior density at θ₁ = {} must be positive", model.theta1())));
        }
        Ok(prior)
    }

    /// Normalized prior that may vanish at `θ₁`. Good for estimation, not
    /// for the Bayes tests, which divide by `p(θ₁)`.
    pub fn new_unanchored(shape: PriorShape, model: &IntensityModel) -> Result<Self> {
        shape.validate()?;
        let prior = PriorDensity { shape, theta1: model.theta1(), b: model.b() };
        // Every shape is linear between its breakpoints and may jump at them,
        // so two-point Gauss-Legendre on each piece is exact and never looks
        // at the jumps.
        let mut cuts: Vec<f64> = prior.shape.breakpoints();
        cuts.retain(|&x| x > prior.theta1 && x < prior.b);
        cuts.push(prior.theta1);
        cuts.push(prior.b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let node = 0.5 / 3f64.sqrt();
        let mass: f64 = cuts
            .windows(2)
            .map(|w| {
                let (mid, width) = (0.5 * (w[0] + w[1]), w[1] - w[0]);
                0.5 * width * (prior.density(mid - node * width) + prior.density(mid + node * width))
            })
            .sum();
        if (mass - 1.0).abs() > PRIOR_NORMALIZATION_TOL {
            return Err(Error::InvalidModel(format!(
                "prior integrates to {mass} over [{}, {}], not 1",
                prior.theta1, prior.b
            )));
        }
        Ok(prior)
    }

    /// Uniform on the whole parameter interval.
    pub fn uniform(model: &IntensityModel) -> Result<Self> {
        Self::new(PriorShape::Uniform { lo: model.theta1(), hi: model.b() }, model)
    }

    pub fn density(&self, theta: f64) -> f64 {
        if theta < self.theta1 || theta > self.b {
            0.0
        } else {
            self.shape.density(theta)
        }
    }

    pub fn shape(&self) -> &PriorShape {
        &self.shape
    }
}

/// Point estimate with bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub theta_hat: f64,
    pub log_lik_at_hat: f64,
    /// Likelihood evaluations consumed (grid points plus refinement steps).
    pub evaluations: usize,
    /// The MLE maximum was found at the right end of the scanned range,
    /// `b − δ`; the likelihood may still increase towards `b`.
    pub at_right_boundary: bool,
}

fn compensators(model: &IntensityModel, grid: &UniformGrid) -> Result<Vec<f64>> {
    let base = cumulative_raw(model, model.theta1(), model.tau())?;
    grid.points().map(|th| Ok(cumulative_raw(model, th, model.tau())? - base)).collect()
}

fn log_likelihood_grid(
    model: &IntensityModel,
    grid: &UniformGrid,
    comps: &[f64],
    events: &[f64],
    n: usize,
) -> Vec<f64> {
    let mut out = model.family().log_ratio_sums(grid, model.theta1(), events);
    for (v, c) in out.iter_mut().zip(comps) {
        *v -= n as f64 * c;
    }
    // θ₀ = θ₁ exactly, where the ratio is identically 1.
    out[0] = 0.0;
    out
}

/// Coarse θ-grid over `[θ₁, b − δ]` with cached compensators.
#[derive(Debug, Clone)]
pub struct MleGrid {
    grid: UniformGrid,
    compensators: Vec<f64>,
}

impl MleGrid {
    pub fn new(model: &IntensityModel, grid_points: usize) -> Result<Self> {
        if grid_points < 16 {
            return Err(Error::domain(format!("grid_points = {grid_points} must be at least 16")));
        }
        let delta = (model.b() - model.theta1()) * RIGHT_GAP;
        let grid = UniformGrid::spanning(model.theta1(), model.b() - delta, grid_points);
        let compensators = compensators(model, &grid)?;
        Ok(MleGrid { grid, compensators })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    /// Scan the grid, then golden-section refine on the cell pair around the
    /// best grid point. Multimodal likelihoods are resolved only up to the
    /// grid spacing.
    pub fn estimate(&self, model: &IntensityModel, experiment: &Experiment) -> Result<EstimateReport> {
        let events = experiment.pooled_events();
        let values = log_likelihood_grid(model, &self.grid, &self.compensators, &events, experiment.n());
        let (best, best_value) =
            values
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        if !best_value.is_finite() {
            return Err(Error::numeric("log-likelihood is not finite on the MLE grid"));
        }
        let last = self.grid.len - 1;
        let lo = self.grid.at(best.saturating_sub(1));
        let hi = self.grid.at((best + 1).min(last));

        let tau = model.tau();
        let theta1 = model.theta1();
        let base = cumulative_raw(model, theta1, tau)?;
        let n = experiment.n() as f64;
        let family = model.family();
        let reference: Vec<f64> = events.iter().map(|&t| family.lambda(theta1, t)).collect();
        let objective = |theta: f64| -> f64 {
            match cumulative_raw(model, theta, tau) {
                Ok(cum) => family.log_ratio_sum_against(theta, &reference, &events) - n * (cum - base),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let (refined, refined_value, evals) = golden_section_max(objective, lo, hi, MLE_TOL);
        let (theta_hat, log_lik_at_hat) =
            if refined_value > best_value { (refined, refined_value) } else { (self.grid.at(best), best_value) };
        let right_end = self.grid.at(last);
        Ok(EstimateReport {
            theta_hat,
            log_lik_at_hat,
            evaluations: self.grid.len + evals,
            at_right_boundary: best == last && right_end - theta_hat <= MLE_TOL,
        })
    }
}

/// One-sided MLE over `[θ₁, b)`.
pub fn mle(model: &IntensityModel, experiment: &Experiment, grid_points: usize) -> Result<EstimateReport> {
    MleGrid::new(model, grid_points)?.estimate(model, experiment)
}

/// Composite-Simpson θ-grid over `[θ₁, b]` with prior weights and cached
/// compensators.
#[derive(Debug, Clone)]
pub struct BayesGrid {
    grid: UniformGrid,
    /// Simpson weight times prior density at each node.
    weights: Vec<f64>,
    compensators: Vec<f64>,
    prior_at_theta1: f64,
}

/// Posterior mean together with the log of the prior-averaged likelihood
/// ratio `ln ∫ L(θ, θ₁, Xⁿ) p(θ) dθ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesSummary {
    pub estimate: EstimateReport,
    pub log_averaged_ratio: f64,
}

impl BayesGrid {
    /// `quad_points` Simpson intervals (rounded up to even).
    pub fn new(model: &IntensityModel, prior: &PriorDensity, quad_points: usize) -> Result<Self> {
        if quad_points < 64 {
            return Err(Error::domain(format!("quad_points = {quad_points} must be at least 64")));
        }
        let intervals = quad_points + quad_points % 2;
        let grid = UniformGrid::spanning(model.theta1(), model.b(), intervals + 1);
        let weights = simpson_weights(intervals, grid.step)
            .into_iter()
            .zip(grid.points())
            .map(|(w, th)| w * prior.density(th))
            .collect();
        let compensators = compensators(model, &grid)?;
        Ok(BayesGrid { grid, weights, compensators, prior_at_theta1: prior.density(model.theta1()) })
    }

    pub fn prior_at_theta1(&self) -> f64 {
        self.prior_at_theta1
    }

    pub fn evaluate(&self, model: &IntensityModel, experiment: &Experiment) -> Result<BayesSummary> {
        let events = experiment.pooled_events();
        let values = log_likelihood_grid(model, &self.grid, &self.compensators, &events, experiment.n());
        let peak = values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut den = CompensatedSum::new();
        let mut num = CompensatedSum::new();
        for (k, (&v, &w)) in values.iter().zip(&self.weights).enumerate() {
            if w > 0.0 {
                let mass = w * (v - peak).exp();
                den.add(mass);
                num.add(mass * self.grid.at(k));
            }
        }
        let den = den.value();
        if !(den > 0.0 && den.is_finite() && peak.is_finite()) {
            return Err(Error::numeric(
                "posterior normalizer underflowed; prior and likelihood do not overlap on the grid",
            ));
        }
        let theta1 = model.theta1();
        let theta_hat = (num.value() / den).clamp(theta1, model.b().next_down());
        let log_lik_at_hat = log_likelihood_ratio(model, theta_hat, experiment)?;
        Ok(BayesSummary {
            estimate: EstimateReport {
                theta_hat,
                log_lik_at_hat,
                evaluations: self.grid.len + 1,
                at_right_boundary: false,
            },
            log_averaged_ratio: peak + den.ln(),
        })
    }
}

fn check_scale(scale: &LocalScale, experiment: &Experiment) -> Result<()> {
    if scale.n != experiment.n() {
        return Err(Error::domain(format!(
            "local scale built for n = {} but the experiment has {} paths",
            scale.n,
            experiment.n()
        )));
    }
    Ok(())
}

/// Posterior mean `∫θ p(θ) L dθ / ∫p(θ) L dθ` by composite Simpson on a
/// max-stabilized log grid.
pub fn bayes_estimator(
    model: &IntensityModel,
    scale: &LocalScale,
    prior: &PriorDensity,
    experiment: &Experiment,
    quad_points: usize,
) -> Result<EstimateReport> {
    check_scale(scale, experiment)?;
    Ok(BayesGrid::new(model, prior, quad_points)?.evaluate(model, experiment)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, local_scale, paper_model};
    use crate::process::{sample_experiment, PathSample};

    fn experiment_from(events_per_path: Vec<Vec<f64>>, tau: f64) -> Experiment {
        let paths = events_per_path.into_iter().map(|e| PathSample::new(e, tau).unwrap()).collect();
        Experiment::new("fixture", 0.0, 0, paths).unwrap()
    }

    #[test]
    fn prior_validation() {
        let m = paper_model();
        assert!(PriorDensity::uniform(&m).is_ok());
        assert!(PriorDensity::new(PriorShape::Uniform { lo: 3.0, hi: 5.0 }, &m).is_ok());
        // Mass outside the support.
        assert!(PriorDensity::new(PriorShape::Uniform { lo: 3.0, hi: 8.0 }, &m).is_err());
        // Vanishes at θ₁.
        let tri = PriorShape::Triangular { lo: 4.0, mode: 4.5, hi: 5.0 };
        assert!(PriorDensity::new(tri.clone(), &m).is_err());
        assert!(PriorDensity::new_unanchored(tri, &m).is_ok());
        let table = PriorShape::table_from_reader("theta,density\n3,0.5\n7,0\n".as_bytes()).unwrap();
        let p = PriorDensity::new(table, &m).unwrap();
        assert!((p.density(5.0) - 0.25).abs() < 1e-15);
        // Jumps inside the parameter interval.
        let late = PriorShape::Uniform { lo: 4.0, hi: 7.0 };
        assert!(matches!(PriorDensity::new(late.clone(), &m), Err(Error::InvalidModel(_))));
        assert!(PriorDensity::new_unanchored(late, &m).is_ok());
    }

    #[test]
    fn mle_of_eventless_linear_experiment_is_theta1() {
        let m = builtin("linear", None).unwrap();
        let e = experiment_from(vec![vec![]; 4], 3.0);
        let r = mle(&m, &e, MLE_GRID_POINTS).unwrap();
        assert_eq!(r.theta_hat, m.theta1());
        assert_eq!(r.log_lik_at_hat, 0.0);
        assert!(!r.at_right_boundary);
    }

    #[test]
    fn mle_flags_right_boundary() {
        let m = builtin("linear", None).unwrap();
        // 40 events on one path: ln L = 40 ln θ − 3θ + const peaks at 13.3 > b.
        let events: Vec<f64> = (0..40).map(|i| 0.07 * i as f64 + 0.01).collect();
        let r = mle(&m, &experiment_from(vec![events], 3.0), 64).unwrap();
        assert!(r.at_right_boundary);
        assert!(r.theta_hat < m.b());
    }

    #[test]
    fn mle_rejects_small_grids() {
        let m = paper_model();
        let e = sample_experiment(&m, 3.0, 2, 1).unwrap();
        assert!(mle(&m, &e, 15).is_err());
    }

    #[test]
    fn mle_of_linear_model_matches_closed_form() {
        // ln L(θ) = N ln(θ/θ₁) − nτ(θ − θ₁) peaks at N/(nτ).
        let m = builtin("linear", None).unwrap();
        let e = sample_experiment(&m, 2.0, 20, 3).unwrap();
        let expected = e.total_events() as f64 / (20.0 * 3.0);
        let r = mle(&m, &e, MLE_GRID_POINTS).unwrap();
        assert!((r.theta_hat - expected).abs() < 1e-7, "{} vs {expected}", r.theta_hat);
    }

    #[test]
    fn narrow_prior_dominates_the_posterior_mean() {
        let m = paper_model();
        let s = local_scale(&m, 5).unwrap();
        let prior = PriorDensity::new_unanchored(PriorShape::Triangular { lo: 4.99, mode: 5.0, hi: 5.01 }, &m).unwrap();
        for seed in 0..5 {
            let e = sample_experiment(&m, 3.0, 5, seed).unwrap();
            let r = bayes_estimator(&m, &s, &prior, &e, BAYES_QUAD_POINTS).unwrap();
            assert!((r.theta_hat - 5.0).abs() < 4.0 / 2048.0, "{}", r.theta_hat);
        }
    }

    #[test]
    fn bayes_estimate_stays_in_support() {
        let m = paper_model();
        let s = local_scale(&m, 30).unwrap();
        let prior = PriorDensity::uniform(&m).unwrap();
        let grid = BayesGrid::new(&m, &prior, 256).unwrap();
        for seed in 0..10 {
            let e = sample_experiment(&m, 3.0 + 0.4 * seed as f64, 30, seed).unwrap();
            let r = grid.evaluate(&m, &e).unwrap().estimate;
            assert!(r.theta_hat >= m.theta1() && r.theta_hat < m.b());
        }
        assert!(BayesGrid::new(&m, &prior, 63).is_err());
        let e = sample_experiment(&m, 3.0, 31, 0).unwrap();
        assert!(bayes_estimator(&m, &s, &prior, &e, 256).is_err());
    }

    #[test]
    fn bayes_estimate_is_monotone_in_added_events_on_linear_model() {
        // λ̇ = 1 > 0 everywhere, so each extra event tilts the posterior up.
        let m = builtin("linear", None).unwrap();
        let s = local_scale(&m, 3).unwrap();
        let prior = PriorDensity::uniform(&m).unwrap();
        let mut paths = vec![vec![0.5, 1.0], vec![2.0], vec![]];
        let mut last = m.theta1();
        for k in 0..12 {
            let e = experiment_from(paths.clone(), 3.0);
            let r = bayes_estimator(&m, &s, &prior, &e, 512).unwrap();
            assert!(r.theta_hat >= last, "step {k}: {} < {last}", r.theta_hat);
            last = r.theta_hat;
            let path = &mut paths[k % 3];
            let t = path.last().copied().unwrap_or(0.0) + 0.05;
            path.push(t);
        }
    }
}
