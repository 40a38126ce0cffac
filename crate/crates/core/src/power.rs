//! Monte Carlo power functions over local alternatives `θ = θ₁ + uφₙ`, and
//! the limit power curves they converge to.
//!
//! Replicate `i` of every grid point uses the experiment seed
//! `derive_seed(seed, i)`, so curves for different tests (and different
//! `u`) share their random numbers, and results do not depend on how the
//! replicates are scheduled.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::PriorDensity;
use crate::hypothesis::{normal_draws, Decision, GridSettings, TestBattery, TestKind, ThresholdSettings};
use crate::model::{local_scale, IntensityModel};
use crate::normal;
use crate::process::sample_experiment;
use crate::rng::derive_seed;
use crate::stats::{wilson_interval, Z_975};

/// Smallest replicate count accepted by the estimators.
pub const MIN_REPLICATES: usize = 100;
/// Replicates per grid point when none is given.
pub const DEFAULT_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub u: f64,
    pub beta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ci_half_width: f64,
    /// Replicates `N`.
    pub replicates: usize,
    /// Paths per replicate `n`.
    pub n: usize,
}

impl PowerPoint {
    pub fn from_counts(u: f64, rejections: usize, replicates: usize, n: usize) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(rejections, replicates, Z_975);
        PowerPoint {
            u,
            beta_hat: rejections as f64 / replicates as f64,
            ci_lo,
            ci_hi,
            ci_half_width: 0.5 * (ci_hi - ci_lo),
            replicates,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub kind: TestKind,
    pub epsilon: f64,
    pub model: String,
    pub seed: u64,
    pub points: Vec<PowerPoint>,
}

#[derive(Serialize)]
struct PowerRow {
    test: TestKind,
    epsilon: f64,
    n: usize,
    #[serde(rename = "N")]
    replicates: usize,
    u: f64,
    beta_hat: f64,
    ci_lo: f64,
    ci_hi: f64,
    seed: u64,
}

/// Header of the power-curve CSV.
pub const POWER_CSV_HEADER: [&str; 9] = ["test", "epsilon", "n", "N", "u", "beta_hat", "ci_lo", "ci_hi", "seed"];

/// Write curves as CSV with header `test,epsilon,n,N,u,beta_hat,ci_lo,ci_hi,seed`.
pub fn write_power_csv<W: Write>(curves: &[PowerCurve], writer: W) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    csv.write_record(POWER_CSV_HEADER)?;
    for curve in curves {
        for p in &curve.points {
            csv.serialize(PowerRow {
                test: curve.kind,
                epsilon: curve.epsilon,
                n: p.n,
                replicates: p.replicates,
                u: p.u,
                beta_hat: p.beta_hat,
                ci_lo: p.ci_lo,
                ci_hi: p.ci_hi,
                seed: curve.seed,
            })?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(Error::domain(format!("N = {replicates} must be at least {MIN_REPLICATES}")));
    }
    Ok(())
}

/// Run every test of `battery` on `replicates` experiments generated at
/// `θ₁ + uφₙ`. Result is replicate-major.
pub fn simulate_decisions(battery: &TestBattery, u: f64, replicates: usize, seed: u64) -> Result<Vec<Vec<Decision>>> {
    let theta = battery.scale().theta_at(u)?;
    let model = battery.model();
    let n = battery.scale().n;
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let experiment = sample_experiment(model, theta, n, derive_seed(seed, i))?;
            battery.decide(&experiment)
        })
        .collect()
}

fn points_from_decisions(decisions: &[Vec<Decision>], u: f64, n: usize, kinds: usize) -> Vec<PowerPoint> {
    (0..kinds)
        .map(|k| {
            let rejections = decisions.iter().filter(|d| d[k].reject).count();
            PowerPoint::from_counts(u, rejections, decisions.len(), n)
        })
        .collect()
}

fn check_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.is_empty() {
        return Err(Error::domain("empty u-grid"));
    }
    if u_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("u-grid must be strictly increasing"));
    }
    Ok(())
}

/// One curve per test of `battery`, all on shared experiments.
pub fn battery_curves(battery: &TestBattery, u_grid: &[f64], replicates: usize, seed: u64) -> Result<Vec<PowerCurve>> {
    check_grid(u_grid)?;
    check_replicates(replicates)?;
    for &u in u_grid {
        battery.scale().check_u(u)?;
    }
    let kinds = battery.kinds();
    let mut curves: Vec<PowerCurve> = kinds
        .iter()
        .map(|&kind| PowerCurve {
            kind,
            epsilon: battery.epsilon(),
            model: battery.model().name().to_string(),
            seed,
            points: Vec::with_capacity(u_grid.len()),
        })
        .collect();
    for &u in u_grid {
        let decisions = simulate_decisions(battery, u, replicates, seed)?;
        for (curve, point) in
            curves.iter_mut().zip(points_from_decisions(&decisions, u, battery.scale().n, kinds.len()))
        {
            curve.points.push(point);
        }
    }
    Ok(curves)
}

fn single_battery(
    kind: TestKind,
    model: &IntensityModel,
    prior: Option<&PriorDensity>,
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<TestBattery> {
    match (kind.needs_prior(), prior.is_some()) {
        (true, false) => return Err(Error::domain(format!("{kind} needs a prior density"))),
        (false, true) => return Err(Error::domain(format!("{kind} does not take a prior density"))),
        _ => {}
    }
    let scale = local_scale(model, n)?;
    let thresholds = ThresholdSettings { draws: crate::hypothesis::DEFAULT_DRAWS, seed };
    TestBattery::new(model, scale, epsilon, &[kind], prior, thresholds, GridSettings::default())
}

/// Empirical rejection frequency of `kind` at `u` over `N` experiments,
/// with a 95% Wilson interval. Bayes thresholds are calibrated with
/// `M = 10⁵` draws on `seed`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_power(
    kind: TestKind,
    model: &IntensityModel,
    prior: Option<&PriorDensity>,
    epsilon: f64,
    u: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PowerPoint> {
    let battery = single_battery(kind, model, prior, epsilon, n, seed)?;
    Ok(battery_curves(&battery, &[u], replicates, seed)?[0].points[0])
}

#[allow(clippy::too_many_arguments)]
pub fn power_curve(
    kind: TestKind,
    model: &IntensityModel,
    prior: Option<&PriorDensity>,
    epsilon: f64,
    u_grid: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PowerCurve> {
    let battery = single_battery(kind, model, prior, epsilon, n, seed)?;
    Ok(battery_curves(&battery, u_grid, replicates, seed)?.remove(0))
}

/// `β*(u) = 1 − F(zₑ − u)`.
pub fn limit_power_star(u: f64, epsilon: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("u = {u} must be nonnegative")));
    }
    Ok(normal::sf(normal::upper_quantile(epsilon)? - u))
}

fn limit_power_mc(u: f64, threshold: f64, draws: usize, seed: u64, map: fn(f64) -> f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("u = {u} must be nonnegative")));
    }
    if draws == 0 {
        return Err(Error::domain("M must be positive"));
    }
    let hits = normal_draws(draws, seed).into_iter().filter(|&d| map(d + u) > threshold).count();
    Ok(hits as f64 / draws as f64)
}

/// `P{f(Δ+u)/F(Δ+u) + Δ + u > kₑ}` over `M` normal draws. The draws are the
/// ones [`crate::hypothesis::bt1_threshold`] uses for the same seed.
pub fn limit_power_bt1(u: f64, k_eps: f64, draws: usize, seed: u64) -> Result<f64> {
    limit_power_mc(u, k_eps, draws, seed, normal::bayes_estimator_limit)
}

/// `P{F(Δ+u)/f(Δ+u) > mₑ}` over `M` normal draws.
pub fn limit_power_bt2(u: f64, m_eps: f64, draws: usize, seed: u64) -> Result<f64> {
    limit_power_mc(u, m_eps, draws, seed, normal::averaged_ratio_limit)
}

/// Which limit power function a [`LimitPoint`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    /// `β*`, shared by SFT, GLRT and Wald.
    Star,
    Bt1,
    Bt2,
}

impl LimitKind {
    /// The limit curve a test's power converges to.
    pub fn of(kind: TestKind) -> LimitKind {
        match kind {
            TestKind::Sft | TestKind::Glrt | TestKind::Wald => LimitKind::Star,
            TestKind::Bt1 => LimitKind::Bt1,
            TestKind::Bt2 => LimitKind::Bt2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPoint {
    pub limit: LimitKind,
    pub epsilon: f64,
    pub u: f64,
    pub beta: f64,
}

/// Limit power curves for the distinct limits of `kinds`, Bayes thresholds
/// calibrated on `settings`.
pub fn limit_curves(
    kinds: &[TestKind],
    epsilon: f64,
    u_grid: &[f64],
    settings: ThresholdSettings,
) -> Result<Vec<LimitPoint>> {
    check_grid(u_grid)?;
    let mut limits: Vec<LimitKind> = kinds.iter().map(|&k| LimitKind::of(k)).collect();
    limits.sort_by_key(|l| *l as u8);
    limits.dedup();
    let mut out = Vec::with_capacity(limits.len() * u_grid.len());
    for limit in limits {
        for &u in u_grid {
            let beta = match limit {
                LimitKind::Star => limit_power_star(u, epsilon)?,
                LimitKind::Bt1 => {
                    let k = crate::hypothesis::bt1_threshold(epsilon, settings.draws, settings.seed)?;
                    limit_power_bt1(u, k, settings.draws, settings.seed)?
                }
                LimitKind::Bt2 => {
                    let m = crate::hypothesis::bt2_threshold(epsilon, settings.draws, settings.seed)?;
                    limit_power_bt2(u, m, settings.draws, settings.seed)?
                }
            };
            out.push(LimitPoint { limit, epsilon, u, beta });
        }
    }
    Ok(out)
}

/// Write limit curves as CSV with header `limit,epsilon,u,beta`.
pub fn write_limit_csv<W: Write>(points: &[LimitPoint], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for p in points {
        csv.serialize(p)?;
    }
    csv.flush()?;
    Ok(())
}
