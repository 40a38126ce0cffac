//! The five one-sided decision procedures (SFT, GLRT, Wald, BT1, BT2), their
//! thresholds, and Monte Carlo calibration of the Bayes thresholds.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use once_cell::sync::Lazy;
use parking_lot::RwLock;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{BayesGrid, MleGrid, PriorDensity, BAYES_QUAD_POINTS, MLE_GRID_POINTS};
use crate::likelihood::ScoreEvaluator;
use crate::model::{IntensityModel, LocalScale};
use crate::normal;
use crate::process::Experiment;
use crate::rng;

/// Default number of normal draws behind a Bayes threshold.
pub const DEFAULT_DRAWS: usize = 100_000;
pub const MIN_DRAWS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE", try_from = "String")]
pub enum TestKind {
    Sft,
    Glrt,
    Wald,
    Bt1,
    Bt2,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [TestKind::Sft, TestKind::Glrt, TestKind::Wald, TestKind::Bt1, TestKind::Bt2];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Sft => "SFT",
            TestKind::Glrt => "GLRT",
            TestKind::Wald => "WALD",
            TestKind::Bt1 => "BT1",
            TestKind::Bt2 => "BT2",
        }
    }

    pub fn needs_prior(self) -> bool {
        matches!(self, TestKind::Bt1 | TestKind::Bt2)
    }

    fn needs_mle(self) -> bool {
        matches!(self, TestKind::Glrt | TestKind::Wald)
    }

    /// The limit theory for GLRT and Wald assumes `ε ≤ 1/2`. Larger sizes
    /// are accepted but carry no asymptotic guarantee.
    pub fn within_guarantee(self, epsilon: f64) -> bool {
        !self.needs_mle() || epsilon <= 0.5
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sft" | "score" => Ok(TestKind::Sft),
            "glrt" => Ok(TestKind::Glrt),
            "wald" | "wt" => Ok(TestKind::Wald),
            "bt1" => Ok(TestKind::Bt1),
            "bt2" => Ok(TestKind::Bt2),
            _ => Err(Error::domain(format!("unknown test `{s}` (expected sft, glrt, wald, bt1, bt2)"))),
        }
    }
}

impl TryFrom<String> for TestKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Outcome of one non-randomized test: reject iff `statistic > threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub kind: TestKind,
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub epsilon: f64,
}

impl Decision {
    pub fn new(kind: TestKind, statistic: f64, threshold: f64, epsilon: f64) -> Self {
        Decision { kind, statistic, threshold, reject: statistic > threshold, epsilon }
    }
}

/// `zₑ` with `P(N(0,1) > zₑ) = ε`.
pub fn z_quantile(epsilon: f64) -> Result<f64> {
    normal::upper_quantile(epsilon)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon = {epsilon} is not in (0, 1)")))
    }
}

/// `M` standard normal draws from the dedicated stream of `seed`.
pub fn normal_draws(draws: usize, seed: u64) -> Vec<f64> {
    let mut stream = rng::stream(seed, rng::NORMAL_DRAWS_STREAM);
    (0..draws).map(|_| stream.sample(StandardNormal)).collect()
}

/// 1-based rank of the `(1 − ε)` empirical quantile among `M` values.
pub(crate) fn quantile_rank(epsilon: f64, draws: usize) -> usize {
    // The guard absorbs representation error, e.g. (1 - 0.05) * 1e5.
    let rank = ((1.0 - epsilon) * draws as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, draws)
}

fn empirical_quantile(mut values: Vec<f64>, epsilon: f64) -> f64 {
    let rank = quantile_rank(epsilon, values.len());
    let (_, kth, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *kth
}

fn check_draws(epsilon: f64, draws: usize) -> Result<()> {
    check_epsilon(epsilon)?;
    if draws < MIN_DRAWS {
        return Err(Error::domain(format!("M = {draws} must be at least {MIN_DRAWS}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: TestKind,
    epsilon_bits: u64,
    draws: usize,
    seed: u64,
}

static THRESHOLD_CACHE: Lazy<RwLock<HashMap<CacheKey, f64>>> = Lazy::new(Default::default);

fn cached_threshold(kind: TestKind, epsilon: f64, draws: usize, seed: u64, compute: impl FnOnce() -> f64) -> f64 {
    let key = CacheKey { kind, epsilon_bits: epsilon.to_bits(), draws, seed };
    if let Some(v) = THRESHOLD_CACHE.read().get(&key) {
        return *v;
    }
    let value = compute();
    THRESHOLD_CACHE.write().insert(key, value);
    value
}

/// `kₑ`: the ⌈(1−ε)M⌉-th smallest of `f(Δᵢ)/F(Δᵢ) + Δᵢ` over `M` normal
/// draws. Memoized per `(ε, M, seed)`.
pub fn bt1_threshold(epsilon: f64, draws: usize, seed: u64) -> Result<f64> {
    check_draws(epsilon, draws)?;
    Ok(cached_threshold(TestKind::Bt1, epsilon, draws, seed, || {
        let values = normal_draws(draws, seed).into_iter().map(normal::bayes_estimator_limit).collect();
        empirical_quantile(values, epsilon)
    }))
}

/// `mₑ`: the same empirical quantile of `F(Δᵢ)/f(Δᵢ)`.
pub fn bt2_threshold(epsilon: f64, draws: usize, seed: u64) -> Result<f64> {
    check_draws(epsilon, draws)?;
    Ok(cached_threshold(TestKind::Bt2, epsilon, draws, seed, || {
        let values = normal_draws(draws, seed).into_iter().map(normal::averaged_ratio_limit).collect();
        empirical_quantile(values, epsilon)
    }))
}

/// `kₑ = zₑ + f(zₑ)/F(zₑ)`, exact because the limit map is increasing.
pub fn bt1_threshold_closed_form(epsilon: f64) -> Result<f64> {
    Ok(normal::bayes_estimator_limit(z_quantile(epsilon)?))
}

/// `mₑ = F(zₑ)/f(zₑ)`.
pub fn bt2_threshold_closed_form(epsilon: f64) -> Result<f64> {
    Ok(normal::averaged_ratio_limit(z_quantile(epsilon)?))
}

/// Threshold of `kind` at size `ε`; the Bayes kinds are Monte Carlo
/// calibrated with `settings`.
pub fn threshold(kind: TestKind, epsilon: f64, settings: ThresholdSettings) -> Result<f64> {
    check_epsilon(epsilon)?;
    match kind {
        TestKind::Sft | TestKind::Wald => z_quantile(epsilon),
        TestKind::Glrt => Ok((0.5 * z_quantile(epsilon)?.powi(2)).exp()),
        TestKind::Bt1 => bt1_threshold(epsilon, settings.draws, settings.seed),
        TestKind::Bt2 => bt2_threshold(epsilon, settings.draws, settings.seed),
    }
}

/// Monte Carlo settings for the Bayes thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSettings {
    pub draws: usize,
    pub seed: u64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings { draws: DEFAULT_DRAWS, seed: 0 }
    }
}

/// Evaluates a set of tests on experiments of one `(model, n, ε)` setup,
/// sharing the score compensator, MLE grid and Bayes grid across calls and
/// across kinds.
#[derive(Debug, Clone)]
pub struct TestBattery {
    model: IntensityModel,
    scale: LocalScale,
    epsilon: f64,
    kinds: Vec<TestKind>,
    thresholds: Vec<f64>,
    score: Option<ScoreEvaluator>,
    mle: Option<MleGrid>,
    bayes: Option<BayesGrid>,
}

/// Grid sizes used by the estimator-based tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSettings {
    pub mle_points: usize,
    pub bayes_points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { mle_points: MLE_GRID_POINTS, bayes_points: BAYES_QUAD_POINTS }
    }
}

impl TestBattery {
    pub fn new(
        model: &IntensityModel,
        scale: LocalScale,
        epsilon: f64,
        kinds: &[TestKind],
        prior: Option<&PriorDensity>,
        thresholds: ThresholdSettings,
        grids: GridSettings,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        if kinds.is_empty() {
            return Err(Error::domain("no tests requested"));
        }
        let bayes = if kinds.iter().any(|k| k.needs_prior()) {
            let prior = prior.ok_or_else(|| Error::domain("the Bayes tests need a prior density"))?;
            if !(prior.density(model.theta1()) > 0.0) {
                return Err(Error::domain("the Bayes tests need a prior with p(θ₁) > 0"));
            }
            Some(BayesGrid::new(model, prior, grids.bayes_points)?)
        } else {
            None
        };
        let mle = if kinds.iter().any(|k| k.needs_mle()) { Some(MleGrid::new(model, grids.mle_points)?) } else { None };
        let score = if kinds.contains(&TestKind::Sft) { Some(ScoreEvaluator::new(model, &scale)?) } else { None };
        let thresholds = kinds.iter().map(|&k| threshold(k, epsilon, thresholds)).collect::<Result<Vec<_>>>()?;
        Ok(TestBattery { model: model.clone(), scale, epsilon, kinds: kinds.to_vec(), thresholds, score, mle, bayes })
    }

    pub fn kinds(&self) -> &[TestKind] {
        &self.kinds
    }

    pub fn scale(&self) -> &LocalScale {
        &self.scale
    }

    pub fn model(&self) -> &IntensityModel {
        &self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// One decision per requested kind, in request order.
    pub fn decide(&self, experiment: &Experiment) -> Result<Vec<Decision>> {
        if experiment.n() != self.scale.n {
            return Err(Error::domain(format!(
                "battery built for n = {} but the experiment has {} paths",
                self.scale.n,
                experiment.n()
            )));
        }
        let model = &self.model;
        let mle = match &self.mle {
            Some(grid) => Some(grid.estimate(model, experiment)?),
            None => None,
        };
        let bayes = match &self.bayes {
            Some(grid) => Some((grid.evaluate(model, experiment)?, grid.prior_at_theta1())),
            None => None,
        };
        self.kinds
            .iter()
            .zip(&self.thresholds)
            .map(|(&kind, &threshold)| {
                let statistic = match kind {
                    TestKind::Sft => self.score.as_ref().unwrap().evaluate(model, experiment)?.delta_n,
                    TestKind::Glrt => mle.unwrap().log_lik_at_hat.exp(),
                    TestKind::Wald => self.scale.normalize(mle.unwrap().theta_hat),
                    TestKind::Bt1 => self.scale.normalize(bayes.unwrap().0.estimate.theta_hat),
                    TestKind::Bt2 => {
                        let (summary, p1) = bayes.unwrap();
                        (summary.log_averaged_ratio - (p1 * self.scale.phi_n).ln()).exp()
                    }
                };
                Ok(Decision::new(kind, statistic, threshold, self.epsilon))
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn single(
    kind: TestKind,
    model: &IntensityModel,
    scale: &LocalScale,
    prior: Option<&PriorDensity>,
    experiment: &Experiment,
    epsilon: f64,
    thresholds: ThresholdSettings,
    grids: GridSettings,
) -> Result<Decision> {
    let battery = TestBattery::new(model, *scale, epsilon, &[kind], prior, thresholds, grids)?;
    Ok(battery.decide(experiment)?[0])
}

/// Score Function test: `Δₙ > zₑ`.
pub fn sft(model: &IntensityModel, scale: &LocalScale, experiment: &Experiment, epsilon: f64) -> Result<Decision> {
    single(TestKind::Sft, model, scale, None, experiment, epsilon, Default::default(), Default::default())
}

/// GLRT: `sup_θ L(θ, θ₁, Xⁿ) > exp(zₑ²/2)`.
pub fn glrt(model: &IntensityModel, scale: &LocalScale, experiment: &Experiment, epsilon: f64) -> Result<Decision> {
    single(TestKind::Glrt, model, scale, None, experiment, epsilon, Default::default(), Default::default())
}

/// Wald test: `(θ̂ₙ − θ₁)/φₙ > zₑ`.
pub fn wald(model: &IntensityModel, scale: &LocalScale, experiment: &Experiment, epsilon: f64) -> Result<Decision> {
    single(TestKind::Wald, model, scale, None, experiment, epsilon, Default::default(), Default::default())
}

/// BT1: `(θ̃ₙ − θ₁)/φₙ > kₑ`.
#[allow(clippy::too_many_arguments)]
pub fn bt1(
    model: &IntensityModel,
    scale: &LocalScale,
    prior: &PriorDensity,
    experiment: &Experiment,
    epsilon: f64,
    draws: usize,
    seed: u64,
) -> Result<Decision> {
    single(
        TestKind::Bt1,
        model,
        scale,
        Some(prior),
        experiment,
        epsilon,
        ThresholdSettings { draws, seed },
        Default::default(),
    )
}

/// BT2: `Rₙ = ∫ L(θ, θ₁, Xⁿ) p(θ) dθ / (p(θ₁) φₙ) > mₑ`.
#[allow(clippy::too_many_arguments)]
pub fn bt2(
    model: &IntensityModel,
    scale: &LocalScale,
    prior: &PriorDensity,
    experiment: &Experiment,
    epsilon: f64,
    quad_points: usize,
    draws: usize,
    seed: u64,
) -> Result<Decision> {
    single(
        TestKind::Bt2,
        model,
        scale,
        Some(prior),
        experiment,
        epsilon,
        ThresholdSettings { draws, seed },
        GridSettings { bayes_points: quad_points, ..Default::default() },
    )
}

/// One row of a threshold table. `M` and `seed` are empty for thresholds
/// that are not Monte Carlo calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub test: TestKind,
    pub epsilon: f64,
    pub threshold: f64,
    #[serde(rename = "M")]
    pub draws: Option<usize>,
    pub seed: Option<u64>,
}

/// CSV with header `test,epsilon,threshold,M,seed`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Thresholds for every `(kind, ε)` pair, kinds outermost.
    pub fn calibrate(kinds: &[TestKind], epsilons: &[f64], settings: ThresholdSettings) -> Result<Self> {
        let mut rows = Vec::with_capacity(kinds.len() * epsilons.len());
        for &kind in kinds {
            for &epsilon in epsilons {
                let mc = kind.needs_prior();
                rows.push(ThresholdRow {
                    test: kind,
                    epsilon,
                    threshold: threshold(kind, epsilon, settings)?,
                    draws: mc.then_some(settings.draws),
                    seed: mc.then_some(settings.seed),
                });
            }
        }
        Ok(ThresholdTable { rows })
    }

    /// Same layout with the closed-form Bayes thresholds.
    pub fn closed_form(kinds: &[TestKind], epsilons: &[f64]) -> Result<Self> {
        let mut rows = Vec::new();
        for &kind in kinds {
            for &epsilon in epsilons {
                let threshold = match kind {
                    TestKind::Bt1 => bt1_threshold_closed_form(epsilon)?,
                    TestKind::Bt2 => bt2_threshold_closed_form(epsilon)?,
                    _ => threshold(kind, epsilon, ThresholdSettings::default())?,
                };
                rows.push(ThresholdRow { test: kind, epsilon, threshold, draws: None, seed: None });
            }
        }
        Ok(ThresholdTable { rows })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        csv.write_record(["test", "epsilon", "threshold", "M", "seed"])?;
        for row in &self.rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let rows = csv.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(ThresholdTable { rows })
    }

    pub fn get(&self, kind: TestKind, epsilon: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.test == kind && r.epsilon == epsilon).map(|r| r.threshold)
    }
}
