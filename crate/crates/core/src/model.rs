//! Parametric intensity families `λ(θ, t)` on `[0, τ]` and their
//! deterministic functionals: cumulative intensity, Fisher information and
//! the local scale `φₙ = (n I(θ₁))^{-1/2}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, compensated_sum, CompensatedSum, UniformGrid};

pub mod table;

pub use table::IntensityTable;

/// Absolute tolerance for `Λ(θ, t)`.
pub const CUMULATIVE_TOL: f64 = 1e-10;
/// Absolute tolerance for `I(θ)`.
pub const FISHER_TOL: f64 = 1e-8;
/// Side of the `(θ, t)` audit grid checked at model registration.
pub const AUDIT_RESOLUTION: usize = 512;

/// A one-parameter intensity family. `theta` ranges over the parameter
/// interval of the owning [`IntensityModel`] and `t` over `[0, τ]`.
///
/// The two batch methods compute `Σᵢ ln(λ(θ, tᵢ) / λ(θ_ref, tᵢ))`; families
/// with structure worth exploiting override them.
pub trait IntensityFamily: Send + Sync + fmt::Debug {
    fn lambda(&self, theta: f64, t: f64) -> f64;

    /// `∂λ/∂θ`.
    fn dlambda(&self, theta: f64, t: f64) -> f64;

    /// Upper bound of `t ↦ λ(θ, t)` on `[0, τ]`.
    fn lambda_max(&self, theta: f64) -> f64;

    fn log_ratio_sum(&self, theta: f64, theta_ref: f64, events: &[f64]) -> f64 {
        compensated_sum(events.iter().map(|&t| (self.lambda(theta, t) / self.lambda(theta_ref, t)).ln()))
    }

    /// Same sum with the reference intensities `λ(θ_ref, tᵢ)` supplied.
    fn log_ratio_sum_against(&self, theta: f64, reference: &[f64], events: &[f64]) -> f64 {
        compensated_sum(events.iter().zip(reference).map(|(&t, &r)| (self.lambda(theta, t) / r).ln()))
    }

    fn log_ratio_sums(&self, grid: &UniformGrid, theta_ref: f64, events: &[f64]) -> Vec<f64> {
        grid.points().map(|theta| self.log_ratio_sum(theta, theta_ref, events)).collect()
    }
}

/// `λ(θ, t) = A cos²(θt) + B` with `A ≥ 0`, `B > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosSquared {
    pub amplitude: f64,
    pub offset: f64,
}

/// Rotation steps between exact re-evaluations of `cos(θt)` in the grid
/// kernel; bounds the drift of the recurrence.
const RESYNC_STEPS: usize = 64;

impl CosSquared {
    /// Events per product chunk so that a product of intensity ratios can
    /// neither overflow nor underflow before its logarithm is taken.
    fn chunk_len(&self) -> usize {
        let spread = ((self.amplitude + self.offset) / self.offset).ln();
        if spread <= 0.0 {
            return 512;
        }
        ((600.0 / spread) as usize).clamp(8, 512) & !7
    }

    #[inline]
    fn lambda_from_cos(&self, c: f64) -> f64 {
        self.amplitude * c * c + self.offset
    }

    /// Compensated sum of `ln Πᵢ ratio(i)` taken chunk by chunk.
    fn chunked_log_product(&self, ratios: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for chunk in ratios.chunks(self.chunk_len()) {
            acc.add(product(chunk).ln());
        }
        acc.value()
    }
}

#[inline]
fn product(xs: &[f64]) -> f64 {
    let mut p = [1.0f64; 4];
    let mut quads = xs.chunks_exact(4);
    for q in &mut quads {
        p[0] *= q[0];
        p[1] *= q[1];
        p[2] *= q[2];
        p[3] *= q[3];
    }
    for &x in quads.remainder() {
        p[0] *= x;
    }
    (p[0] * p[1]) * (p[2] * p[3])
}

/// Product of `cᵢ αᵢ + βᵢ` over one chunk, where `cᵢ = cos(kxᵢ)` steps to
/// `cos((k+1)xᵢ)` through `cos((k+1)x) = 2 cos(x) cos(kx) − cos((k−1)x)`.
/// `prev` holds `cos((k−1)xᵢ)` and `twice` holds `2 cos(xᵢ)`.
#[inline]
fn step_and_multiply(cur: &mut [f64], prev: &mut [f64], twice: &[f64], alpha: &[f64], beta: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut p = [1.0f64; LANES];
    let mut cq = cur.chunks_exact_mut(LANES);
    let mut pq = prev.chunks_exact_mut(LANES);
    let mut tq = twice.chunks_exact(LANES);
    let mut aq = alpha.chunks_exact(LANES);
    let mut bq = beta.chunks_exact(LANES);
    for ((((c8, p8), t8), a8), b8) in (&mut cq).zip(&mut pq).zip(&mut tq).zip(&mut aq).zip(&mut bq) {
        let c8: &mut [f64; LANES] = c8.try_into().unwrap();
        let p8: &mut [f64; LANES] = p8.try_into().unwrap();
        let t8: &[f64; LANES] = t8.try_into().unwrap();
        let a8: &[f64; LANES] = a8.try_into().unwrap();
        let b8: &[f64; LANES] = b8.try_into().unwrap();
        for l in 0..LANES {
            let c = c8[l];
            p[l] *= c * a8[l] + b8[l];
            c8[l] = t8[l] * c - p8[l];
            p8[l] = c;
        }
    }
    let tail = cq
        .into_remainder()
        .iter_mut()
        .zip(pq.into_remainder())
        .zip(tq.remainder())
        .zip(aq.remainder())
        .zip(bq.remainder());
    for ((((c, pr), &t), &a), &b) in tail {
        let cv = *c;
        p[0] *= cv * a + b;
        *c = t * cv - *pr;
        *pr = cv;
    }
    ((p[0] * p[1]) * (p[2] * p[3])) * ((p[4] * p[5]) * (p[6] * p[7]))
}

impl IntensityFamily for CosSquared {
    fn lambda(&self, theta: f64, t: f64) -> f64 {
        self.lambda_from_cos((theta * t).cos())
    }

    fn dlambda(&self, theta: f64, t: f64) -> f64 {
        -self.amplitude * t * (2.0 * theta * t).sin()
    }

    fn lambda_max(&self, _theta: f64) -> f64 {
        self.amplitude + self.offset
    }

    fn log_ratio_sum(&self, theta: f64, theta_ref: f64, events: &[f64]) -> f64 {
        let ratios: Vec<f64> = events
            .iter()
            .map(|&t| self.lambda_from_cos((theta * t).cos()) / self.lambda_from_cos((theta_ref * t).cos()))
            .collect();
        self.chunked_log_product(&ratios)
    }

    fn log_ratio_sum_against(&self, theta: f64, reference: &[f64], events: &[f64]) -> f64 {
        let ratios: Vec<f64> =
            events.iter().zip(reference).map(|(&t, &r)| self.lambda_from_cos((theta * t).cos()) / r).collect();
        self.chunked_log_product(&ratios)
    }

    /// Walks the grid with the Chebyshev recurrence for `cos(2θt)`, so the
    /// inner loop is multiply-add only.
    fn log_ratio_sums(&self, grid: &UniformGrid, theta_ref: f64, events: &[f64]) -> Vec<f64> {
        let m = events.len();
        if m == 0 {
            return vec![0.0; grid.len];
        }
        // λ(θ, t) = (A/2) cos(2θt) + A/2 + B, divided by λ(θ_ref, t).
        let half = 0.5 * self.amplitude;
        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for &t in events {
            let w = 1.0 / self.lambda_from_cos((theta_ref * t).cos());
            alpha.push(half * w);
            beta.push((half + self.offset) * w);
        }
        let twice: Vec<f64> = events.iter().map(|&t| 2.0 * (2.0 * grid.step * t).cos()).collect();
        let mut cur = vec![0.0; m];
        let mut prev = vec![0.0; m];
        let chunk = self.chunk_len();
        let mut out = Vec::with_capacity(grid.len);
        for k in 0..grid.len {
            if k % RESYNC_STEPS == 0 {
                let theta = grid.at(k);
                for ((c, p), &t) in cur.iter_mut().zip(prev.iter_mut()).zip(events) {
                    *c = (2.0 * theta * t).cos();
                    *p = (2.0 * (theta - grid.step) * t).cos();
                }
            }
            let mut acc = CompensatedSum::new();
            let mut start = 0;
            while start < m {
                let end = (start + chunk).min(m);
                let r = start..end;
                let prod = step_and_multiply(
                    &mut cur[r.clone()],
                    &mut prev[r.clone()],
                    &twice[r.clone()],
                    &alpha[r.clone()],
                    &beta[r],
                );
                acc.add(prod.ln());
                start = end;
            }
            out.push(acc.value());
        }
        out
    }
}

/// `λ(θ, t) = θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linear;

impl IntensityFamily for Linear {
    fn lambda(&self, theta: f64, _t: f64) -> f64 {
        theta
    }

    fn dlambda(&self, _theta: f64, _t: f64) -> f64 {
        1.0
    }

    fn lambda_max(&self, theta: f64) -> f64 {
        theta
    }

    fn log_ratio_sum(&self, theta: f64, theta_ref: f64, events: &[f64]) -> f64 {
        events.len() as f64 * (theta / theta_ref).ln()
    }
}

/// `λ(θ, t) = θ t + c` on `[0, τ]`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPlusSlope {
    pub intercept: f64,
    pub tau: f64,
}

impl IntensityFamily for ConstantPlusSlope {
    fn lambda(&self, theta: f64, t: f64) -> f64 {
        theta * t + self.intercept
    }

    fn dlambda(&self, _theta: f64, t: f64) -> f64 {
        t
    }

    fn lambda_max(&self, theta: f64) -> f64 {
        self.intercept + (theta * self.tau).max(0.0)
    }
}

/// A registered intensity model: a family together with its parameter
/// interval `[θ₁, b)`, observation window `[0, τ]` and declared floor
/// `λ_min`.
#[derive(Clone)]
pub struct IntensityModel {
    name: String,
    theta1: f64,
    b: f64,
    tau: f64,
    lambda_min: f64,
    family: Arc<dyn IntensityFamily>,
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityModel")
            .field("name", &self.name)
            .field("theta1", &self.theta1)
            .field("b", &self.b)
            .field("tau", &self.tau)
            .field("lambda_min", &self.lambda_min)
            .field("family", &self.family)
            .finish()
    }
}

impl IntensityModel {
    /// Validate the geometry and run the `λ_min` / `lambda_max` audit on a
    /// 512×512 grid of `[θ₁, b) × [0, τ]`.
    pub fn new(
        name: impl Into<String>,
        theta1: f64,
        b: f64,
        tau: f64,
        lambda_min: f64,
        family: Arc<dyn IntensityFamily>,
    ) -> Result<Self> {
        let name = name.into();
        if !(theta1.is_finite() && b.is_finite() && theta1 < b) {
            return Err(Error::InvalidModel(format!("{name}: parameter interval [{theta1}, {b}) is empty")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidModel(format!("{name}: observation window τ = {tau} must be positive")));
        }
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidModel(format!("{name}: declared λ_min = {lambda_min} must be positive")));
        }
        let model = IntensityModel { name, theta1, b, tau, lambda_min, family };
        model.audit()?;
        Ok(model)
    }

    fn audit(&self) -> Result<()> {
        let n = AUDIT_RESOLUTION;
        for i in 0..n {
            let theta = self.theta1 + (self.b - self.theta1) * i as f64 / n as f64;
            let bound = self.family.lambda_max(theta);
            for j in 0..n {
                let t = self.tau * j as f64 / (n - 1) as f64;
                let value = self.family.lambda(theta, t);
                if !value.is_finite() || value < self.lambda_min {
                    return Err(Error::InvalidModel(format!(
                        "{}: λ({theta}, {t}) = {value} is below λ_min = {}",
                        self.name, self.lambda_min
                    )));
                }
                if value > bound * (1.0 + 1e-12) {
                    return Err(Error::InvalidModel(format!(
                        "{}: λ({theta}, {t}) = {value} exceeds lambda_max = {bound}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn family(&self) -> &dyn IntensityFamily {
        self.family.as_ref()
    }

    #[inline]
    pub fn lambda(&self, theta: f64, t: f64) -> f64 {
        self.family.lambda(theta, t)
    }

    #[inline]
    pub fn dlambda(&self, theta: f64, t: f64) -> f64 {
        self.family.dlambda(theta, t)
    }

    pub fn lambda_max(&self, theta: f64) -> f64 {
        self.family.lambda_max(theta)
    }

    /// Error unless `θ ∈ [θ₁, b)`.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if theta >= self.theta1 && theta < self.b {
            Ok(())
        } else {
            Err(Error::domain(format!("θ = {theta} is outside [{}, {}) for model {}", self.theta1, self.b, self.name)))
        }
    }
}

/// `Λ(θ, t) = ∫₀ᵗ λ(θ, s) ds`.
pub fn cumulative_intensity(model: &IntensityModel, theta: f64, t: f64) -> Result<f64> {
    model.check_theta(theta)?;
    if !(0.0..=model.tau).contains(&t) {
        return Err(Error::domain(format!("t = {t} is outside [0, {}] for model {}", model.tau, model.name)));
    }
    cumulative_raw(model, theta, t)
}

/// `Λ(θ, t)` without the domain checks; used at the closed right end of
/// integration grids.
pub(crate) fn cumulative_raw(model: &IntensityModel, theta: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    adaptive_simpson(|s| model.lambda(theta, s), 0.0, t, CUMULATIVE_TOL)
}

/// `I(θ) = ∫₀^τ λ̇(θ,t)² / λ(θ,t) dt`.
pub fn fisher_information(model: &IntensityModel, theta: f64) -> Result<f64> {
    fisher_information_tol(model, theta, FISHER_TOL)
}

pub(crate) fn fisher_information_tol(model: &IntensityModel, theta: f64, tol: f64) -> Result<f64> {
    model.check_theta(theta)?;
    let info = adaptive_simpson(
        |t| {
            let d = model.dlambda(theta, t);
            d * d / model.lambda(theta, t)
        },
        0.0,
        model.tau,
        tol,
    )?;
    if info > 0.0 {
        Ok(info)
    } else {
        Err(Error::numeric(format!("Fisher information of {} at θ = {theta} is {info}, not positive", model.name)))
    }
}

/// Normalization of local alternatives `θ = θ₁ + u φₙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalScale {
    pub fisher: f64,
    pub phi_n: f64,
    pub n: usize,
    /// Right end of `𝕌ₙ⁺ = [0, (b − θ₁)/φₙ)`.
    pub u_max: f64,
    pub theta1: f64,
}

impl LocalScale {
    /// Build from a known Fisher information. Useful for fixtures whose
    /// information is degenerate.
    pub fn from_fisher(fisher: f64, n: usize, theta1: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if !(fisher > 0.0 && fisher.is_finite()) {
            return Err(Error::domain(format!("Fisher information {fisher} must be positive")));
        }
        let phi_n = 1.0 / (n as f64 * fisher).sqrt();
        Ok(LocalScale { fisher, phi_n, n, u_max: (b - theta1) / phi_n, theta1 })
    }

    /// `θ₁ + u φₙ`, checking `u ∈ 𝕌ₙ⁺`.
    pub fn theta_at(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        Ok(self.theta1 + u * self.phi_n)
    }

    pub fn check_u(&self, u: f64) -> Result<()> {
        if u >= 0.0 && u < self.u_max {
            Ok(())
        } else {
            Err(Error::domain(format!("u = {u} is outside [0, {}) for n = {}", self.u_max, self.n)))
        }
    }

    /// `(θ − θ₁) / φₙ`.
    pub fn normalize(&self, theta: f64) -> f64 {
        (theta - self.theta1) / self.phi_n
    }
}

pub fn local_scale(model: &IntensityModel, n: usize) -> Result<LocalScale> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let fisher = fisher_information(model, model.theta1)?;
    LocalScale::from_fisher(fisher, n, model.theta1, model.b)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_MODELS: [&str; 3] = ["paper", "linear", "constant-plus-slope"];

/// Registered model by name, optionally with `θ₁` moved inside the default
/// interval.
///
/// - `paper`: `λ = 3cos²(θt) + 1`, `θ ∈ [3, 7)`, `τ = 3`, `λ_min = 1`.
/// - `linear`: `λ = θ`, `θ ∈ [1, 5)`, `τ = 3`, `λ_min = θ₁`.
/// - `constant-plus-slope`: `λ = θt + 1`, `θ ∈ [0.5, 2.5)`, `τ = 3`,
///   `λ_min = 1` (requires `θ₁ ≥ 0`).
pub fn builtin(name: &str, theta1: Option<f64>) -> Result<IntensityModel> {
    let (default_theta1, b, tau) = match name {
        "paper" => (3.0, 7.0, 3.0),
        "linear" => (1.0, 5.0, 3.0),
        "constant-plus-slope" => (0.5, 2.5, 3.0),
        _ => return Err(Error::UnknownModel { name: name.to_string(), known: BUILTIN_MODELS.join(", ") }),
    };
    let theta1 = theta1.unwrap_or(default_theta1);
    match name {
        "paper" => IntensityModel::new(name, theta1, b, tau, 1.0, Arc::new(CosSquared { amplitude: 3.0, offset: 1.0 })),
        "linear" => IntensityModel::new(name, theta1, b, tau, theta1, Arc::new(Linear)),
        _ => IntensityModel::new(name, theta1, b, tau, 1.0, Arc::new(ConstantPlusSlope { intercept: 1.0, tau })),
    }
}

/// The intensity `3cos²(θt) + 1` on `[0, 3]` with `θ ∈ [3, 7)`.
pub fn paper_model() -> IntensityModel {
    builtin("paper", None).expect("built-in model passes its audit")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Constant(f64);

    impl IntensityFamily for Constant {
        fn lambda(&self, _: f64, _: f64) -> f64 {
            self.0
        }
        fn dlambda(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn lambda_max(&self, _: f64) -> f64 {
            self.0
        }
    }

    fn closed_form_paper_cumulative(theta: f64, t: f64) -> f64 {
        2.5 * t + 3.0 / (4.0 * theta) * (2.0 * theta * t).sin()
    }

    #[test]
    fn cumulative_of_constant() {
        let m = IntensityModel::new("c", 0.0, 1.0, 3.0, 0.5, Arc::new(Constant(1.0))).unwrap();
        assert!((cumulative_intensity(&m, 0.5, 3.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(cumulative_intensity(&m, 0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cumulative_of_paper_model_matches_closed_form() {
        let m = paper_model();
        let v = cumulative_intensity(&m, 3.0, 3.0).unwrap();
        assert!((v - closed_form_paper_cumulative(3.0, 3.0)).abs() < 1e-10);
        assert!((v - 7.3122).abs() < 1e-4);
        for &(theta, t) in &[(3.5, 1.0), (6.9, 2.7), (4.2, 0.1)] {
            let v = cumulative_intensity(&m, theta, t).unwrap();
            assert!((v - closed_form_paper_cumulative(theta, t)).abs() < 1e-10);
        }
    }

    #[test]
    fn cumulative_domain_errors() {
        let m = paper_model();
        assert!(matches!(cumulative_intensity(&m, 2.9, 1.0), Err(Error::Domain(_))));
        assert!(matches!(cumulative_intensity(&m, 7.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(cumulative_intensity(&m, 3.0, 3.1), Err(Error::Domain(_))));
        assert!(matches!(cumulative_intensity(&m, 3.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn fisher_of_paper_model() {
        let info = fisher_information(&paper_model(), 3.0).unwrap();
        assert!((info - 19.82).abs() < 0.05, "I(3) = {info}");
    }

    #[test]
    fn fisher_of_linear_model() {
        let m = builtin("linear", Some(2.0)).unwrap();
        assert!((fisher_information(&m, 2.0).unwrap() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn fisher_rejects_degenerate_family() {
        let m = IntensityModel::new("flat", 0.0, 1.0, 3.0, 0.5, Arc::new(Constant(1.0))).unwrap();
        assert!(fisher_information(&m, 0.5).unwrap_err().is_numeric());
        assert!(local_scale(&m, 10).is_err());
    }

    #[test]
    fn fisher_is_stable_under_tolerance_halving() {
        let m = paper_model();
        for &theta in &[3.0, 4.5, 6.5] {
            let a = fisher_information_tol(&m, theta, FISHER_TOL).unwrap();
            let b = fisher_information_tol(&m, theta, FISHER_TOL / 2.0).unwrap();
            assert!((a - b).abs() < FISHER_TOL, "θ = {theta}: {a} vs {b}");
        }
    }

    #[test]
    fn local_scale_of_paper_model() {
        let s = local_scale(&paper_model(), 100).unwrap();
        assert!((s.phi_n - 0.02247).abs() < 5e-5);
        assert!((s.u_max - 178.0).abs() < 0.5);
        assert_eq!(s.phi_n, 1.0 / (100.0 * s.fisher).sqrt());
        assert_eq!(s.u_max, 4.0 / s.phi_n);
        let s4 = local_scale(&paper_model(), 400).unwrap();
        assert_eq!(s4.phi_n, s.phi_n / 2.0);
    }

    #[test]
    fn local_scale_identity() {
        let s = LocalScale::from_fisher(1.0, 1, 0.0, 1.0).unwrap();
        assert_eq!(s.phi_n, 1.0);
        assert!(local_scale(&paper_model(), 0).is_err());
        assert!(s.check_u(1.0).is_err());
        assert_eq!(s.theta_at(0.25).unwrap(), 0.25);
    }

    #[test]
    fn registry_rejects_unknown_names_and_bad_geometry() {
        match builtin("nope", None) {
            Err(Error::UnknownModel { known, .. }) => assert!(known.contains("paper")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(builtin("paper", Some(7.5)).is_err());
        assert!(builtin("linear", Some(0.0)).is_err());
        let flat = Arc::new(Constant(1.0));
        assert!(IntensityModel::new("z", 0.0, 1.0, 0.0, 0.5, flat.clone()).is_err());
        assert!(IntensityModel::new("z", 1.0, 1.0, 1.0, 0.5, flat.clone()).is_err());
        assert!(IntensityModel::new("z", 0.0, 1.0, 1.0, 2.0, flat).is_err());
    }

    #[test]
    fn audit_rejects_understated_bound() {
        #[derive(Debug)]
        struct Liar;
        impl IntensityFamily for Liar {
            fn lambda(&self, _: f64, t: f64) -> f64 {
                1.0 + t
            }
            fn dlambda(&self, _: f64, _: f64) -> f64 {
                0.0
            }
            fn lambda_max(&self, _: f64) -> f64 {
                1.5
            }
        }
        assert!(IntensityModel::new("liar", 0.0, 1.0, 1.0, 1.0, Arc::new(Liar)).is_err());
    }

    #[test]
    fn dlambda_matches_central_differences() {
        for name in BUILTIN_MODELS {
            let m = builtin(name, None).unwrap();
            let width = m.b() - m.theta1();
            for i in 0..20 {
                let theta = m.theta1() + width * (0.05 + 0.9 * i as f64 / 19.0);
                for j in 0..20 {
                    let t = m.tau() * (0.03 + 0.94 * j as f64 / 19.0);
                    let h = 1e-5;
                    let fd = (m.lambda(theta + h, t) - m.lambda(theta - h, t)) / (2.0 * h);
                    let d = m.dlambda(theta, t);
                    assert!((fd - d).abs() <= 1e-5 * d.abs().max(1.0), "{name} at ({theta}, {t}): {d} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn cos_squared_kernels_match_generic_sums() {
        #[derive(Debug)]
        struct Plain(CosSquared);
        impl IntensityFamily for Plain {
            fn lambda(&self, theta: f64, t: f64) -> f64 {
                self.0.lambda(theta, t)
            }
            fn dlambda(&self, theta: f64, t: f64) -> f64 {
                self.0.dlambda(theta, t)
            }
            fn lambda_max(&self, theta: f64) -> f64 {
                self.0.lambda_max(theta)
            }
        }
        let fast = CosSquared { amplitude: 3.0, offset: 1.0 };
        let slow = Plain(fast);
        let events: Vec<f64> = (0..3001).map(|i| 3.0 * ((i as f64 * 0.618_034) % 1.0)).collect();
        let grid = UniformGrid::spanning(3.0, 7.0, 700);
        let a = fast.log_ratio_sums(&grid, 3.0, &events);
        let b = slow.log_ratio_sums(&grid, 3.0, &events);
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            assert!((x - y).abs() < 1e-9, "grid point {k}: {x} vs {y}");
        }
        for &theta in &[3.0, 3.01, 5.5] {
            let x = fast.log_ratio_sum(theta, 3.0, &events);
            let y = slow.log_ratio_sum(theta, 3.0, &events);
            assert!((x - y).abs() < 1e-9);
            let reference: Vec<f64> = events.iter().map(|&t| fast.lambda(3.0, t)).collect();
            let z = fast.log_ratio_sum_against(theta, &reference, &events);
            let w = slow.log_ratio_sum_against(theta, &reference, &events);
            assert!((z - y).abs() < 1e-9 && (w - y).abs() < 1e-9);
        }
        assert_eq!(fast.log_ratio_sum(3.0, 3.0, &events), 0.0);
    }
}
