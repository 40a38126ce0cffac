//! Quadrature and summation primitives shared by the model, likelihood and
//! estimator modules.

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

const MAX_DEPTH: u32 = 48;
/// Panels the interval is split into before adaptive refinement starts.
/// Guards against the early-termination failure of plain adaptive Simpson on
/// oscillatory integrands whose coarse samples happen to agree.
const INITIAL_PANELS: usize = 16;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
///
/// Returns [`Error::Numeric`] if a panel cannot be resolved within the
/// recursion limit or the integrand produces a non-finite value.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if !(tol > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("quadrature over [{a}, {b}] with tolerance {tol}")));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = (hi - lo) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = CompensatedSum::new();
    let mut ok = true;
    for k in 0..INITIAL_PANELS {
        let x0 = lo + width * k as f64;
        let x1 = if k + 1 == INITIAL_PANELS { hi } else { lo + width * (k + 1) as f64 };
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total.add(simpson_step(&f, x0, x1, f0, fm, f1, whole, panel_tol, MAX_DEPTH, &mut ok));
    }
    let value = total.value();
    if !ok {
        return Err(Error::numeric(format!("adaptive Simpson did not converge on [{a}, {b}] at tolerance {tol}")));
    }
    if !value.is_finite() {
        return Err(Error::numeric(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(sign * value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 || !delta.is_finite() {
        *ok = false;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}

/// Composite Simpson weights for `intervals` equal subintervals of width `h`
/// (so `intervals + 1` nodes). `intervals` must be even.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    debug_assert!(intervals >= 2 && intervals.is_multiple_of(2));
    (0..=intervals)
        .map(|k| {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Uniformly spaced abscissae `start + k * step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// `len` points from `start` to `stop` inclusive.
    pub fn spanning(start: f64, stop: f64, len: usize) -> Self {
        assert!(len >= 2, "a uniform grid needs at least two points");
        UniformGrid { start, step: (stop - start) / (len - 1) as f64, len }
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.at(k))
    }
}

/// Maximize a unimodal function on `[a, b]` by golden-section search until
/// the bracket is narrower than `tol`. Returns `(argmax, max, evaluations)`.
pub fn golden_section_max<F>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64, usize)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 >= f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}
