//! Quadrature, empirical distribution functions and Kolmogorov–Smirnov
//! distances, plus the JSON report type emitted by the verification suite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 50;
const MIN_DEPTH: u32 = 3;
/// Total function evaluations before every open interval is accepted as is.
const MAX_EVALS: usize = 4_000_000;

/// Result of an adaptive quadrature: the value and the accumulated
/// Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

struct Accumulator {
    value: f64,
    error: f64,
    hit_max_depth: bool,
    evals: usize,
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
    acc: &mut Accumulator,
) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    acc.evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;

    // Below the roundoff floor further halving cannot improve the estimate.
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    let converged = depth >= MIN_DEPTH && delta.abs() <= (15.0 * tol).max(floor);
    // Interval no longer splittable in floating point, or budget spent.
    let exhausted = depth >= MAX_DEPTH || acc.evals >= MAX_EVALS || lm <= a || rm >= b || m <= lm || m >= rm;
    if converged || exhausted {
        acc.value += left + right + delta / 15.0;
        acc.error += delta.abs() / 15.0;
        if !converged {
            acc.hit_max_depth = true;
        }
        return;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, acc);
    simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, acc);
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute error target `tol`.
///
/// Intervals that reach the maximum recursion depth or the evaluation budget
/// are accepted with their Richardson-corrected estimate; an error is
/// returned only if the total error estimate then exceeds `tol`.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a <= b) {
        return Err(Error::domain(format!("quadrature bounds out of order: [{a}, {b}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let mut acc = Accumulator { value: 0.0, error: 0.0, hit_max_depth: false, evals: 3 };
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 0, &mut acc);
    if acc.hit_max_depth && acc.error > tol {
        return Err(Error::Quadrature { estimate: acc.value, error: acc.error });
    }
    Ok(Quadrature { value: acc.value, error: acc.error })
}

/// Like [`adaptive_quadrature`] but splits `[a, b]` at every breakpoint that
/// falls strictly inside it (kinks, support endpoints). The tolerance is
/// distributed in proportion to piece length. Each piece is integrated in
/// `u` with `x = lo + (hi − lo)(3u² − 2u³)`, so square-root behaviour at a
/// piece end becomes smooth.
pub fn adaptive_quadrature_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<Quadrature> {
    if !(a <= b) {
        return Err(Error::domain(format!("quadrature bounds out of order: [{a}, {b}]")));
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    let width = b - a;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let share = if width > 0.0 { tol * (hi - lo) / width } else { tol };
        let h = hi - lo;
        let g = |u: f64| {
            let x = (lo + h * u * u * (3.0 - 2.0 * u)).clamp(lo, hi);
            let jac = 6.0 * h * u * (1.0 - u);
            if jac == 0.0 {
                0.0
            } else {
                f(x) * jac
            }
        };
        let piece = adaptive_quadrature(g, 0.0, 1.0, share.max(f64::MIN_POSITIVE))?;
        total.value += piece.value;
        total.error += piece.error;
        lo = hi;
    }
    Ok(total)
}

/// Running integral of `f` over an increasing grid: element `i` is
/// `∫_{grid[0]}^{grid[i]} f`. Each grid cell is integrated separately
/// (with `breaks` honoured) and the cells are summed.
pub fn cumulative_quadrature<F: Fn(f64) -> f64>(
    f: F,
    grid: &[f64],
    breaks: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    if grid.is_empty() {
        return Ok(out);
    }
    let span = grid[grid.len() - 1] - grid[0];
    let mut running = 0.0;
    out.push(0.0);
    for w in grid.windows(2) {
        if w[1] < w[0] {
            return Err(Error::domain("cumulative quadrature grid must be nondecreasing"));
        }
        let share = if span > 0.0 { tol * (w[1] - w[0]) / span } else { tol };
        running += adaptive_quadrature_with_breaks(&f, w[0], w[1], breaks, share.max(1e-300))?.value;
        out.push(running);
    }
    Ok(out)
}

/// Right-continuous empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    /// `prefix[i]` = sum of the `i` smallest samples.
    prefix: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("empirical CDF of an empty sample"));
        }
        if let Some(bad) = samples.iter().find(|x| x.is_nan()) {
            return Err(Error::domain(format!("empirical CDF sample is not a number: {bad}")));
        }
        samples.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &x in &samples {
            acc += x;
            prefix.push(acc);
        }
        Ok(Self { sorted: samples, prefix })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.n() as f64
    }

    /// Exact `∫_0^t (1 − F_n(s)) ds = (1/n) Σ min(X_i, t)` for nonnegative samples.
    pub fn integrated_survival(&self, t: f64) -> f64 {
        let k = self.sorted.partition_point(|&s| s <= t);
        let n = self.n();
        (self.prefix[k] + (n - k) as f64 * t) / n as f64
    }
}

/// Convenience constructor mirroring the operation name.
pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples.to_vec())
}

/// One-sample KS distance `sup_x |F_n(x) − F(x)|`, evaluated at every
/// distinct sample value from both sides.
pub fn ks_statistic<F: Fn(f64) -> f64>(ecdf: &EmpiricalCdf, cdf: F) -> f64 {
    let xs = ecdf.sorted_samples();
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((at - cdf(x)).abs()).max((below - cdf(x.next_down())).abs());
        i = j;
    }
    d
}

/// Two-sample KS distance `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xa, xb) = (a.sorted_samples(), b.sorted_samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 95% one-sample KS critical value, `1.36/√n`.
pub fn ks_critical_95(n: usize) -> f64 {
    1.36 / (n as f64).sqrt()
}

/// Outcome of one verification check, serialized as a single JSON object
/// with the fixed field set `name, params, stats, thresholds, pass, n, seed, ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub stats: BTreeMap<String, f64>,
    /// Upper bounds for the stats of the same name.
    pub thresholds: BTreeMap<String, f64>,
    pub pass: bool,
    pub n: u64,
    pub seed: u64,
    /// Wall time; `None` unless timing was requested, so reports stay byte-reproducible.
    pub ms: Option<u64>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, n: u64, seed: u64) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            stats: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            pass: true,
            n,
            seed,
            ms: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Informational statistic, not checked against a threshold.
    pub fn stat(&mut self, key: &str, value: f64) {
        self.stats.insert(key.to_string(), value);
    }

    /// Checked statistic: the report passes only if `value <= threshold`.
    pub fn check(&mut self, key: &str, value: f64, threshold: f64) {
        self.stats.insert(key.to_string(), value);
        self.thresholds.insert(key.to_string(), threshold);
        self.pass = self.recompute_pass();
    }

    fn recompute_pass(&self) -> bool {
        self.thresholds
            .iter()
            .all(|(k, &thr)| self.stats.get(k).is_some_and(|&v| v <= thr))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization cannot fail")
    }
}
