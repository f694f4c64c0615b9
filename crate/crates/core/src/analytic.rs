//! Closed and semi-closed forms: sine-power antiderivatives, the cap chord
//! distribution, the chord-to-distance density transform, and the cap
//! distance density (quadrature and even-dimension closed form).

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{cap_boundary_area, cap_volume, sphere_surface_area, Dimension, SphericalCap};
use crate::stats::{adaptive_quadrature_with_breaks, cumulative_quadrature, EmpiricalCdf};

/// Tolerance for the inner `∫(1 − F_σ)` integrals.
pub const INNER_QUAD_TOL: f64 = 1e-14;

fn check_power(n: i64) -> Result<usize> {
    usize::try_from(n).map_err(|_| Error::domain(format!("sine power must be nonnegative, got {n}")))
}

/// `F_n(t) = ∫_0^t sin^n s ds` by the recurrence
/// `F_n = −cos t sin^{n−1} t / n + (n−1)/n F_{n−2}`. The recurrence cancels
/// badly for small `t`, so on `[0, π/4]` the positive series
/// `Σ_k (1/2)_k / k! · sin^{n+1+2k} t / (n+1+2k)` is summed instead.
pub fn sin_power_antiderivative(n: i64, t: f64) -> Result<f64> {
    let n = check_power(n)?;
    if n >= 2 && (0.0..=FRAC_PI_4).contains(&t) {
        return Ok(sin_power_series(n, t));
    }
    let (s, c) = t.sin_cos();
    let (mut k, mut f) = if n % 2 == 0 { (0, t) } else { (1, 2.0 * (0.5 * t).sin().powi(2)) };
    while k < n {
        k += 2;
        let kf = k as f64;
        f = -c * s.powi(k as i32 - 1) / kf + (kf - 1.0) / kf * f;
    }
    Ok(f)
}

fn sin_power_series(n: usize, t: f64) -> f64 {
    let y = t.sin();
    let y2 = y * y;
    let mut coef = 1.0;
    let mut pow = y.powi(n as i32 + 1);
    let mut sum = 0.0;
    for k in 0..200 {
        let term = coef * pow / (n + 1 + 2 * k) as f64;
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
        coef *= (k as f64 + 0.5) / (k as f64 + 1.0);
        pow *= y2;
    }
    sum
}

/// `∫_0^t s sin^n s ds`, by parts:
/// `M_n = (−t cos t sin^{n−1} t + sin^n t / n + (n−1) M_{n−2}) / n`.
fn moment_sin_power(n: usize, t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    let (mut k, mut m) = if n.is_multiple_of(2) { (0, 0.5 * t * t) } else { (1, s - t * c) };
    while k < n {
        k += 2;
        let kf = k as f64;
        m = (-t * c * s.powi(k as i32 - 1) + s.powi(k as i32) / kf + (kf - 1.0) * m) / kf;
    }
    m
}

/// `G_n(t) = ∫_0^t F_n(s) ds = t F_n(t) − ∫_0^t s sin^n s ds`.
pub fn sin_power_double_antiderivative(n: i64, t: f64) -> Result<f64> {
    let k = check_power(n)?;
    Ok(t * sin_power_antiderivative(n, t)? - moment_sin_power(k, t))
}

/// `n!!` with `(−1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// `I_{2k}(t) = ∫_0^t sec^{2k} s ds`
/// `= (2k−2)!!/(2k−1)!! · tan t · (1 + Σ_{l=1}^{k−1} (2l−1)!!/(2l)!! · sec^{2l} t)`.
pub fn reduction_integral(k: u32, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("reduction_integral needs k >= 1 (I_0(t) = t)"));
    }
    if !(t.abs() < PI / 2.0) || !(t.cos() > 0.0) {
        return Err(Error::domain(format!("reduction_integral diverges at t = {t}")));
    }
    let k = k as i64;
    let sec2 = 1.0 / t.cos().powi(2);
    let mut sum = 1.0;
    let mut sec_pow = 1.0;
    for l in 1..k {
        sec_pow *= sec2;
        sum += double_factorial(2 * l - 1) / double_factorial(2 * l) * sec_pow;
    }
    Ok(double_factorial(2 * k - 2) / double_factorial(2 * k - 1) * t.tan() * sum)
}

/// A survival value with a flag set when the argument was outside `[0, 2r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub clamped: bool,
}

/// `1 − F_σ(s)` for a cap: `(sin ρ(s) / sin r)^{d−2}` with
/// `cos ρ(s) = cos r / cos(s/2)`. A great circle cuts a chord shorter than
/// `s` exactly when it misses the concentric cap of radius `ρ(s)`.
pub fn cap_sigma_survival(cap: &SphericalCap, s: f64) -> Flagged {
    let r = cap.radius();
    if s < 0.0 {
        return Flagged { value: 1.0, clamped: true };
    }
    if s > 2.0 * r {
        return Flagged { value: 0.0, clamped: true };
    }
    if s >= 2.0 * r {
        return Flagged { value: 0.0, clamped: false };
    }
    let q = r.cos() / (0.5 * s).cos();
    let sin_rho = (1.0 - q * q).max(0.0).sqrt();
    let ratio = (sin_rho / r.sin()).min(1.0);
    Flagged { value: ratio.powi(cap.dim().get() as i32 - 2), clamped: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Piecewise linear between table rows.
    Linear,
    /// Right-continuous steps at table rows.
    Step,
}

/// A chord-length distribution function `F_σ`.
#[derive(Clone)]
pub enum SigmaCdf {
    Analytic {
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support_max: f64,
        /// Kinks the quadrature should split at.
        breaks: Vec<f64>,
    },
    Empirical(EmpiricalCdf),
    /// Table rows `(s_i, F_i)`; `F = 0` below the first row and `1` past the last.
    Tabulated { s: Vec<f64>, f: Vec<f64>, interp: Interp },
}

impl std::fmt::Debug for SigmaCdf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigmaCdf::Analytic { support_max, .. } => write!(f, "Analytic {{ support_max: {support_max} }}"),
            SigmaCdf::Empirical(e) => write!(f, "Empirical {{ n: {} }}", e.n()),
            SigmaCdf::Tabulated { s, interp, .. } => write!(f, "Tabulated {{ rows: {}, {interp:?} }}", s.len()),
        }
    }
}

impl SigmaCdf {
    /// Wraps a closed-form CDF; monotonicity is probed on a 2001-point grid.
    pub fn analytic(cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>, support_max: f64, breaks: Vec<f64>) -> Result<Self> {
        if !(support_max > 0.0 && support_max <= PI) {
            return Err(Error::domain(format!("support_max must lie in (0, π], got {support_max}")));
        }
        let mut prev = cdf(0.0);
        for i in 1..=2000 {
            let s = support_max * i as f64 / 2000.0;
            let v = cdf(s);
            if !(v >= prev - 1e-12) || !(0.0..=1.0 + 1e-12).contains(&v) {
                return Err(Error::domain(format!("analytic sigma CDF is not monotone in [0,1] near s = {s}")));
            }
            prev = v;
        }
        if (cdf(support_max) - 1.0).abs() > 1e-9 {
            return Err(Error::domain("analytic sigma CDF does not reach 1 at support_max"));
        }
        Ok(SigmaCdf::Analytic { cdf, support_max, breaks })
    }

    /// The exact chord CDF of a cap.
    pub fn cap(cap: &SphericalCap) -> Self {
        let c = cap.clone();
        let support = 2.0 * cap.radius();
        SigmaCdf::Analytic {
            cdf: Arc::new(move |s| 1.0 - cap_sigma_survival(&c, s).value),
            support_max: support,
            breaks: vec![support],
        }
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        let e = EmpiricalCdf::new(samples)?;
        if e.min() < 0.0 {
            return Err(Error::domain("chord lengths must be nonnegative"));
        }
        Ok(SigmaCdf::Empirical(e))
    }

    /// Validates table rows; the error names the first offending row (0-based).
    pub fn tabulated(s: Vec<f64>, f: Vec<f64>, interp: Interp) -> Result<Self> {
        if s.is_empty() || s.len() != f.len() {
            return Err(Error::domain("sigma CDF table is empty or ragged"));
        }
        for i in 0..s.len() {
            let ok_value = f[i].is_finite() && (-1e-12..=1.0 + 1e-12).contains(&f[i]);
            let ok_order = i == 0 || (s[i] > s[i - 1] && f[i] >= f[i - 1]);
            if !ok_value || !ok_order || !s[i].is_finite() || s[i] < 0.0 {
                return Err(Error::domain(format!("sigma CDF table is not monotone at row {i}")));
            }
        }
        if (f[f.len() - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "sigma CDF table must end at 1, last row {} has {}",
                f.len() - 1,
                f[f.len() - 1]
            )));
        }
        Ok(SigmaCdf::Tabulated { s, f, interp })
    }

    pub fn support_max(&self) -> f64 {
        match self {
            SigmaCdf::Analytic { support_max, .. } => *support_max,
            SigmaCdf::Empirical(e) => e.max(),
            SigmaCdf::Tabulated { s, .. } => s[s.len() - 1],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SigmaCdf::Analytic { cdf, .. } => cdf(x),
            SigmaCdf::Empirical(e) => e.eval(x),
            SigmaCdf::Tabulated { s, f, interp } => {
                if x < s[0] {
                    return 0.0;
                }
                let i = s.partition_point(|&v| v <= x) - 1;
                if i + 1 == s.len() {
                    return f[i];
                }
                match interp {
                    Interp::Step => f[i],
                    Interp::Linear => f[i] + (f[i + 1] - f[i]) * (x - s[i]) / (s[i + 1] - s[i]),
                }
            }
        }
    }

    /// For each grid point `t`: `S(t) = ∫_0^t (1 − F_σ)` and
    /// `W(t) = ∫_0^t F_n(s)(1 − F_σ(s)) ds` with `F_n` the sine-power
    /// antiderivative of order `power`.
    fn survival_integrals(&self, grid: &[f64], power: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let fpow = |x: f64| sin_power_antiderivative(power as i64, x).expect("power >= 0");
        let gpow = |x: f64| sin_power_double_antiderivative(power as i64, x).expect("power >= 0");
        match self {
            SigmaCdf::Analytic { cdf, breaks, .. } => {
                let mut full_grid = Vec::with_capacity(grid.len() + 1);
                let prepend = grid.first().is_none_or(|&g| g > 0.0);
                if prepend {
                    full_grid.push(0.0);
                }
                full_grid.extend_from_slice(grid);
                let s = cumulative_quadrature(|x| 1.0 - cdf(x), &full_grid, breaks, INNER_QUAD_TOL)?;
                let w = cumulative_quadrature(|x| fpow(x) * (1.0 - cdf(x)), &full_grid, breaks, INNER_QUAD_TOL)?;
                let skip = usize::from(prepend);
                Ok((s[skip..].to_vec(), w[skip..].to_vec()))
            }
            SigmaCdf::Empirical(e) => {
                // ∫_0^t 1{X > s} h(s) ds = H(min(X, t)) for H' = h, H(0) = 0.
                let xs = e.sorted_samples();
                let n = xs.len() as f64;
                let mut prefix_g = Vec::with_capacity(xs.len() + 1);
                let mut acc = 0.0;
                prefix_g.push(0.0);
                for &x in xs {
                    acc += gpow(x);
                    prefix_g.push(acc);
                }
                let mut s = Vec::with_capacity(grid.len());
                let mut w = Vec::with_capacity(grid.len());
                for &t in grid {
                    let t = t.max(0.0);
                    let k = xs.partition_point(|&x| x <= t);
                    s.push(e.integrated_survival(t));
                    w.push((prefix_g[k] + (xs.len() - k) as f64 * gpow(t)) / n);
                }
                Ok((s, w))
            }
            SigmaCdf::Tabulated { s: rows, .. } => {
                let mut breaks = rows.clone();
                breaks.push(0.0);
                let mut full_grid = Vec::with_capacity(grid.len() + 1);
                let prepend = grid.first().is_none_or(|&g| g > 0.0);
                if prepend {
                    full_grid.push(0.0);
                }
                full_grid.extend_from_slice(grid);
                // Breaks only matter inside each grid cell; restrict per cell for speed.
                let mut s_out = vec![0.0];
                let mut w_out = vec![0.0];
                for cell in full_grid.windows(2) {
                    let lo = rows.partition_point(|&v| v <= cell[0]);
                    let hi = rows.partition_point(|&v| v < cell[1]);
                    let local = &rows[lo..hi];
                    let ds = adaptive_quadrature_with_breaks(|x| 1.0 - self.eval(x), cell[0], cell[1], local, INNER_QUAD_TOL)?;
                    let dw = adaptive_quadrature_with_breaks(
                        |x| fpow(x) * (1.0 - self.eval(x)),
                        cell[0],
                        cell[1],
                        local,
                        INNER_QUAD_TOL,
                    )?;
                    s_out.push(s_out[s_out.len() - 1] + ds.value);
                    w_out.push(w_out[w_out.len() - 1] + dw.value);
                }
                let skip = usize::from(prepend);
                Ok((s_out[skip..].to_vec(), w_out[skip..].to_vec()))
            }
        }
    }
}

/// A density sampled on a grid, with its distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    pub dim: Dimension,
    pub body: String,
    pub provenance: String,
    /// First grid point where the bracket went negative and was clamped to 0.
    pub clamped_from: Option<f64>,
}

impl DensityCurve {
    /// Trapezoidal integral of the sampled density.
    pub fn trapezoid_mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
            .sum()
    }

    /// Distribution function by linear interpolation of the `cdf` column.
    pub fn cdf_at(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return self.cdf[0];
        }
        if t >= g[g.len() - 1] {
            return self.cdf[g.len() - 1];
        }
        let i = g.partition_point(|&x| x <= t) - 1;
        let w = (t - g[i]) / (g[i + 1] - g[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// Evenly spaced grid with `points` points on `[a, b]`.
pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..points)
            .map(|i| if i + 1 == points { b } else { a + (b - a) * i as f64 / (points - 1) as f64 })
            .collect(),
    }
}

/// Distance density from the chord distribution:
///
/// `f_Δ(t) = sin^{d−2} t / |K| · (ω_{d−1} − (ω_d/2π)(|∂K|/|K|) ∫_0^t (1 − F_σ))`.
///
/// The CDF column uses `F_Δ(t) = A F_n(t) − B (F_n(t) S(t) − W(t))`, which is
/// the same expression integrated by parts, so no outer quadrature is needed.
pub fn delta_density_from_sigma(
    sigma: &SigmaCdf,
    volume: f64,
    boundary_area: f64,
    d: Dimension,
    grid: &[f64],
) -> Result<DensityCurve> {
    if !(volume > 0.0) || !(boundary_area > 0.0) {
        return Err(Error::domain(format!(
            "volume and boundary area must be positive (got {volume}, {boundary_area})"
        )));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("grid must be finite, nonnegative and strictly increasing"));
    }
    let dd = d.get();
    let power = dd - 2;
    let a = sphere_surface_area(dd - 1)? / volume;
    let b = sphere_surface_area(dd)? / TAU * boundary_area / (volume * volume);
    let (s, w) = sigma.survival_integrals(grid, power)?;

    let mut density = Vec::with_capacity(grid.len());
    let mut closed = Vec::with_capacity(grid.len());
    let mut clamped = Vec::with_capacity(grid.len());
    let mut clamped_from = None;
    for (i, &t) in grid.iter().enumerate() {
        let bracket = a - b * s[i];
        let sp = t.sin().powi(power as i32);
        let fp = sin_power_antiderivative(power as i64, t)?;
        closed.push(a * fp - b * (fp * s[i] - w[i]));
        if bracket < 0.0 {
            // Rounding-level negatives at the end of the support are not flagged.
            let real = bracket < -1e-12 * a;
            clamped.push(real);
            if real && clamped_from.is_none() {
                clamped_from = Some(t);
                log::warn!("density bracket negative ({bracket:e}) from t = {t}; clamped to 0");
            }
            density.push(0.0);
        } else {
            clamped.push(false);
            density.push(sp * bracket);
        }
    }
    let mut cdf = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let v = if i == 0 {
            closed[0]
        } else if clamped[i] || clamped[i - 1] {
            cdf[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1])
        } else {
            cdf[i - 1] + closed[i] - closed[i - 1]
        };
        cdf.push(v);
    }
    Ok(DensityCurve {
        grid: grid.to_vec(),
        density,
        cdf,
        dim: d,
        body: String::new(),
        provenance: match sigma {
            SigmaCdf::Analytic { .. } => "transform(analytic sigma cdf)".into(),
            SigmaCdf::Empirical(e) => format!("transform(empirical sigma cdf, n={})", e.n()),
            SigmaCdf::Tabulated { s, .. } => format!("transform(tabulated sigma cdf, rows={})", s.len()),
        },
        clamped_from,
    })
}

/// `(1 − cos²r / cos²(s/2))_+^{(d−2)/2}`, the scaled boundary of the inner cap.
fn cap_inner_integrand(cap: &SphericalCap, s: f64) -> f64 {
    let q = cap.radius().cos() / (0.5 * s).cos();
    let base = (1.0 - q * q).max(0.0);
    let d = cap.dim().get();
    if d.is_multiple_of(2) {
        base.powi((d as i32 - 2) / 2)
    } else {
        base.sqrt().powi(d as i32 - 2)
    }
}

/// Distance density for two uniform points in a cap:
///
/// `f_Δ(t) = ω_{d−1} sin^{d−2} t / |K| · (1 − ω_d/(2π|K|) ∫_0^t (1 − cos²r/cos²(s/2))_+^{(d−2)/2} ds)`,
/// zero outside `[0, 2r]`. The inner tolerance is taken relative to
/// `2π|K|/ω_d`, the inner value at which the bracket vanishes, since small
/// caps amplify inner errors by `ω_d/(2π|K|)`.
pub fn cap_delta_density(cap: &SphericalCap, t: f64) -> f64 {
    let r2 = 2.0 * cap.radius();
    if !(t >= 0.0 && t <= r2) {
        return 0.0;
    }
    let d = cap.dim().get();
    let scale = (TAU * cap_volume(cap) / sphere_surface_area(d).expect("d >= 3")).min(1.0);
    let inner = adaptive_quadrature_with_breaks(|s| cap_inner_integrand(cap, s), 0.0, t, &[], INNER_QUAD_TOL * scale)
        .map(|q| q.value)
        .unwrap_or_else(|e| match e {
            Error::Quadrature { estimate, .. } => estimate,
            _ => unreachable!("bounds are valid"),
        });
    cap_density_from_inner(cap, t, inner)
}

fn cap_density_from_inner(cap: &SphericalCap, t: f64, inner: f64) -> f64 {
    let d = cap.dim().get();
    let vol = cap_volume(cap);
    let w1 = sphere_surface_area(d - 1).expect("d >= 3");
    let w = sphere_surface_area(d).expect("d >= 3");
    let bracket = 1.0 - w / (TAU * vol) * inner;
    (w1 * t.sin().powi(d as i32 - 2) / vol * bracket).max(0.0)
}

/// Unevaluated sum `hi + lo` carrying about 32 significant digits.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Dd) -> Self {
        let s = self.hi + o.hi;
        let v = s - self.hi;
        let e = (self.hi - (s - v)) + (o.hi - v);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    fn mul(self, o: Dd) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    /// Exact integer ratio `p / q` to double-double precision.
    fn ratio(p: f64, q: f64) -> Self {
        let q1 = p / q;
        let r = (-q1).mul_add(q, p);
        Dd::renorm(q1, r / q)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Even-dimension closed form `d = 2m + 2`: expanding
/// `(1 − c² sec²(s/2))^m` binomially, the `j = 0` term integrates to `t` and
/// each `j ≥ 1` term to `2 I_{2j}(t/2)`. The alternating sum cancels to a
/// small value, so it is accumulated in double-double arithmetic.
pub fn even_dim_cap_delta_density(cap: &SphericalCap, t: f64) -> Result<f64> {
    let d = cap.dim().get();
    if !d.is_multiple_of(2) {
        return Err(Error::domain(format!("even-dimension closed form needs even d, got {d}")));
    }
    let r2 = 2.0 * cap.radius();
    if !(t >= 0.0 && t <= r2) {
        return Ok(0.0);
    }
    let m = (d - 2) / 2;
    let c = cap.radius().cos();
    let neg_c2 = Dd::new(-c).mul(Dd::new(c));
    let tan = Dd::new((0.5 * t).tan());
    let sec2 = Dd::new(1.0).add(tan.mul(tan));
    let mut inner = Dd::new(t);
    let mut c_pow = Dd::new(1.0);
    // Σ_{l<j} (2l−1)!!/(2l)!! sec^{2l} and (2j−2)!!/(2j−1)!!, updated in j.
    let mut series = Dd::new(0.0);
    let mut term = Dd::new(1.0);
    let (mut odd, mut even) = (1.0, 1.0);
    for j in 1..=m {
        series = series.add(term);
        c_pow = c_pow.mul(neg_c2);
        let binom = Dd::new(binomial(m, j));
        let i2j = Dd::ratio(even, odd).mul(tan).mul(series);
        inner = inner.add(binom.mul(c_pow).mul(i2j).mul(Dd::new(2.0)));
        let l = j as f64;
        term = term.mul(sec2).mul(Dd::ratio(2.0 * l - 1.0, 2.0 * l));
        even *= 2.0 * l;
        odd *= 2.0 * l + 1.0;
    }
    Ok(cap_density_from_inner(cap, t, inner.value()))
}

fn binomial(m: usize, j: usize) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * (m - j + i) as f64 / i as f64).round()
}

/// `F_Δ` for a cap at the given grid points, from the exact cap survival
/// and the integrated-by-parts transform.
pub fn cap_delta_curve(cap: &SphericalCap, grid: &[f64]) -> Result<DensityCurve> {
    let mut curve = delta_density_from_sigma(&SigmaCdf::cap(cap), cap_volume(cap), cap_boundary_area(cap), cap.dim(), grid)?;
    curve.density = grid.iter().map(|&t| cap_delta_density(cap, t)).collect();
    curve.body = format!("cap(d={}, r={})", cap.dim(), cap.radius());
    curve.provenance = "cap closed form".into();
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::adaptive_quadrature;
    use approx::assert_abs_diff_eq;

    fn cap(d: usize, r: f64) -> SphericalCap {
        SphericalCap::at_pole(Dimension::new(d).unwrap(), r).unwrap()
    }

    #[test]
    fn antiderivative_examples() {
        assert_abs_diff_eq!(sin_power_antiderivative(0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(sin_power_antiderivative(1, PI).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sin_power_antiderivative(2, PI / 2.0).unwrap(), PI / 4.0, epsilon = 1e-15);
        assert!(sin_power_antiderivative(-1, 1.0).is_err());
        assert!(sin_power_double_antiderivative(-2, 1.0).is_err());
    }

    #[test]
    fn double_antiderivative_examples() {
        assert_abs_diff_eq!(sin_power_double_antiderivative(0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sin_power_double_antiderivative(1, PI).unwrap(), PI, epsilon = 1e-14);
        // Two independent routes for G_2(π): nested quadrature of sin², and
        // the closed form t²/4 + (cos 2t − 1)/8 = π²/4.
        let outer = adaptive_quadrature(
            |x| adaptive_quadrature(|s: f64| s.sin().powi(2), 0.0, x, 1e-14).unwrap().value,
            0.0,
            PI,
            1e-12,
        )
        .unwrap();
        let g2 = sin_power_double_antiderivative(2, PI).unwrap();
        assert_abs_diff_eq!(g2, outer.value, epsilon = 1e-10);
        assert_abs_diff_eq!(g2, PI * PI / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for n in 0..=12i64 {
            for &t in &[0.1, 0.7, 1.5, 2.3, PI] {
                let q = adaptive_quadrature(|s: f64| s.sin().powi(n as i32), 0.0, t, 1e-14).unwrap();
                assert_abs_diff_eq!(sin_power_antiderivative(n, t).unwrap(), q.value, epsilon = 1e-12);
                let q = adaptive_quadrature(|s: f64| s * s.sin().powi(n as i32), 0.0, t, 1e-14).unwrap();
                let g = t * sin_power_antiderivative(n, t).unwrap() - q.value;
                assert_abs_diff_eq!(sin_power_double_antiderivative(n, t).unwrap(), g, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn finite_difference_derivatives() {
        let h = 1e-5;
        for n in 0..=10i64 {
            let mut max_f: f64 = 0.0;
            let mut max_g: f64 = 0.0;
            for i in 0..1000 {
                let t = PI * (i as f64 + 0.5) / 1000.0;
                let df = (sin_power_antiderivative(n, t + h).unwrap() - sin_power_antiderivative(n, t - h).unwrap()) / (2.0 * h);
                max_f = max_f.max((df - t.sin().powi(n as i32)).abs());
                let dg = (sin_power_double_antiderivative(n, t + h).unwrap()
                    - sin_power_double_antiderivative(n, t - h).unwrap())
                    / (2.0 * h);
                max_g = max_g.max((dg - sin_power_antiderivative(n, t).unwrap()).abs());
            }
            assert!(max_f <= 1e-6 && max_g <= 1e-6, "n={n}: {max_f:e} {max_g:e}");
        }
    }

    #[test]
    fn double_factorial_conventions() {
        assert_eq!(double_factorial(-1), 1.0);
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(5), 15.0);
        assert_eq!(double_factorial(6), 48.0);
    }

    #[test]
    fn reduction_integral_examples() {
        assert_abs_diff_eq!(reduction_integral(1, PI / 4.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(reduction_integral(2, PI / 4.0).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(reduction_integral(1, 0.0).unwrap(), 0.0);
        assert!(reduction_integral(1, PI / 2.0).is_err());
        assert!(reduction_integral(0, 0.3).is_err());
    }

    #[test]
    fn reduction_integral_matches_quadrature() {
        for k in 1..=6u32 {
            for i in 1..=14 {
                let t = 0.1 * i as f64;
                let v = reduction_integral(k, t).unwrap();
                let q = adaptive_quadrature(|s: f64| s.cos().powi(-2 * k as i32), 0.0, t, 1e-13 * v.max(1.0)).unwrap();
                assert!((v - q.value).abs() <= 1e-10 * v.max(1.0), "k={k} t={t}: {v} vs {}", q.value);
            }
        }
    }

    #[test]
    fn cap_survival_examples() {
        let c = cap(3, PI / 3.0);
        assert_eq!(cap_sigma_survival(&c, 0.0).value, 1.0);
        assert_eq!(cap_sigma_survival(&c, 2.0 * PI / 3.0).value, 0.0);
        assert_abs_diff_eq!(cap_sigma_survival(&c, PI / 3.0).value, 2.0 * 2f64.sqrt() / 3.0, epsilon = 1e-15);
        let below = cap_sigma_survival(&c, -0.1);
        assert!(below.clamped && below.value == 1.0);
        let above = cap_sigma_survival(&c, 3.0);
        assert!(above.clamped && above.value == 0.0);
    }

    #[test]
    fn cap_survival_is_monotone_with_exact_endpoints() {
        for d in 3..=8 {
            for &r in &[0.2, 0.8, 1.4] {
                let c = cap(d, r);
                assert!((cap_sigma_survival(&c, 0.0).value - 1.0).abs() <= 1e-12);
                assert!(cap_sigma_survival(&c, 2.0 * r).value.abs() <= 1e-12);
                let mut prev = 1.0;
                for i in 0..=500 {
                    let v = cap_sigma_survival(&c, 2.0 * r * i as f64 / 500.0).value;
                    assert!(v <= prev + 1e-15);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn density_vanishes_at_zero_and_outside_support() {
        for d in [3, 4, 5] {
            let c = cap(d, 0.7);
            assert_eq!(cap_delta_density(&c, 0.0), 0.0);
            assert_eq!(cap_delta_density(&c, 1.5), 0.0);
            let curve = delta_density_from_sigma(&SigmaCdf::cap(&c), cap_volume(&c), cap_boundary_area(&c), c.dim(), &[0.0, 0.5]).unwrap();
            assert_eq!(curve.density[0], 0.0);
        }
    }

    #[test]
    fn transform_matches_cap_formula_at_half() {
        let c = cap(3, PI / 3.0);
        let curve =
            delta_density_from_sigma(&SigmaCdf::cap(&c), cap_volume(&c), cap_boundary_area(&c), c.dim(), &[0.5]).unwrap();
        assert_abs_diff_eq!(curve.density[0], cap_delta_density(&c, 0.5), epsilon = 1e-9);
    }

    #[test]
    fn cap_density_normalizes() {
        for d in [3, 4, 5] {
            for &r in &[0.3, 0.7, 1.2] {
                let c = cap(d, r);
                let q = adaptive_quadrature_with_breaks(|t| cap_delta_density(&c, t), 0.0, 2.0 * r, &[], 1e-9).unwrap();
                assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn four_dim_hand_integration() {
        let c = cap(4, 0.8);
        let c2 = 0.8f64.cos().powi(2);
        let vol = cap_volume(&c);
        for &t in &[0.2f64, 0.9, 1.5] {
            let inner = t - 2.0 * c2 * (t / 2.0).tan();
            let q = adaptive_quadrature(|s: f64| 1.0 - c2 / (s / 2.0).cos().powi(2), 0.0, t, 1e-14).unwrap();
            assert_abs_diff_eq!(inner, q.value, epsilon = 1e-12);
            let w3 = 4.0 * PI;
            let w4 = 2.0 * PI * PI;
            let f = w3 * t.sin().powi(2) / vol * (1.0 - w4 / (TAU * vol) * inner);
            assert_abs_diff_eq!(even_dim_cap_delta_density(&c, t).unwrap(), f, epsilon = 1e-12);
        }
    }

    #[test]
    fn even_closed_form_examples() {
        let c = cap(6, 0.7);
        assert_eq!(even_dim_cap_delta_density(&c, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(even_dim_cap_delta_density(&c, 0.9).unwrap(), cap_delta_density(&c, 0.9), epsilon = 1e-9);
        assert!(even_dim_cap_delta_density(&cap(5, 0.7), 0.3).is_err());
    }

    #[test]
    fn tabulated_validation_reports_row() {
        let err = SigmaCdf::tabulated(vec![0.0, 0.5, 1.0], vec![0.0, 0.6, 0.4], Interp::Linear).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        assert!(SigmaCdf::tabulated(vec![], vec![], Interp::Linear).is_err());
        assert!(SigmaCdf::tabulated(vec![0.0, 1.0], vec![0.0, 0.9], Interp::Linear).is_err());
    }

    #[test]
    fn point_mass_sigma_gives_piecewise_bracket() {
        // σ ≡ s0: ∫_0^t (1 − F_σ) = min(t, s0), so the bracket decreases
        // linearly until s0 and is flat afterwards.
        let s0 = 0.6;
        let sigma = SigmaCdf::tabulated(vec![s0], vec![1.0], Interp::Step).unwrap();
        let d = Dimension::new(3).unwrap();
        let grid = linspace(0.0, 1.2, 61);
        let (s, _) = sigma.survival_integrals(&grid, 1).unwrap();
        for (t, v) in grid.iter().zip(&s) {
            assert_abs_diff_eq!(*v, t.min(s0), epsilon = 1e-12);
        }
        let curve = delta_density_from_sigma(&sigma, 1.0, 1.0, d, &grid).unwrap();
        let brackets: Vec<f64> = curve
            .grid
            .iter()
            .zip(&curve.density)
            .skip(1)
            .map(|(t, f)| f / t.sin())
            .collect();
        assert!(brackets.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn empirical_and_analytic_integrals_agree_for_many_samples() {
        // Stratified quantile sample of the cap chord law.
        let c = cap(4, 0.8);
        let sigma = SigmaCdf::cap(&c);
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (0.0, 1.6);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if sigma.eval(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let emp = SigmaCdf::empirical(samples).unwrap();
        let grid = linspace(0.0, 1.6, 17);
        let (sa, wa) = sigma.survival_integrals(&grid, 2).unwrap();
        let (se, we) = emp.survival_integrals(&grid, 2).unwrap();
        for i in 0..grid.len() {
            assert_abs_diff_eq!(sa[i], se[i], epsilon = 1e-4);
            assert_abs_diff_eq!(wa[i], we[i], epsilon = 1e-4);
        }
    }

    #[test]
    fn curve_cdf_matches_density_quadrature() {
        let c = cap(5, 0.7);
        let grid = linspace(0.0, 1.4, 29);
        let curve = cap_delta_curve(&c, &grid).unwrap();
        for (t, f) in grid.iter().zip(&curve.cdf) {
            let q = adaptive_quadrature(|x| cap_delta_density(&c, x), 0.0, *t, 1e-11).unwrap();
            assert_abs_diff_eq!(*f, q.value, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(curve.cdf[grid.len() - 1], 1.0, epsilon = 1e-9);
        assert!(curve.clamped_from.is_none() || curve.clamped_from.unwrap() >= 1.4 - 1e-9);
    }
}
