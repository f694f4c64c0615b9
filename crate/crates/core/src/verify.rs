//! Monte Carlo checks of the integral-geometric identities, each producing a
//! [`VerificationReport`].

use std::f64::consts::TAU;
use std::time::Instant;

use serde_json::json;

use crate::analytic::{
    cap_delta_curve, cap_sigma_survival, delta_density_from_sigma, linspace, sin_power_double_antiderivative, SigmaCdf,
    INNER_QUAD_TOL,
};
use crate::error::{Error, Result};
use crate::geometry::{bp_constant, sphere_surface_area, Body, ConvexSphericalBody, Dimension, SphericalCap};
use crate::mc::{body_measures_mc, boundary_by_facets, delta_samples, derive_seed, plane_sweep, sigma_samples, volume_mc, Execution};
use crate::stats::{ks_critical_95, ks_statistic, EmpiricalCdf, VerificationReport};

/// Statistical slack applied to the asymptotic 95% KS critical value.
pub const KS_SLACK: f64 = 1.5;
/// Standard errors allowed for mean/proportion comparisons.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Relative tolerance floor for the Blaschke–Petkantschin check.
pub const BP_REL_TOL: f64 = 0.01;
/// KS bound for the end-to-end pipeline when |K| and |∂K| are themselves estimated.
pub const GENERAL_BODY_KS_TOL: f64 = 0.02;

fn base_report(name: &str, body: &Body, n: usize, seed: u64, exec: Execution) -> VerificationReport {
    let mut r = VerificationReport::new(name, n as u64, seed)
        .param("body", body.describe())
        .param("d", body.dim().get())
        .param("workers", exec.worker_count());
    if let Body::Cap(c) = body {
        r = r.param("r", c.radius());
    }
    r
}

/// `(value, standard error)` of `|K|`, exact when known.
fn volume_of(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    match body.known_measures() {
        Some((v, _)) => Ok((v, 0.0)),
        None => volume_mc(body, n, seed, exec),
    }
}

/// Hit frequency of Haar 2-planes against `|∂K| / ω_{d−1}`.
pub fn crofton_hit_check(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<VerificationReport> {
    let mut rep = base_report("crofton_hit", body, n, seed, exec);
    let sweep = plane_sweep(body, n, seed, exec)?;
    let w = sphere_surface_area(body.dim().get() - 1)?;
    let (boundary, boundary_se) = match (body.known_measures(), body) {
        (Some((_, b)), _) => (b, 0.0),
        (None, Body::Convex(cb)) => boundary_by_facets(cb, n, derive_seed(seed, 7), exec)?,
        (None, Body::Cap(_)) => unreachable!("caps have closed forms"),
    };
    let expected = boundary / w;
    let se = (sweep.hit_rate_se().powi(2) + (boundary_se / w).powi(2)).sqrt();
    rep.stat("hit_rate", sweep.hit_rate());
    rep.stat("expected", expected);
    rep.stat("se", se);
    rep.check("abs_diff", (sweep.hit_rate() - expected).abs(), SE_MULTIPLIER * se);
    Ok(rep)
}

/// Mean of `α(K∩L)·1{hit}` over Haar planes against `(2π/ω_d)|K|`.
pub fn crofton_mean_chord_check(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<VerificationReport> {
    let mut rep = base_report("crofton_mean_chord", body, n, seed, exec);
    let sweep = plane_sweep(body, n, seed, exec)?;
    let (mean, mean_se) = sweep.mean_of(|a| a);
    let (vol, vol_se) = volume_of(body, n, derive_seed(seed, 7), exec)?;
    let scale = TAU / sphere_surface_area(body.dim().get())?;
    let expected = scale * vol;
    let se = (mean_se.powi(2) + (scale * vol_se).powi(2)).sqrt();
    rep.stat("mean_chord", mean);
    rep.stat("expected", expected);
    rep.stat("se", se);
    rep.check("abs_diff", (mean - expected).abs(), SE_MULTIPLIER * se);
    Ok(rep)
}

/// Two-point Blaschke–Petkantschin identity with `f = 1[x_1, x_2 ∈ K]`:
/// `|K|² = 2 b_{d,2} E_L[G_{d−2}(α(K∩L))·1{hit}]`, the inner double
/// integral over the section being `2^{−(d−3)} G_{d−2}(α)`.
pub fn bp_identity_check(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<VerificationReport> {
    let mut rep = base_report("bp_identity", body, n, seed, exec);
    let d = body.dim().get();
    let sweep = plane_sweep(body, n, seed, exec)?;
    let power = d as i64 - 2;
    let (mean, mean_se) = sweep.mean_of(|a| sin_power_double_antiderivative(power, a).expect("power >= 1"));
    let b = bp_constant(d)?;
    let rhs = 2.0 * b * mean;
    let rhs_se = 2.0 * b * mean_se;
    let (vol, vol_se) = volume_of(body, n, derive_seed(seed, 7), exec)?;
    let lhs = vol * vol;
    let lhs_se = 2.0 * vol * vol_se;
    let se = (rhs_se.powi(2) + lhs_se.powi(2)).sqrt();
    rep.stat("lhs", lhs);
    rep.stat("rhs", rhs);
    rep.stat("se", se);
    rep.check("rel_diff", (rhs - lhs).abs() / lhs, BP_REL_TOL.max(SE_MULTIPLIER * se / lhs));
    Ok(rep)
}

/// KS distance between sampled chords and the exact cap chord law.
pub fn cap_sigma_cdf_check(cap: &SphericalCap, n: usize, seed: u64, exec: Execution) -> Result<VerificationReport> {
    let body = Body::Cap(cap.clone());
    let mut rep = base_report("cap_sigma_cdf", &body, n, seed, exec);
    let batch = sigma_samples(&body, n, seed, exec)?;
    let ecdf = EmpiricalCdf::new(batch.values)?;
    let ks = ks_statistic(&ecdf, |s| 1.0 - cap_sigma_survival(cap, s).value);
    rep.stat("hit_rate", batch.n_accepted as f64 / batch.n_attempted as f64);
    rep.check("ks", ks, KS_SLACK * ks_critical_95(n));
    Ok(rep)
}

/// Where the chord distribution for the end-to-end check comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSource {
    /// Exact cap survival; caps only.
    Analytic,
    /// `n` sampled chords.
    Empirical(usize),
}

/// Where `|K|` and `|∂K|` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureSource {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConfig {
    pub sigma: SigmaSource,
    pub measures: MeasureSource,
    pub grid_points: usize,
}

/// Density from chords (pipeline A, integrated to a CDF) against directly
/// sampled distances (pipeline B), compared by KS.
pub fn theorem_end_to_end_check(
    body: &Body,
    n: usize,
    config: TheoremConfig,
    seed: u64,
    exec: Execution,
) -> Result<VerificationReport> {
    let mut rep = base_report("theorem_end_to_end", body, n, seed, exec)
        .param("grid", config.grid_points)
        .param(
            "sigma",
            match config.sigma {
                SigmaSource::Analytic => json!("analytic"),
                SigmaSource::Empirical(k) => json!({ "empirical": k }),
            },
        )
        .param(
            "measures",
            match config.measures {
                MeasureSource::Exact => "exact",
                MeasureSource::MonteCarlo => "monte_carlo",
            },
        );
    let d = body.dim();
    let (vol, boundary) = match config.measures {
        MeasureSource::Exact => body
            .known_measures()
            .ok_or_else(|| Error::UnsupportedBody("no closed-form measures for this body".into()))?,
        MeasureSource::MonteCarlo => {
            let m = body_measures_mc(body, n, derive_seed(seed, 3), exec)?;
            rep.stat("volume_se", m.volume_se);
            rep.stat("boundary_se", m.boundary_area_se);
            (m.volume, m.boundary_area)
        }
    };
    rep.stat("volume", vol);
    rep.stat("boundary", boundary);

    let sigma = match config.sigma {
        SigmaSource::Analytic => match body {
            Body::Cap(c) => SigmaCdf::cap(c),
            Body::Convex(_) => return Err(Error::domain("analytic sigma CDF is only available for caps")),
        },
        SigmaSource::Empirical(k) => SigmaCdf::empirical(sigma_samples(body, k, derive_seed(seed, 1), exec)?.values)?,
    };
    let deltas = delta_samples(body, n, derive_seed(seed, 2), exec)?;
    let ecdf = EmpiricalCdf::new(deltas.values)?;
    let t_max = sigma.support_max().max(ecdf.max());
    let grid = linspace(0.0, t_max, config.grid_points.max(2));
    let curve = delta_density_from_sigma(&sigma, vol, boundary, d, &grid)?;
    let ks = ks_statistic(&ecdf, |t| curve.cdf_at(t).clamp(0.0, 1.0));
    rep.stat("cdf_end", curve.cdf[curve.cdf.len() - 1]);
    rep.stat("quad_tol", INNER_QUAD_TOL);
    if let Some(t) = curve.clamped_from {
        rep.stat("clamped_from", t);
    }
    let threshold = match (config.measures, config.sigma) {
        (MeasureSource::MonteCarlo, _) => GENERAL_BODY_KS_TOL,
        (MeasureSource::Exact, SigmaSource::Analytic) => KS_SLACK * ks_critical_95(n),
        (MeasureSource::Exact, SigmaSource::Empirical(k)) => KS_SLACK * 1.36 * (1.0 / k as f64 + 1.0 / n as f64).sqrt(),
    };
    rep.check("ks", ks, threshold);
    Ok(rep)
}

/// KS between sampled distances and the CDF integrated from the cap density.
pub fn cap_delta_ks(cap: &SphericalCap, n: usize, grid_points: usize, seed: u64, exec: Execution) -> Result<f64> {
    let body = Body::Cap(cap.clone());
    let ecdf = EmpiricalCdf::new(delta_samples(&body, n, seed, exec)?.values)?;
    let curve = cap_delta_curve(cap, &linspace(0.0, 2.0 * cap.radius(), grid_points))?;
    Ok(ks_statistic(&ecdf, |t| curve.cdf_at(t).clamp(0.0, 1.0)))
}

/// One named check with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    CroftonHit(Body),
    CroftonMeanChord(Body),
    BpIdentity(Body),
    CapSigmaCdf(SphericalCap),
    Theorem(Body, TheoremConfig),
}

impl Check {
    pub fn run(&self, n: usize, seed: u64, exec: Execution, timing: bool) -> Result<VerificationReport> {
        let start = Instant::now();
        let mut rep = match self {
            Check::CroftonHit(b) => crofton_hit_check(b, n, seed, exec),
            Check::CroftonMeanChord(b) => crofton_mean_chord_check(b, n, seed, exec),
            Check::BpIdentity(b) => bp_identity_check(b, n, seed, exec),
            Check::CapSigmaCdf(c) => cap_sigma_cdf_check(c, n, seed, exec),
            Check::Theorem(b, cfg) => theorem_end_to_end_check(b, n, *cfg, seed, exec),
        }?;
        if timing {
            rep.ms = Some(start.elapsed().as_millis() as u64);
        }
        Ok(rep)
    }
}

pub fn cap(d: usize, r: f64) -> Result<SphericalCap> {
    SphericalCap::at_pole(Dimension::new(d)?, r)
}

pub fn octant() -> Body {
    Body::Convex(ConvexSphericalBody::orthant(Dimension::new(3).expect("3 >= 3")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Default,
    Crofton,
    Bp,
    Theorem,
    CapSigma,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Suite::Default),
            "crofton" => Ok(Suite::Crofton),
            "bp" => Ok(Suite::Bp),
            "theorem" => Ok(Suite::Theorem),
            "cap-sigma" => Ok(Suite::CapSigma),
            other => Err(Error::domain(format!("unknown suite '{other}'"))),
        }
    }
}

/// The checks of a suite. `bodies` overrides the default test bodies when non-empty.
pub fn suite_checks(suite: Suite, bodies: &[Body], n: usize) -> Result<Vec<Check>> {
    let third = std::f64::consts::FRAC_PI_3;
    let default_caps = || -> Result<Vec<Body>> { Ok(vec![Body::Cap(cap(3, third)?), Body::Cap(cap(4, 0.8)?)]) };
    let pick = |defaults: Vec<Body>| if bodies.is_empty() { defaults } else { bodies.to_vec() };
    let theorem_for = |b: &Body| -> Check {
        match b {
            Body::Cap(_) => Check::Theorem(
                b.clone(),
                TheoremConfig { sigma: SigmaSource::Analytic, measures: MeasureSource::Exact, grid_points: 2001 },
            ),
            Body::Convex(_) => Check::Theorem(
                b.clone(),
                TheoremConfig {
                    sigma: SigmaSource::Empirical(2 * n),
                    measures: MeasureSource::MonteCarlo,
                    grid_points: 2001,
                },
            ),
        }
    };
    let checks = match suite {
        Suite::Crofton => {
            let mut defaults = default_caps()?;
            defaults.push(octant());
            let bs = pick(defaults);
            bs.iter()
                .map(|b| Check::CroftonHit(b.clone()))
                .chain(bs.iter().map(|b| Check::CroftonMeanChord(b.clone())))
                .collect()
        }
        Suite::Bp => pick(default_caps()?).into_iter().map(Check::BpIdentity).collect(),
        Suite::CapSigma => {
            let defaults = vec![Body::Cap(cap(3, third)?), Body::Cap(cap(4, 0.8)?), Body::Cap(cap(6, 1.2)?)];
            pick(defaults)
                .into_iter()
                .map(|b| match b {
                    Body::Cap(c) => Ok(Check::CapSigmaCdf(c)),
                    Body::Convex(_) => Err(Error::domain("the cap-sigma suite needs a cap")),
                })
                .collect::<Result<_>>()?
        }
        Suite::Theorem => {
            if bodies.is_empty() {
                vec![
                    theorem_for(&Body::Cap(cap(3, third)?)),
                    Check::Theorem(
                        Body::Cap(cap(5, 0.7)?),
                        TheoremConfig {
                            sigma: SigmaSource::Empirical(2 * n),
                            measures: MeasureSource::Exact,
                            grid_points: 2001,
                        },
                    ),
                    theorem_for(&octant()),
                ]
            } else {
                bodies.iter().map(theorem_for).collect()
            }
        }
        Suite::Default => {
            let mut all = Vec::new();
            for s in [Suite::Crofton, Suite::Bp, Suite::CapSigma, Suite::Theorem] {
                all.extend(suite_checks(s, &[], n)?);
            }
            all
        }
    };
    Ok(checks)
}

/// Runs a list of checks; check `i` uses seed `derive_seed(seed, i)`.
pub fn run_checks(checks: &[Check], n: usize, seed: u64, exec: Execution, timing: bool) -> Result<Vec<VerificationReport>> {
    checks
        .iter()
        .enumerate()
        .map(|(i, c)| c.run(n, derive_seed(seed, i as u64), exec, timing))
        .collect()
}
