//! Batched Monte Carlo drivers.
//!
//! Work is cut into fixed-size batches and batch `i` always draws from
//! stream `(seed, i)`, so results depend only on `(seed, n)`: the same
//! numbers come out sequentially, on one worker, or on many. With the
//! `parallel` feature the batches run on a rayon pool; without it every
//! [`Execution`] runs sequentially.

use crate::error::{Error, Result};
use crate::geometry::{sphere_surface_area, spherical_distance, Body, ConvexSphericalBody, UnitVector};
use crate::samplers::{sample_two_plane, PointSampler, RngStream, SampleBatch, SigmaSampler};

pub const BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// rayon's global pool
    #[default]
    Parallel,
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0 | 1) => Execution::Sequential,
            Some(w) => Execution::Workers(w),
        }
    }

    pub fn worker_count(&self) -> usize {
        match self {
            Execution::Sequential => 1,
            #[cfg(feature = "parallel")]
            Execution::Parallel => rayon::current_num_threads(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => 1,
            Execution::Workers(w) => *w,
        }
    }
}

/// SplitMix64 finalizer; derives independent seeds for the phases of one check.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `job(rng, count)` over `ceil(n / BATCH_SIZE)` batches and returns
/// the outputs in batch order.
pub fn run_batches<T, F>(n: usize, seed: u64, exec: Execution, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> Result<T> + Sync + Send,
{
    let batches = n.div_ceil(BATCH_SIZE);
    let one = |i: usize| {
        let count = BATCH_SIZE.min(n - i * BATCH_SIZE);
        let mut rng = RngStream::new(seed, i as u64);
        job(&mut rng, count)
    };
    match exec {
        Execution::Sequential => (0..batches).map(one).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..batches).into_par_iter().map(one).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(w) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Pool(e.to_string()))?;
            pool.install(|| (0..batches).into_par_iter().map(one).collect())
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::Workers(_) => (0..batches).map(one).collect(),
    }
}

fn merge(parts: Vec<SampleBatch>) -> SampleBatch {
    let mut out = SampleBatch::default();
    for p in parts {
        out.extend(p);
    }
    out
}

/// Exactly `n` draws of σ(K). `n_attempted` counts planes drawn.
pub fn sigma_samples(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<SampleBatch> {
    let sampler = SigmaSampler::new(body, seed)?;
    let parts = run_batches(n, seed, exec, |rng, count| {
        let mut b = SampleBatch { values: Vec::with_capacity(count), ..Default::default() };
        for _ in 0..count {
            let (x, attempts) = sampler.sample(rng)?;
            b.values.push(x);
            b.n_attempted += attempts;
            b.n_accepted += 1;
        }
        Ok(b)
    })?;
    Ok(merge(parts))
}

/// Exactly `n` draws of Δ(K). `n_attempted` counts jointly proposed point pairs.
pub fn delta_samples(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<SampleBatch> {
    let sampler = PointSampler::new(body, seed)?;
    let parts = run_batches(n, seed, exec, |rng, count| {
        let mut b = SampleBatch { values: Vec::with_capacity(count), ..Default::default() };
        for _ in 0..count {
            let (x, y, attempts) = sampler.sample_pair(rng);
            b.values.push(spherical_distance(&x, &y)?);
            b.n_attempted += attempts;
            b.n_accepted += 1;
        }
        Ok(b)
    })?;
    Ok(merge(parts))
}

/// `n` unconditioned Haar planes and the chord lengths of those that hit.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSweep {
    pub planes: u64,
    pub chords: Vec<f64>,
}

impl PlaneSweep {
    pub fn hit_rate(&self) -> f64 {
        self.chords.len() as f64 / self.planes as f64
    }

    pub fn hit_rate_se(&self) -> f64 {
        let p = self.hit_rate();
        (p * (1.0 - p) / self.planes as f64).sqrt()
    }

    /// Mean and standard error of `h(α)·1{hit}` over all planes.
    pub fn mean_of<F: Fn(f64) -> f64>(&self, h: F) -> (f64, f64) {
        let n = self.planes as f64;
        let (sum, sum_sq) = self.chords.iter().map(|&a| h(a)).fold((0.0, 0.0), |(s, q), v| (s + v, q + v * v));
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

pub fn plane_sweep(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<PlaneSweep> {
    let d = body.dim();
    let parts = run_batches(n, seed, exec, |rng, count| {
        let mut chords = Vec::new();
        for _ in 0..count {
            let arc = body.chord_arc(&sample_two_plane(d, rng))?;
            if arc.hit {
                chords.push(arc.length);
            }
        }
        Ok(chords)
    })?;
    Ok(PlaneSweep { planes: n as u64, chords: parts.into_iter().flatten().collect() })
}

/// Monte Carlo estimates of `|K|` and `|∂K|` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyMeasures {
    pub volume: f64,
    pub volume_se: f64,
    pub boundary_area: f64,
    pub boundary_area_se: f64,
}

/// `|K|` by rejection within the bounding cap (scaled by its volume) and
/// `|∂K| = ω_{d−1} · P(Haar 2-plane hits K)`.
pub fn body_measures_mc(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<BodyMeasures> {
    let (volume, volume_se) = volume_mc(body, n, derive_seed(seed, 1), exec)?;
    let sweep = plane_sweep(body, n, derive_seed(seed, 2), exec)?;
    let w = sphere_surface_area(body.dim().get() - 1)?;
    Ok(BodyMeasures {
        volume,
        volume_se,
        boundary_area: w * sweep.hit_rate(),
        boundary_area_se: w * sweep.hit_rate_se(),
    })
}

/// `|K|` by rejection from the bounding cap.
pub fn volume_mc(body: &Body, n: usize, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    let bound = body.bounding_cap();
    if !(bound.radius > 0.0) {
        return Err(Error::UnsupportedBody("no bounding cap".into()));
    }
    let sampler = PointSampler::new(body, seed)?;
    let counts = run_batches(n, seed, exec, |rng, count| {
        Ok((0..count).filter(|_| sampler.propose(rng).is_some()).count())
    })?;
    let p = counts.iter().sum::<usize>() as f64 / n as f64;
    let v = bound.volume();
    Ok((v * p, v * (p * (1.0 - p) / n as f64).sqrt()))
}

/// `|∂K|` as the sum of facet areas, each the fraction of its great
/// subsphere `n_i^⊥ ∩ S^{d−1}` satisfying the other constraints, times
/// `ω_{d−1}`. Uses no great-circle sections, so it is independent of the
/// Crofton route in [`body_measures_mc`].
pub fn boundary_by_facets(body: &ConvexSphericalBody, n: usize, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    let d = body.dim().get();
    let w = sphere_surface_area(d - 1)?;
    let normals = body.normals();
    let (mut total, mut var) = (0.0, 0.0);
    for (i, facet) in normals.iter().enumerate() {
        let counts = run_batches(n, derive_seed(seed, 100 + i as u64), exec, |rng, count| {
            let mut inside = 0usize;
            for _ in 0..count {
                // Uniform on the great subsphere orthogonal to the facet normal.
                let plane = sample_two_plane(body.dim(), rng);
                let mut x = plane.u().coords().to_vec();
                let c = crate::geometry::dot(&x, facet.coords());
                x.iter_mut().zip(facet.coords()).for_each(|(a, b)| *a -= c * b);
                let Ok(x) = UnitVector::normalize(x) else { continue };
                if normals
                    .iter()
                    .enumerate()
                    .all(|(j, nj)| j == i || nj.dot(&x) >= -crate::geometry::MEMBERSHIP_SLACK)
                {
                    inside += 1;
                }
            }
            Ok(inside)
        })?;
        let p = counts.iter().sum::<usize>() as f64 / n as f64;
        total += w * p;
        var += w * w * p * (1.0 - p) / n as f64;
    }
    Ok((total, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cap_boundary_area, cap_volume, Dimension, SphericalCap};
    use std::f64::consts::PI;

    fn octant() -> Body {
        Body::Convex(ConvexSphericalBody::orthant(Dimension::new(3).unwrap()))
    }

    #[test]
    fn batches_are_independent_of_execution() {
        let body = Body::Cap(SphericalCap::at_pole(Dimension::new(4).unwrap(), 0.8).unwrap());
        let n = 3 * BATCH_SIZE + 17;
        let a = sigma_samples(&body, n, 42, Execution::Sequential).unwrap();
        let b = sigma_samples(&body, n, 42, Execution::Workers(3)).unwrap();
        let c = sigma_samples(&body, n, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.values.len(), n);
        assert!(a.n_accepted <= a.n_attempted);
        let d = sigma_samples(&body, n, 43, Execution::Sequential).unwrap();
        assert_ne!(a.values, d.values);
    }

    #[test]
    fn cap_measures_match_closed_forms() {
        for (d, r) in [(3, PI / 3.0), (4, 0.8), (5, 0.5)] {
            let cap = SphericalCap::at_pole(Dimension::new(d).unwrap(), r).unwrap();
            let m = body_measures_mc(&Body::Cap(cap.clone()), 100_000, 9, Execution::Parallel).unwrap();
            // Rejection from the cap itself accepts everything.
            assert!((m.volume - cap_volume(&cap)).abs() <= 3.0 * m.volume_se + 1e-12);
            assert!((m.boundary_area - cap_boundary_area(&cap)).abs() <= 3.0 * m.boundary_area_se, "{m:?}");
        }
    }

    #[test]
    fn octant_measures() {
        let m = body_measures_mc(&octant(), 100_000, 10, Execution::Parallel).unwrap();
        assert!((m.volume - PI / 2.0).abs() <= 3.0 * m.volume_se, "{m:?}");
        assert!((m.boundary_area - 1.5 * PI).abs() <= 3.0 * m.boundary_area_se, "{m:?}");
        let Body::Convex(b) = octant() else { unreachable!() };
        let (area, se) = boundary_by_facets(&b, 100_000, 11, Execution::Parallel).unwrap();
        assert!((area - 1.5 * PI).abs() <= 3.0 * se, "{area} ± {se}");
    }

    #[test]
    fn delta_batch_bookkeeping() {
        let b = delta_samples(&octant(), 10_000, 12, Execution::Parallel).unwrap();
        assert_eq!(b.n_accepted as usize, b.values.len());
        assert!(b.n_attempted >= b.n_accepted);
        assert!(b.values.iter().all(|&x| x <= PI / 2.0 + 1e-9));
        // Pair acceptance for the octant within its bounding cap:
        // p = (π/2) / (2π(1 − 1/√3)) per point.
        let p = (PI / 2.0) / (2.0 * PI * (1.0 - 1.0 / 3f64.sqrt()));
        let pair = p * p;
        let se = (pair * (1.0 - pair) / b.n_attempted as f64).sqrt();
        assert!((b.acceptance_rate() - pair).abs() <= 3.5 * se, "{} vs {pair}", b.acceptance_rate());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 1), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 1), derive_seed(2, 1));
        assert_eq!(derive_seed(5, 7), derive_seed(5, 7));
    }
}
