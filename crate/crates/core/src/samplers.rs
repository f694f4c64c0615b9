//! Seedable generation of uniform points in caps and bodies, Haar-random
//! 2-planes, and single draws of the chord length σ and the distance Δ.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analytic::sin_power_antiderivative;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, spherical_distance, Body, BoundingCap, Dimension, SphericalCap, TwoPlane, UnitVector};

/// Knots in the inverse-CDF table of the polar angle.
pub const THETA_TABLE_SIZE: usize = 4096;
const THETA_TOL: f64 = 1e-12;
const PROBE_SIZE: u64 = 200_000;
const PROBE_STREAM: u64 = u64::MAX;
/// Minimum acceptance rate for point rejection sampling.
pub const MIN_POINT_ACCEPTANCE: f64 = 1e-4;
/// Minimum hit rate for chord sampling.
pub const MIN_HIT_RATE: f64 = 1e-5;

/// A ChaCha8 stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Accepted values of a rejection sampler with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub n_attempted: u64,
    pub n_accepted: u64,
}

impl SampleBatch {
    pub fn acceptance_rate(&self) -> f64 {
        self.n_accepted as f64 / self.n_attempted.max(1) as f64
    }

    /// Binomial standard error of the acceptance rate.
    pub fn acceptance_se(&self) -> f64 {
        let p = self.acceptance_rate();
        (p * (1.0 - p) / self.n_attempted.max(1) as f64).sqrt()
    }

    pub fn extend(&mut self, other: SampleBatch) {
        self.values.extend(other.values);
        self.n_attempted += other.n_attempted;
        self.n_accepted += other.n_accepted;
    }
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform direction orthogonal to `axis`.
fn orthogonal_direction<R: Rng + ?Sized>(axis: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut g = gaussian_vector(axis.len(), rng);
        for _ in 0..2 {
            let c = dot(&g, axis);
            g.iter_mut().zip(axis).for_each(|(x, a)| *x -= c * a);
        }
        let n = norm(&g);
        if n > 1e-8 {
            g.iter_mut().for_each(|x| *x /= n);
            return g;
        }
    }
}

/// Uniform sampler on a cap of any radius in `(0, π]`.
///
/// The polar angle has density `∝ sin^{d−2} θ` on `[0, r]`; it is drawn by
/// inverting `F_{d−2}(θ)`: a table of knots brackets the root, then
/// safeguarded Newton steps refine it to `1e-12`.
#[derive(Debug, Clone)]
pub struct CapSampler {
    center: UnitVector,
    radius: f64,
    power: i64,
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CapSampler {
    pub fn new(center: &UnitVector, radius: f64) -> Result<Self> {
        let d = center.dim();
        Dimension::new(d)?;
        if !(radius > 0.0 && radius <= std::f64::consts::PI) {
            return Err(Error::domain(format!("sampling cap radius must lie in (0, π], got {radius}")));
        }
        let power = d as i64 - 2;
        let knots: Vec<f64> = (0..=THETA_TABLE_SIZE).map(|i| radius * i as f64 / THETA_TABLE_SIZE as f64).collect();
        let cumulative = knots
            .iter()
            .map(|&t| sin_power_antiderivative(power, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { center: center.clone(), radius, power, knots, cumulative })
    }

    pub fn for_cap(cap: &SphericalCap) -> Self {
        Self::new(cap.center(), cap.radius()).expect("valid cap")
    }

    pub fn for_bounding(cap: &BoundingCap) -> Result<Self> {
        Self::new(&cap.center, cap.radius)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Polar angle with `P(θ ≤ t) = F_{d−2}(t) / F_{d−2}(r)`, from a uniform `u ∈ [0, 1)`.
    pub fn theta_from_uniform(&self, u: f64) -> f64 {
        let total = self.cumulative[self.cumulative.len() - 1];
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.knots.len() - 1);
        let (mut lo, mut hi) = (self.knots[i - 1], self.knots[i]);
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let mut theta = if c1 > c0 { lo + (hi - lo) * (target - c0) / (c1 - c0) } else { lo };
        for _ in 0..100 {
            let f = sin_power_antiderivative(self.power, theta).expect("power >= 1") - target;
            if f.abs() <= f64::EPSILON * total {
                break;
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            if hi - lo <= THETA_TOL {
                break;
            }
            let slope = theta.sin().powi(self.power as i32);
            let newton = theta - f / slope;
            theta = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        theta.clamp(0.0, self.radius)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector {
        let theta = self.theta_from_uniform(rng.random::<f64>());
        let w = orthogonal_direction(self.center.coords(), rng);
        let (s, c) = theta.sin_cos();
        let x: Vec<f64> = self.center.coords().iter().zip(&w).map(|(a, b)| c * a + s * b).collect();
        UnitVector::normalize(x).expect("unit combination")
    }
}

/// One uniform point in a cap.
pub fn sample_point_in_cap<R: Rng + ?Sized>(cap: &SphericalCap, rng: &mut R) -> UnitVector {
    CapSampler::for_cap(cap).sample(rng)
}

/// Uniform points in any body; caps are sampled directly, halfspace bodies by
/// rejection from their bounding cap.
#[derive(Debug, Clone)]
pub struct PointSampler {
    body: Body,
    proposal: CapSampler,
}

impl PointSampler {
    /// Probes the acceptance rate on a reserved stream of `seed` and fails if
    /// it is below [`MIN_POINT_ACCEPTANCE`].
    pub fn new(body: &Body, seed: u64) -> Result<Self> {
        let proposal = CapSampler::for_bounding(&body.bounding_cap())?;
        let sampler = Self { body: body.clone(), proposal };
        if let Body::Convex(_) = body {
            let mut rng = RngStream::new(seed, PROBE_STREAM);
            let hits = (0..PROBE_SIZE).filter(|_| sampler.body.contains(&sampler.proposal.sample(&mut rng))).count();
            let rate = hits as f64 / PROBE_SIZE as f64;
            if rate < MIN_POINT_ACCEPTANCE {
                return Err(Error::Efficiency {
                    what: "point acceptance",
                    rate,
                    min_rate: MIN_POINT_ACCEPTANCE,
                    advice: "supply an interior point closer to the body's centre for a tighter bounding cap",
                });
            }
        }
        Ok(sampler)
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    /// A point and the number of proposals it took.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (UnitVector, u64) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let x = self.proposal.sample(rng);
            if matches!(self.body, Body::Cap(_)) || self.body.contains(&x) {
                return (x, attempts);
            }
        }
    }

    /// Proposes a point from the bounding cap; `Some` if it lies in the body.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<UnitVector> {
        let x = self.proposal.sample(rng);
        self.body.contains(&x).then_some(x)
    }

    /// A pair of independent uniform points, accepted jointly, and the pair proposals used.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (UnitVector, UnitVector, u64) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let x = self.proposal.sample(rng);
            let y = self.proposal.sample(rng);
            if matches!(self.body, Body::Cap(_)) || (self.body.contains(&x) && self.body.contains(&y)) {
                return (x, y, attempts);
            }
        }
    }
}

/// One uniform point in a body by rejection from its bounding cap.
pub fn sample_point_in_body<R: Rng + ?Sized>(body: &Body, seed: u64, rng: &mut R) -> Result<UnitVector> {
    Ok(PointSampler::new(body, seed)?.sample(rng).0)
}

/// Haar-random 2-plane: two Gaussian vectors, orthonormalized.
pub fn sample_two_plane<R: Rng + ?Sized>(d: Dimension, rng: &mut R) -> TwoPlane {
    let d = d.get();
    let u = loop {
        let g = gaussian_vector(d, rng);
        if norm(&g) > 1e-8 {
            break UnitVector::normalize(g).expect("nonzero");
        }
    };
    let v = orthogonal_direction(u.coords(), rng);
    TwoPlane::new(u, UnitVector::from_unit_unchecked(v)).expect("orthonormal by construction")
}

/// Chord sampler: Haar planes conditioned on hitting the body.
#[derive(Debug, Clone)]
pub struct SigmaSampler {
    body: Body,
}

impl SigmaSampler {
    /// Probes the hit rate on a reserved stream of `seed`; fails below [`MIN_HIT_RATE`].
    pub fn new(body: &Body, seed: u64) -> Result<Self> {
        let d = body.dim();
        let mut rng = RngStream::new(seed, PROBE_STREAM);
        let mut hits = 0u64;
        for _ in 0..PROBE_SIZE {
            if body.chord_arc(&sample_two_plane(d, &mut rng))?.hit {
                hits += 1;
            }
        }
        let rate = hits as f64 / PROBE_SIZE as f64;
        if rate < MIN_HIT_RATE {
            return Err(Error::Efficiency {
                what: "great-circle hit",
                rate,
                min_rate: MIN_HIT_RATE,
                advice: "the body is too small for plane rejection sampling",
            });
        }
        Ok(Self { body: body.clone() })
    }

    /// A chord length and the number of planes drawn.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, u64)> {
        let d = self.body.dim();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let arc = self.body.chord_arc(&sample_two_plane(d, rng))?;
            if arc.hit {
                return Ok((arc.length, attempts));
            }
        }
    }
}

/// One draw of σ(K).
pub fn sample_sigma<R: Rng + ?Sized>(body: &Body, seed: u64, rng: &mut R) -> Result<f64> {
    Ok(SigmaSampler::new(body, seed)?.sample(rng)?.0)
}

/// One draw of Δ(K).
pub fn sample_delta<R: Rng + ?Sized>(body: &Body, seed: u64, rng: &mut R) -> Result<f64> {
    let (x, y, _) = PointSampler::new(body, seed)?.sample_pair(rng);
    spherical_distance(&x, &y)
}
