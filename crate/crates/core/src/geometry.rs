//! Spheres, caps and polyhedral spherical bodies, together with the exact
//! computation of great-circle sections.

use std::f64::consts::{PI, TAU};

use crate::analytic::sin_power_antiderivative;
use crate::error::{Error, Result};

/// Slack used for closed halfspace membership.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-12;
/// Above this many candidate faces the bounding cap falls back to a hemisphere.
const MAX_FACE_SUBSETS: usize = 200_000;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ambient dimension `d` of `R^d`; bodies live on `S^{d-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::domain(format!("dimension must be at least 3, got {d}")));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Surface area `ω_d = |S^{d-1}| = 2π^{d/2}/Γ(d/2)`.
///
/// Evaluated by the recurrence `ω_{d+2} = 2π ω_d / d` from `ω_1 = 2`, `ω_2 = 2π`.
pub fn sphere_surface_area(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("sphere_surface_area needs d >= 1"));
    }
    let (mut k, mut w) = if d % 2 == 1 { (1, 2.0) } else { (2, TAU) };
    while k < d {
        w *= TAU / k as f64;
        k += 2;
    }
    Ok(w)
}

/// Volume `κ_d = |B^d| = π^{d/2}/Γ(d/2 + 1)`, via `κ_d = 2π κ_{d-2} / d`.
pub fn ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("ball_volume needs d >= 1"));
    }
    let (mut k, mut v) = if d % 2 == 1 { (1, 2.0) } else { (2, PI) };
    while k < d {
        k += 2;
        v *= TAU / k as f64;
    }
    Ok(v)
}

/// `b_{d,2} = ω_d ω_{d-1} / (4π)`, the constant in the two-point spherical
/// Blaschke–Petkantschin formula.
pub fn bp_constant(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::domain(format!("bp_constant needs d >= 3, got {d}")));
    }
    Ok(sphere_surface_area(d)? * sphere_surface_area(d - 1)? / (4.0 * PI))
}

/// General `b_{d,k} = (ω_{d-k+1} ⋯ ω_d) / (ω_1 ⋯ ω_k)`.
pub fn bp_constant_general(d: usize, k: usize) -> Result<f64> {
    if k == 0 || k >= d {
        return Err(Error::domain(format!("bp_constant_general needs 1 <= k < d, got d={d}, k={k}")));
    }
    let mut b = 1.0;
    for j in 0..k {
        b *= sphere_surface_area(d - j)? / sphere_surface_area(j + 1)?;
    }
    Ok(b)
}

/// A point of `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts coordinates whose norm is 1 within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::domain(format!("vector norm {n} is not 1")));
        }
        Ok(Self(coords.into_iter().map(|x| x / n).collect()))
    }

    /// Rescales any nonzero finite vector onto the sphere.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n.is_finite() && n > 1e-300) {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(coords.into_iter().map(|x| x / n).collect()))
    }

    /// The `i`-th standard basis vector of `R^d`.
    pub fn axis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> UnitVector {
        UnitVector(self.0.iter().map(|x| -x).collect())
    }
}

/// Geodesic distance on the sphere, in `[0, π]`.
pub fn spherical_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", x.dim(), y.dim())));
    }
    Ok(x.dot(y).clamp(-1.0, 1.0).acos())
}

/// Measure of a cap of angular radius `r ∈ [0, π]` on `S^{d-1}`:
/// `ω_{d-1} ∫_0^r sin^{d-2}`.
pub fn cap_volume_for_radius(r: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("cap volume needs d >= 2"));
    }
    Ok(sphere_surface_area(d - 1)? * sin_power_antiderivative(d as i64 - 2, r)?)
}

/// All points within spherical radius `radius` of `center`, `0 < radius < π/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCap {
    center: UnitVector,
    radius: f64,
}

impl SphericalCap {
    pub fn new(center: UnitVector, radius: f64) -> Result<Self> {
        Dimension::new(center.dim())?;
        if !(radius > 0.0 && radius < PI / 2.0) {
            return Err(Error::domain(format!("cap radius must lie in (0, π/2), got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Cap centred at the last coordinate axis.
    pub fn at_pole(d: Dimension, radius: f64) -> Result<Self> {
        Self::new(UnitVector::axis(d.get(), d.get() - 1), radius)
    }

    pub fn center(&self) -> &UnitVector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> Dimension {
        Dimension(self.center.dim())
    }

    pub fn contains(&self, x: &UnitVector) -> bool {
        self.center.dot(x) >= self.radius.cos() - MEMBERSHIP_SLACK
    }
}

/// `|K|` for a cap.
pub fn cap_volume(cap: &SphericalCap) -> f64 {
    cap_volume_for_radius(cap.radius, cap.center.dim()).expect("valid cap")
}

/// `|∂K| = ω_{d-1} (sin r)^{d-2}` for a cap.
pub fn cap_boundary_area(cap: &SphericalCap) -> f64 {
    let d = cap.center.dim();
    sphere_surface_area(d - 1).expect("d >= 3") * cap.radius.sin().powi(d as i32 - 2)
}

/// A cap that may reach up to a full hemisphere or beyond; used as the
/// proposal region for rejection sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingCap {
    pub center: UnitVector,
    pub radius: f64,
}

impl BoundingCap {
    pub fn volume(&self) -> f64 {
        cap_volume_for_radius(self.radius, self.center.dim()).expect("valid bounding cap")
    }
}

/// `S^{d-1} ∩ {x : ⟨n_i, x⟩ ≥ 0 ∀i}` for a line-free cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSphericalBody {
    normals: Vec<UnitVector>,
    interior: UnitVector,
    bound: BoundingCap,
}

impl ConvexSphericalBody {
    /// Validates the witness point and line-freeness (the normals must span
    /// `R^d`) and computes a bounding cap.
    pub fn new(normals: Vec<UnitVector>, interior_point: UnitVector) -> Result<Self> {
        let d = interior_point.dim();
        Dimension::new(d)?;
        if normals.iter().any(|n| n.dim() != d) {
            return Err(Error::domain("normal and interior point dimensions differ"));
        }
        for (i, n) in normals.iter().enumerate() {
            let g = n.dot(&interior_point);
            if !(g > MEMBERSHIP_SLACK) {
                return Err(Error::domain(format!(
                    "interior point is not strictly inside constraint {i} (<n, x> = {g})"
                )));
            }
        }
        let all: Vec<usize> = (0..normals.len()).collect();
        if orthonormal_basis(&normals, &all).len() < d {
            return Err(Error::UnsupportedBody(
                "normals do not span R^d, so the cone contains a line".into(),
            ));
        }
        let bound = bounding_cap(&normals, &interior_point);
        Ok(Self { normals, interior: interior_point, bound })
    }

    /// The positive orthant `{x_i ≥ 0}` of `S^{d-1}`.
    pub fn orthant(d: Dimension) -> Self {
        let d = d.get();
        let normals = (0..d).map(|i| UnitVector::axis(d, i)).collect();
        let interior = UnitVector::normalize(vec![1.0; d]).expect("nonzero");
        Self::new(normals, interior).expect("orthant is a valid body")
    }

    pub fn normals(&self) -> &[UnitVector] {
        &self.normals
    }

    pub fn interior_point(&self) -> &UnitVector {
        &self.interior
    }

    pub fn dim(&self) -> Dimension {
        Dimension(self.interior.dim())
    }

    pub fn bounding_cap(&self) -> &BoundingCap {
        &self.bound
    }

    pub fn contains(&self, x: &UnitVector) -> bool {
        self.normals.iter().all(|n| n.dot(x) >= -MEMBERSHIP_SLACK)
    }

    /// Exact `(|K|, |∂K|)` when the body is a coordinate orthant up to signs.
    pub fn known_measures(&self) -> Option<(f64, f64)> {
        let d = self.interior.dim();
        if self.normals.len() != d {
            return None;
        }
        let mut seen = vec![false; d];
        for n in &self.normals {
            let nz: Vec<usize> = (0..d).filter(|&i| n.coords()[i] != 0.0).collect();
            if nz.len() != 1 || seen[nz[0]] {
                return None;
            }
            seen[nz[0]] = true;
        }
        let scale = 2f64.powi(d as i32 - 1);
        let vol = sphere_surface_area(d).ok()? / (2.0 * scale);
        let boundary = d as f64 * sphere_surface_area(d - 1).ok()? / scale;
        Some((vol, boundary))
    }
}

/// Gram–Schmidt basis of `span{normals[i] : i ∈ idx}`, dropping dependent vectors.
fn orthonormal_basis(normals: &[UnitVector], idx: &[usize]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in idx {
        let mut v = normals[i].coords().to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&v);
        if n > 1e-10 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn project_out(x: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
    v
}

fn for_each_subset(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::with_capacity(k), f);
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smallest cap around the interior point containing the body.
///
/// The minimum of `⟨c, x⟩` over the body is attained in the relative interior
/// of some face `{⟨n_i, x⟩ = 0, i ∈ S}`, where it is the critical point
/// `−P_S c / |P_S c|` of the face's great subsphere (both points when the
/// subsphere is a pair of antipodes). Enumerating independent active sets
/// therefore finds it exactly.
fn bounding_cap(normals: &[UnitVector], interior: &UnitVector) -> BoundingCap {
    let d = interior.dim();
    let m = normals.len();
    let subsets: f64 = (0..d).map(|k| binomial(m, k)).sum();
    if subsets > MAX_FACE_SUBSETS as f64 {
        let mut sum = vec![0.0; d];
        for n in normals {
            sum.iter_mut().zip(n.coords()).for_each(|(s, x)| *s += x);
        }
        // ⟨Σn_i, x⟩ > 0 on the pointed cone, so the closed hemisphere contains it.
        return BoundingCap { center: UnitVector::normalize(sum).expect("pointed cone"), radius: PI / 2.0 };
    }

    let c = interior.coords();
    let feasible = |x: &[f64]| normals.iter().all(|n| dot(n.coords(), x) >= -1e-9);
    let mut min_dot: f64 = 1.0;
    for k in 0..d {
        for_each_subset(m, k, &mut |idx| {
            let basis = orthonormal_basis(normals, idx);
            if basis.len() < k {
                return;
            }
            let p = project_out(c, &basis);
            let pn = norm(&p);
            if pn > 1e-12 {
                let x: Vec<f64> = p.iter().map(|v| -v / pn).collect();
                if feasible(&x) {
                    min_dot = min_dot.min(dot(c, &x));
                }
                if k == d - 1 {
                    let y: Vec<f64> = p.iter().map(|v| v / pn).collect();
                    if feasible(&y) {
                        min_dot = min_dot.min(dot(c, &y));
                    }
                }
            } else {
                // The face lies in c^⊥.
                min_dot = min_dot.min(0.0);
            }
        });
    }
    let radius = (min_dot.clamp(-1.0, 1.0).acos() + 1e-9).min(PI);
    BoundingCap { center: interior.clone(), radius }
}

/// Either of the two supported body representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Cap(SphericalCap),
    Convex(ConvexSphericalBody),
}

impl Body {
    pub fn dim(&self) -> Dimension {
        match self {
            Body::Cap(c) => c.dim(),
            Body::Convex(b) => b.dim(),
        }
    }

    pub fn contains(&self, x: &UnitVector) -> bool {
        match self {
            Body::Cap(c) => c.contains(x),
            Body::Convex(b) => b.contains(x),
        }
    }

    pub fn bounding_cap(&self) -> BoundingCap {
        match self {
            Body::Cap(c) => BoundingCap { center: c.center.clone(), radius: c.radius },
            Body::Convex(b) => b.bound.clone(),
        }
    }

    /// Exact `(|K|, |∂K|)` where a closed form is known.
    pub fn known_measures(&self) -> Option<(f64, f64)> {
        match self {
            Body::Cap(c) => Some((cap_volume(c), cap_boundary_area(c))),
            Body::Convex(b) => b.known_measures(),
        }
    }

    pub fn chord_arc(&self, plane: &TwoPlane) -> Result<ChordArc> {
        match self {
            Body::Cap(c) => cap_chord_arc(c, plane),
            Body::Convex(b) => body_chord_arc(b, plane),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Body::Cap(c) => format!("cap(d={}, r={})", c.dim(), c.radius),
            Body::Convex(b) => format!("halfspaces(d={}, m={})", b.dim(), b.normals.len()),
        }
    }
}

/// `⟨n_i, x⟩ ≥ −1e-12` for every constraint.
pub fn body_membership(body: &ConvexSphericalBody, x: &UnitVector) -> bool {
    body.contains(x)
}

/// A 2-dimensional linear subspace, carried by an orthonormal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlane {
    u: UnitVector,
    v: UnitVector,
}

impl TwoPlane {
    pub fn new(u: UnitVector, v: UnitVector) -> Result<Self> {
        if u.dim() != v.dim() {
            return Err(Error::domain("plane basis dimensions differ"));
        }
        let c = u.dot(&v);
        if c.abs() > UNIT_TOL {
            return Err(Error::domain(format!("plane basis is not orthogonal (<u, v> = {c:e})")));
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &UnitVector {
        &self.u
    }

    pub fn v(&self) -> &UnitVector {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// Norm of the orthogonal projection of `x` onto the plane.
    pub fn projection_norm(&self, x: &UnitVector) -> f64 {
        self.u.dot(x).hypot(self.v.dot(x))
    }

    /// The great-circle point `u cos φ + v sin φ`.
    pub fn point(&self, phi: f64) -> UnitVector {
        let (s, c) = phi.sin_cos();
        UnitVector(self.u.0.iter().zip(&self.v.0).map(|(a, b)| a * c + b * s).collect())
    }
}

/// Intersection of a body with a great circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordArc {
    /// Spherical length in radians, 0 when empty.
    pub length: f64,
    pub hit: bool,
}

impl ChordArc {
    pub const MISS: ChordArc = ChordArc { length: 0.0, hit: false };
}

/// Cap section: with `p` the projection norm of the centre, the circle hits
/// iff `p ≥ cos r` and then cuts an arc of length `2 arccos(cos r / p)`.
pub fn cap_chord_arc(cap: &SphericalCap, plane: &TwoPlane) -> Result<ChordArc> {
    if cap.center.dim() != plane.dim() {
        return Err(Error::domain("cap and plane dimensions differ"));
    }
    let p = plane.projection_norm(&cap.center);
    let cr = cap.radius.cos();
    if p < cr {
        return Ok(ChordArc::MISS);
    }
    Ok(ChordArc { length: 2.0 * (cr / p).min(1.0).acos(), hit: true })
}

type Interval = (f64, f64);

fn intersect_intervals(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Section of a halfspace body: each active constraint restricts the angle
/// `φ` of `u cos φ + v sin φ` to a closed half circle; the section is their
/// intersection, computed in `[0, 2π]` with wrap-around split into two pieces.
pub fn body_chord_arc(body: &ConvexSphericalBody, plane: &TwoPlane) -> Result<ChordArc> {
    if body.interior.dim() != plane.dim() {
        return Err(Error::domain("body and plane dimensions differ"));
    }
    let mut set: Vec<Interval> = vec![(0.0, TAU)];
    for n in &body.normals {
        let a = n.dot(&plane.u);
        let b = n.dot(&plane.v);
        if a.hypot(b) <= MEMBERSHIP_SLACK {
            // ⟨n, x(φ)⟩ ≈ 0 on the whole circle
            continue;
        }
        let start = (b.atan2(a) - PI / 2.0).rem_euclid(TAU);
        let end = start + PI;
        let arc: Vec<Interval> = if end <= TAU {
            vec![(start, end)]
        } else {
            vec![(start, TAU), (0.0, end - TAU)]
        };
        set = intersect_intervals(&set, &arc);
        if set.is_empty() {
            return Ok(ChordArc::MISS);
        }
    }
    set.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<Interval> = Vec::with_capacity(set.len());
    for iv in set {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    if merged.len() > 1 && merged[0].0 == 0.0 && merged[merged.len() - 1].1 == TAU {
        let first = merged.remove(0);
        let last = merged.last_mut().expect("len > 1");
        last.1 = TAU + first.1;
    }
    let pieces = merged.iter().filter(|iv| iv.1 > iv.0).count();
    if pieces > 1 {
        return Err(Error::UnsupportedBody(format!(
            "great-circle section splits into {pieces} arcs; the cone is not line-free"
        )));
    }
    let length: f64 = merged.iter().map(|iv| iv.1 - iv.0).sum();
    Ok(ChordArc { length, hit: true })
}

/// Exact section of either body type.
pub fn chord_arc(body: &Body, plane: &TwoPlane) -> Result<ChordArc> {
    body.chord_arc(plane)
}
