//! Obstacle configurations and ray-obstacle intersection.
//!
//! Obstacles are discs. A [`Hit`] carries the boundary point, the inward
//! normal and the cosine of incidence, which together with the curvature
//! `1/radius` is everything the flow and the linearization need.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BilliardError, Result};
use crate::vec2::Vec2;

/// Re-intersection guard: hits at times `<= T_EPS` are the current boundary point.
pub const T_EPS: f64 = 1e-12;

/// Relative slack for deciding that a ray origin sits on a boundary circle.
const ON_BOUNDARY_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disc { center, radius }
    }

    pub fn curvature(&self) -> f64 {
        1.0 / self.radius
    }

    pub fn circumference(&self) -> f64 {
        std::f64::consts::TAU * self.radius
    }

    /// Arclength of the boundary point at polar angle `theta`, in `[0, 2 pi r)`.
    pub fn arclength_of_angle(&self, theta: f64) -> f64 {
        (theta * self.radius).rem_euclid(self.circumference())
    }
}

/// A validated, immutable obstacle configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleSet {
    discs: Vec<Disc>,
}

#[derive(Deserialize)]
struct RawObstacleSet {
    discs: Vec<Disc>,
}

impl<'de> Deserialize<'de> for ObstacleSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawObstacleSet::deserialize(d)?;
        ObstacleSet::new(raw.discs).map_err(serde::de::Error::custom)
    }
}

impl ObstacleSet {
    /// Validates radii and strict pairwise disjointness of the closed discs.
    pub fn new(discs: Vec<Disc>) -> Result<Self> {
        if discs.is_empty() {
            return Err(BilliardError::InvalidConfig("obstacle set is empty".into()));
        }
        for (i, d) in discs.iter().enumerate() {
            if !(d.radius > 0.0) || !d.radius.is_finite() {
                return Err(BilliardError::InvalidConfig(format!(
                    "disc {} has non-positive radius {}",
                    i + 1,
                    d.radius
                )));
            }
            if !d.center.x.is_finite() || !d.center.y.is_finite() {
                return Err(BilliardError::InvalidConfig(format!(
                    "disc {} has a non-finite center",
                    i + 1
                )));
            }
        }
        for i in 0..discs.len() {
            for j in i + 1..discs.len() {
                let gap = discs[i].center.dist(discs[j].center) - discs[i].radius - discs[j].radius;
                if gap <= 0.0 {
                    return Err(BilliardError::InvalidConfig(format!(
                        "discs {} and {} are not disjoint (gap {gap})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(ObstacleSet { discs })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BilliardError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn discs(&self) -> &[Disc] {
        &self.discs
    }

    pub fn len(&self) -> usize {
        self.discs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discs.is_empty()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.discs.len() as f64;
        let s = self.discs.iter().fold(Vec2::ZERO, |acc, d| acc + d.center);
        s * (1.0 / n)
    }

    /// Largest distance between two points of the obstacles.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.discs.iter().enumerate() {
            best = best.max(2.0 * a.radius);
            for b in &self.discs[i + 1..] {
                best = best.max(a.center.dist(b.center) + a.radius + b.radius);
            }
        }
        best
    }

    /// Radius of the smallest centroid-centered ball containing every obstacle.
    pub fn enclosing_radius(&self) -> f64 {
        let c = self.centroid();
        self.discs
            .iter()
            .map(|d| d.center.dist(c) + d.radius)
            .fold(0.0, f64::max)
    }

    /// Default escape-domain radius: enclosing radius plus the diameter.
    pub fn default_domain_radius(&self) -> f64 {
        self.enclosing_radius() + self.diameter()
    }

    /// Index of the obstacle whose open interior contains `x`, if any.
    pub fn containing(&self, x: Vec2) -> Option<usize> {
        self.discs.iter().position(|d| {
            let r = d.radius;
            (x - d.center).norm_sq() < r * r * (1.0 - ON_BOUNDARY_REL)
        })
    }

    /// SHA-256 over the exact bit patterns of all centers and radii.
    pub fn set_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in &self.discs {
            h.update(d.center.x.to_bits().to_le_bytes());
            h.update(d.center.y.to_bits().to_le_bytes());
            h.update(d.radius.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Applies the rigid motion `x -> R(angle) x + shift` to every disc.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> ObstacleSet {
        let discs = self
            .discs
            .iter()
            .map(|d| Disc::new(d.center.rotate(angle) + shift, d.radius))
            .collect();
        ObstacleSet { discs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    pub direction: Vec2,
}

impl Ray {
    pub fn new(origin: Vec2, direction: Vec2) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(BilliardError::InvalidState(format!(
                "ray direction has norm {}",
                direction.norm()
            )));
        }
        Ok(Ray { origin, direction })
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub obstacle: usize,
    pub time: f64,
    pub point: Vec2,
    pub inward_normal: Vec2,
    pub cos_incidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitKind {
    Transversal,
    Grazing,
}

/// Forward intersection of `ray` with one disc, `Ok(None)` on a miss.
fn hit_disc(disc: &Disc, index: usize, ray: &Ray) -> Result<Option<Hit>> {
    let r = disc.radius;
    let oc = disc.center - ray.origin;
    let b = oc.dot(ray.direction);
    // Perpendicular distance from the center to the line, without cancellation.
    let perp = oc.cross(ray.direction).abs();
    let c = oc.norm_sq() - r * r;
    let on_boundary = c.abs() <= ON_BOUNDARY_REL * r * r;
    if c < 0.0 && !on_boundary {
        return Err(BilliardError::InvalidState(format!(
            "point ({}, {}) lies inside obstacle {}",
            ray.origin.x,
            ray.origin.y,
            index + 1
        )));
    }
    let disc_term = (r - perp) * (r + perp);
    if disc_term < 0.0 || b <= 0.0 {
        return Ok(None);
    }
    let half_chord = disc_term.sqrt();
    if on_boundary {
        if half_chord > 0.0 && b > 0.0 && b > T_EPS {
            // Sitting on the circle and pointing into the obstacle.
            return Err(BilliardError::InvalidState(format!(
                "direction points into obstacle {} from its boundary",
                index + 1
            )));
        }
        return Ok(None);
    }
    let t = c / (b + half_chord);
    if t <= T_EPS {
        return Ok(None);
    }
    let raw_point = ray.at(t);
    let inward = (disc.center - raw_point).normalized();
    let point = disc.center - inward * r;
    let cos_incidence = (half_chord / r).min(1.0);
    Ok(Some(Hit {
        obstacle: index,
        time: t,
        point,
        inward_normal: inward,
        cos_incidence,
    }))
}

/// First obstacle boundary met by the ray at a time strictly after [`T_EPS`].
///
/// A ray starting on a boundary circle ignores that circle: leaving a convex
/// obstacle it cannot meet it again.
pub fn first_hit(set: &ObstacleSet, ray: &Ray) -> Result<Option<Hit>> {
    let mut best: Option<Hit> = None;
    for (i, d) in set.discs.iter().enumerate() {
        if let Some(h) = hit_disc(d, i, ray)? {
            if best.is_none_or(|b| h.time < b.time) {
                best = Some(h);
            }
        }
    }
    Ok(best)
}

pub fn classify_hit(hit: &Hit, grazing_tol: f64) -> HitKind {
    if hit.cos_incidence < grazing_tol {
        HitKind::Grazing
    } else {
        HitKind::Transversal
    }
}

/// Signed distance from `p` to the convex hull of two discs.
///
/// The hull is bounded by the two circles and their outer common tangents.
/// Requires `|r1 - r2| < |c2 - c1|`, which disjointness guarantees.
pub fn hull_distance(a: &Disc, b: &Disc, p: Vec2) -> f64 {
    let axis = b.center - a.center;
    let h = axis.norm();
    let e = axis * (1.0 / h);
    let q = p - a.center;
    // Coordinates with the segment along +y and |x| folded.
    let py = q.dot(e);
    let px = q.cross(e).abs();
    let slope = (a.radius - b.radius) / h;
    let cos = (1.0 - slope * slope).sqrt();
    let k = -slope * px + cos * py;
    if k < 0.0 {
        px.hypot(py) - a.radius
    } else if k > cos * h {
        px.hypot(py - h) - b.radius
    } else {
        cos * px + slope * py - a.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoEclipseReport {
    pub holds: bool,
    /// `(i, j, k)`: obstacle `k` meets the hull of `i` and `i < j` (0-based).
    pub violations: Vec<(usize, usize, usize)>,
}

pub fn no_eclipse_check(set: &ObstacleSet) -> NoEclipseReport {
    let discs = set.discs();
    let mut violations = Vec::new();
    for i in 0..discs.len() {
        for j in i + 1..discs.len() {
            for (k, dk) in discs.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                if hull_distance(&discs[i], &discs[j], dk.center) - dk.radius <= 0.0 {
                    violations.push((i, j, k));
                }
            }
        }
    }
    NoEclipseReport {
        holds: violations.is_empty(),
        violations,
    }
}

/// Boundary point at arclength `s` (counter-clockwise from angle 0).
///
/// Returns `(point, inward_normal, tangent)`.
pub fn boundary_point(disc: &Disc, s: f64) -> (Vec2, Vec2, Vec2) {
    let theta = s.rem_euclid(disc.circumference()) / disc.radius;
    let (sn, cs) = theta.sin_cos();
    let outward = Vec2::new(cs, sn);
    (
        disc.center + outward * disc.radius,
        -outward,
        Vec2::new(-sn, cs),
    )
}
