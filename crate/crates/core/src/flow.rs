//! The non-grazing billiard flow: free flight, specular reflection,
//! termination on grazing hits, escape times and the boundary map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};
use crate::geometry::{boundary_point, classify_hit, first_hit, HitKind, ObstacleSet, Ray};
use crate::vec2::Vec2;
use crate::DEFAULT_GRAZING_TOL;

/// A point of the unit tangent bundle over the exterior of the obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec2,
    pub v: Vec2,
}

impl PhaseState {
    pub fn new(x: Vec2, v: Vec2) -> Result<Self> {
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(BilliardError::InvalidState(format!(
                "velocity has norm {}, expected 1",
                v.norm()
            )));
        }
        Ok(PhaseState { x, v })
    }

    /// Same point, direction given as an angle.
    pub fn from_angle(x: Vec2, angle: f64) -> Self {
        PhaseState {
            x,
            v: Vec2::from_angle(angle),
        }
    }

    pub fn reversed(&self) -> PhaseState {
        PhaseState {
            x: self.x,
            v: -self.v,
        }
    }

    pub fn validate(&self, set: &ObstacleSet) -> Result<()> {
        if let Some(i) = set.containing(self.x) {
            return Err(BilliardError::InvalidState(format!(
                "position ({}, {}) lies inside obstacle {}",
                self.x.x,
                self.x.y,
                i + 1
            )));
        }
        Ok(())
    }

    fn ray(&self) -> Ray {
        Ray {
            origin: self.x,
            direction: self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    /// Flight time since the start of the run.
    pub time: f64,
    pub obstacle: usize,
    pub point: Vec2,
    pub incoming_v: Vec2,
    pub outgoing_v: Vec2,
    pub cos_incidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    TimeReached,
    Escaped,
    GrazingHit,
    BounceLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub initial: PhaseState,
    #[serde(rename = "final")]
    pub final_state: PhaseState,
    pub elapsed: f64,
    pub collisions: Vec<Collision>,
    pub termination: Termination,
}

impl FlowResult {
    /// Trajectory polyline as `(t, x, y)` vertices: start, bounces, end.
    pub fn polyline(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::with_capacity(self.collisions.len() + 2);
        pts.push((0.0, self.initial.x.x, self.initial.x.y));
        for c in &self.collisions {
            pts.push((c.time, c.point.x, c.point.y));
        }
        let last_t = self.collisions.last().map_or(0.0, |c| c.time);
        if self.elapsed > last_t || self.collisions.is_empty() {
            pts.push((self.elapsed, self.final_state.x.x, self.final_state.x.y));
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Flow for a fixed time.
    Time(f64),
    /// Stop after this many reflections.
    Bounces(usize),
    /// Stop when leaving the centroid-centered ball of this radius.
    EscapeRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub grazing_tol: f64,
    pub max_bounces: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            grazing_tol: DEFAULT_GRAZING_TOL,
            max_bounces: 10_000,
        }
    }
}

/// Specular reflection `v - 2 (v.n) n`.
pub fn reflect(v: Vec2, normal: Vec2) -> Vec2 {
    v - normal * (2.0 * v.dot(normal))
}

/// Time at which the ray starting at `x` leaves the ball `|y - center| <= radius`.
pub(crate) fn ball_exit_time(x: Vec2, v: Vec2, center: Vec2, radius: f64) -> f64 {
    let q = x - center;
    let b = q.dot(v);
    let c = q.norm_sq() - radius * radius;
    if c >= 0.0 {
        return if b >= 0.0 { 0.0 } else { f64::INFINITY };
    }
    let disc = b * b - c;
    let root = disc.sqrt();
    // Larger root of t^2 + 2bt + c = 0, computed without cancellation.
    if b <= 0.0 {
        -b + root
    } else {
        -c / (b + root)
    }
}

/// Runs the non-grazing flow from `state` until `horizon`.
pub fn advance(
    set: &ObstacleSet,
    state: PhaseState,
    horizon: Horizon,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    state.validate(set)?;
    let center = set.centroid();
    let mut cur = state;
    let mut elapsed = 0.0;
    let mut collisions: Vec<Collision> = Vec::new();

    let finish = |cur: PhaseState, elapsed: f64, collisions: Vec<Collision>, t: Termination| {
        Ok(FlowResult {
            initial: state,
            final_state: cur,
            elapsed,
            collisions,
            termination: t,
        })
    };

    loop {
        if let Horizon::Bounces(n) = horizon {
            if collisions.len() >= n {
                return finish(cur, elapsed, collisions, Termination::BounceLimit);
            }
        }
        if collisions.len() >= opts.max_bounces {
            return finish(cur, elapsed, collisions, Termination::BounceLimit);
        }

        let hit = first_hit(set, &cur.ray())?;
        let leg = hit.map_or(f64::INFINITY, |h| h.time);

        match horizon {
            Horizon::Time(t_end) => {
                let remaining = t_end - elapsed;
                if remaining <= leg {
                    cur.x = cur.ray().at(remaining.max(0.0));
                    return finish(cur, t_end.max(elapsed), collisions, Termination::TimeReached);
                }
            }
            Horizon::EscapeRadius(r) => {
                let t_exit = ball_exit_time(cur.x, cur.v, center, r);
                if t_exit <= leg {
                    cur.x = cur.ray().at(t_exit);
                    return finish(cur, elapsed + t_exit, collisions, Termination::Escaped);
                }
            }
            Horizon::Bounces(_) => {}
        }

        let Some(hit) = hit else {
            return finish(cur, elapsed, collisions, Termination::Escaped);
        };

        elapsed += hit.time;
        let grazing = classify_hit(&hit, opts.grazing_tol) == HitKind::Grazing;
        let outgoing = reflect(cur.v, hit.inward_normal);
        collisions.push(Collision {
            time: elapsed,
            obstacle: hit.obstacle,
            point: hit.point,
            incoming_v: cur.v,
            outgoing_v: outgoing,
            cos_incidence: hit.cos_incidence,
        });
        if grazing {
            let final_state = PhaseState {
                x: hit.point,
                v: cur.v,
            };
            return finish(final_state, elapsed, collisions, Termination::GrazingHit);
        }
        cur = PhaseState {
            x: hit.point,
            v: outgoing,
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EscapeTime {
    /// Signed exit time: positive forward, negative backward.
    Finite(f64),
    Trapped,
    /// The trajectory ceased at a grazing hit at this signed time.
    Grazing(f64),
}

/// First exit time from the ball of radius `domain_radius` around the centroid.
pub fn escape_time(
    set: &ObstacleSet,
    state: PhaseState,
    domain_radius: f64,
    direction: TimeDirection,
    opts: &FlowOptions,
) -> Result<EscapeTime> {
    if state.x.dist(set.centroid()) > domain_radius {
        return Err(BilliardError::InvalidState(
            "state lies outside the escape domain".into(),
        ));
    }
    let (start, sign) = match direction {
        TimeDirection::Forward => (state, 1.0),
        TimeDirection::Backward => (state.reversed(), -1.0),
    };
    let res = advance(set, start, Horizon::EscapeRadius(domain_radius), opts)?;
    Ok(match res.termination {
        Termination::Escaped => EscapeTime::Finite(sign * res.elapsed),
        Termination::GrazingHit => EscapeTime::Grazing(sign * res.elapsed),
        Termination::BounceLimit | Termination::TimeReached => EscapeTime::Trapped,
    })
}

/// Boundary coordinates of an outgoing (post-reflection) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffCoord {
    pub obstacle: usize,
    /// Counter-clockwise arclength from polar angle 0.
    pub s: f64,
    /// Tangential component of the outgoing velocity.
    pub p: f64,
}

impl BirkhoffCoord {
    /// The outgoing phase state at this boundary point.
    pub fn to_state(&self, set: &ObstacleSet) -> PhaseState {
        let disc = &set.discs()[self.obstacle];
        let (point, inward, tangent) = boundary_point(disc, self.s);
        let normal_part = (1.0 - self.p * self.p).max(0.0).sqrt();
        PhaseState {
            x: point,
            v: tangent * self.p - inward * normal_part,
        }
    }

    pub fn from_state(set: &ObstacleSet, obstacle: usize, state: &PhaseState) -> Self {
        let disc = &set.discs()[obstacle];
        let theta = (state.x - disc.center).angle();
        let s = disc.arclength_of_angle(theta);
        let tangent = Vec2::new(-theta.sin(), theta.cos());
        BirkhoffCoord {
            obstacle,
            s,
            p: state.v.dot(tangent),
        }
    }

    /// Time-reversal involution `(s, p) -> (s, -p)`.
    pub fn reversed(&self) -> Self {
        BirkhoffCoord {
            p: -self.p,
            ..*self
        }
    }
}

/// One step of the billiard map between outgoing boundary states.
///
/// `None` when the trajectory escapes or its next hit is grazing.
pub fn boundary_map(set: &ObstacleSet, bc: &BirkhoffCoord, grazing_tol: f64) -> Option<BirkhoffCoord> {
    if !(bc.p.abs() < 1.0) {
        return None;
    }
    let state = bc.to_state(set);
    let hit = first_hit(set, &state.ray()).ok()??;
    if classify_hit(&hit, grazing_tol) == HitKind::Grazing {
        return None;
    }
    let out = PhaseState {
        x: hit.point,
        v: reflect(state.v, hit.inward_normal),
    };
    Some(BirkhoffCoord::from_state(set, hit.obstacle, &out))
}

/// Forward/backward trapped masks on a Birkhoff-coordinate grid.
///
/// Cell `(obstacle, i, a)` is centered at `s = i * circumference / n_s` and
/// `p = -1 + (a + 1/2) * 2 / n_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappedGrid {
    pub domain_radius: f64,
    pub n_s: usize,
    pub n_p: usize,
    pub n_bounce: usize,
    pub forward: Vec<bool>,
    pub backward: Vec<bool>,
    pub trapped: Vec<bool>,
}

impl TrappedGrid {
    pub fn index(&self, obstacle: usize, i: usize, a: usize) -> usize {
        (obstacle * self.n_s + i) * self.n_p + a
    }

    pub fn cell_center(&self, set: &ObstacleSet, obstacle: usize, i: usize, a: usize) -> BirkhoffCoord {
        cell_center(set, self.n_s, self.n_p, obstacle, i, a)
    }

    /// `(obstacle, i, a)` for every cell of the trapped mask.
    pub fn trapped_cells(&self) -> Vec<(usize, usize, usize)> {
        let per = self.n_s * self.n_p;
        self.trapped
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(idx, _)| (idx / per, (idx % per) / self.n_p, idx % self.n_p))
            .collect()
    }
}

fn cell_center(set: &ObstacleSet, n_s: usize, n_p: usize, obstacle: usize, i: usize, a: usize) -> BirkhoffCoord {
    let circ = set.discs()[obstacle].circumference();
    BirkhoffCoord {
        obstacle,
        s: i as f64 * circ / n_s as f64,
        p: -1.0 + (a as f64 + 0.5) * 2.0 / n_p as f64,
    }
}

fn survives(set: &ObstacleSet, mut bc: BirkhoffCoord, n_bounce: usize, grazing_tol: f64) -> bool {
    for _ in 0..n_bounce {
        match boundary_map(set, &bc, grazing_tol) {
            Some(next) => bc = next,
            None => return false,
        }
    }
    true
}

/// Approximates the forward-trapped, backward-trapped and trapped sets by
/// iterating the boundary map `n_bounce` times from every cell center.
///
/// Backward iterates use the time-reversal `(s, p) -> (s, -p)`.
pub fn trapped_set_grid(
    set: &ObstacleSet,
    domain_radius: f64,
    n_s: usize,
    n_p: usize,
    n_bounce: usize,
    grazing_tol: f64,
) -> TrappedGrid {
    if !crate::geometry::no_eclipse_check(set).holds {
        log::warn!("obstacle set violates the no-eclipse condition");
    }
    let total = set.len() * n_s * n_p;
    let (forward, backward): (Vec<bool>, Vec<bool>) = (0..total)
        .into_par_iter()
        .map(|idx| {
            let obstacle = idx / (n_s * n_p);
            let i = (idx % (n_s * n_p)) / n_p;
            let a = idx % n_p;
            let bc = cell_center(set, n_s, n_p, obstacle, i, a);
            (
                survives(set, bc, n_bounce, grazing_tol),
                survives(set, bc.reversed(), n_bounce, grazing_tol),
            )
        })
        .unzip();
    let trapped = forward.iter().zip(&backward).map(|(f, b)| *f && *b).collect();
    TrappedGrid {
        domain_radius,
        n_s,
        n_p,
        n_bounce,
        forward,
        backward,
        trapped,
    }
}

/// Largest `|v.u - v'.u|` over random boundary points, directions and
/// tangent vectors `u`, where `v'` is the reflected direction.
pub fn contact_reflection_check(set: &ObstacleSet, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let obstacle = rng.random_range(0..set.len());
        let disc = &set.discs()[obstacle];
        let s = rng.random_range(0.0..disc.circumference());
        let (_, inward, tangent) = boundary_point(disc, s);
        let v = Vec2::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
        if v.dot(inward) == 0.0 {
            continue;
        }
        let u = tangent * rng.random_range(-1.0..1.0);
        let v_ref = reflect(v, inward);
        worst = worst.max((v.dot(u) - v_ref.dot(u)).abs());
    }
    worst
}
