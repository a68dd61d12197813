//! Periodic orbits as critical points of the cyclic length functional
//! `L(theta_1..theta_n) = sum_k |q_{k+1}(theta_{k+1}) - q_k(theta_k)|`.

use serde::{Deserialize, Serialize};

use super::itinerary::Itinerary;
use crate::error::{BilliardError, Result};
use crate::flow::{reflect, BirkhoffCoord, PhaseState};
use crate::geometry::{first_hit, Disc, ObstacleSet, Ray};
use crate::tangent::{cycle_product, hyperbolic_data, HyperbolicData, JacobiMatrix};
use crate::vec2::Vec2;
use crate::DEFAULT_GRAZING_TOL;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on `max_k |dL/dtheta_k|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for the Hessian (radians).
    pub hessian_step: f64,
    pub grazing_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 100,
            hessian_step: 1e-6,
            grazing_tol: DEFAULT_GRAZING_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub itinerary: Itinerary,
    /// Polar angle of each bounce point on its obstacle.
    pub thetas: Vec<f64>,
    /// Post-reflection state at each bounce.
    pub states: Vec<PhaseState>,
    /// `legs[k]`: flight length from bounce `k` to bounce `k + 1`.
    pub legs: Vec<f64>,
    pub cos_incidence: Vec<f64>,
    pub t_prim: f64,
    pub monodromy: JacobiMatrix,
    pub hyp: HyperbolicData,
    pub newton_residual: f64,
    pub set_hash: String,
}

impl PeriodicOrbit {
    /// Number of reflections per primitive period.
    pub fn bounces(&self) -> usize {
        self.itinerary.len()
    }

    pub fn birkhoff_start(&self, set: &ObstacleSet) -> BirkhoffCoord {
        BirkhoffCoord::from_state(set, self.itinerary.symbols()[0], &self.states[0])
    }
}

fn bounce_point(disc: &Disc, theta: f64) -> Vec2 {
    disc.center + Vec2::from_angle(theta) * disc.radius
}

struct LengthFunctional<'a> {
    discs: Vec<&'a Disc>,
}

impl LengthFunctional<'_> {
    fn points(&self, thetas: &[f64]) -> Vec<Vec2> {
        self.discs
            .iter()
            .zip(thetas)
            .map(|(d, &t)| bounce_point(d, t))
            .collect()
    }

    fn value(&self, thetas: &[f64]) -> f64 {
        let q = self.points(thetas);
        let n = q.len();
        (0..n).map(|k| q[k].dist(q[(k + 1) % n])).sum()
    }

    /// `dL/dtheta_k = r_k t_k . (u_{k-1,k} - u_{k,k+1})` with `u` the unit leg directions.
    fn gradient(&self, thetas: &[f64]) -> Vec<f64> {
        let q = self.points(thetas);
        let n = q.len();
        let u: Vec<Vec2> = (0..n).map(|k| (q[(k + 1) % n] - q[k]).normalized()).collect();
        (0..n)
            .map(|k| {
                let prev = u[(k + n - 1) % n];
                let tangent = Vec2::from_angle(thetas[k]).perp();
                self.discs[k].radius * tangent.dot(prev - u[k])
            })
            .collect()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn seed(discs: &[&Disc], functional: &LengthFunctional) -> Vec<f64> {
    let n = discs.len();
    let mut thetas: Vec<f64> = (0..n)
        .map(|k| (discs[(k + 1) % n].center - discs[k].center).angle())
        .collect();
    // One coordinate-descent sweep.
    for k in 0..n {
        let center = thetas[k];
        let best = golden_min(
            |t| {
                let mut trial = thetas.clone();
                trial[k] = t;
                functional.value(&trial)
            },
            center - std::f64::consts::FRAC_PI_2,
            center + std::f64::consts::FRAC_PI_2,
            80,
        );
        thetas[k] = best;
    }
    thetas
}

/// Locates the periodic orbit with the given itinerary by damped Newton
/// iteration on `grad L = 0`, then checks it against the obstacles.
pub fn find_orbit(set: &ObstacleSet, itinerary: &Itinerary, opts: &NewtonOptions) -> Result<PeriodicOrbit> {
    if itinerary.max_symbol() >= set.len() {
        return Err(BilliardError::InvalidItinerary(format!(
            "itinerary {itinerary} references obstacle {} of {}",
            itinerary.max_symbol() + 1,
            set.len()
        )));
    }
    let discs: Vec<&Disc> = itinerary.symbols().iter().map(|&i| &set.discs()[i]).collect();
    let functional = LengthFunctional { discs: discs.clone() };
    let n = discs.len();

    let mut thetas = seed(&discs, &functional);
    let mut grad = functional.gradient(&thetas);
    let mut residual = inf_norm(&grad);
    let h = opts.hessian_step;
    let mut iter = 0;
    while residual >= opts.tol {
        if iter >= opts.max_iter {
            return Err(BilliardError::NewtonDiverged {
                itinerary: itinerary.to_string(),
                residual,
            });
        }
        iter += 1;
        let mut hess = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut tp = thetas.clone();
            let mut tm = thetas.clone();
            tp[j] += h;
            tm[j] -= h;
            let gp = functional.gradient(&tp);
            let gm = functional.gradient(&tm);
            for i in 0..n {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve(hess, neg).ok_or_else(|| BilliardError::NewtonDiverged {
            itinerary: itinerary.to_string(),
            residual,
        })?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = thetas.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
            let g = functional.gradient(&trial);
            let r = inf_norm(&g);
            if r < residual || alpha < 1e-6 {
                thetas = trial;
                grad = g;
                residual = r;
                break;
            }
            alpha *= 0.5;
        }
    }
    let thetas: Vec<f64> = thetas
        .iter()
        .map(|t| t.rem_euclid(std::f64::consts::TAU))
        .collect();
    orbit_from_thetas(set, itinerary, &thetas, residual, opts.grazing_tol)
}

/// Builds and checks the orbit through the given bounce angles.
pub fn orbit_from_thetas(
    set: &ObstacleSet,
    itinerary: &Itinerary,
    thetas: &[f64],
    newton_residual: f64,
    grazing_tol: f64,
) -> Result<PeriodicOrbit> {
    let syms = itinerary.symbols();
    let n = syms.len();
    if thetas.len() != n {
        return Err(BilliardError::InvalidItinerary(format!(
            "{} angles for itinerary {itinerary}",
            thetas.len()
        )));
    }
    let discs: Vec<&Disc> = syms.iter().map(|&i| &set.discs()[i]).collect();
    let q: Vec<Vec2> = discs.iter().zip(thetas).map(|(d, &t)| bounce_point(d, t)).collect();
    let legs: Vec<f64> = (0..n).map(|k| q[k].dist(q[(k + 1) % n])).collect();
    let dirs: Vec<Vec2> = (0..n).map(|k| (q[(k + 1) % n] - q[k]) * (1.0 / legs[k])).collect();

    let mut cosines = Vec::with_capacity(n);
    for k in 0..n {
        let inward = -Vec2::from_angle(thetas[k]);
        let incoming = dirs[(k + n - 1) % n];
        let c = incoming.dot(inward);
        if c <= 0.0 {
            // The stationary path passes through the obstacle instead of reflecting.
            return Err(BilliardError::OccludedLeg {
                itinerary: itinerary.to_string(),
                leg: (k + n - 1) % n,
            });
        }
        if c < grazing_tol {
            return Err(BilliardError::GrazingOrbit {
                itinerary: itinerary.to_string(),
                cos_incidence: c,
            });
        }
        cosines.push(c);
    }

    for k in 0..n {
        let ray = Ray {
            origin: q[k],
            direction: dirs[k],
        };
        let occluded = || BilliardError::OccludedLeg {
            itinerary: itinerary.to_string(),
            leg: k,
        };
        let hit = first_hit(set, &ray).map_err(|_| occluded())?.ok_or_else(occluded)?;
        if hit.obstacle != syms[(k + 1) % n] || (hit.time - legs[k]).abs() > 1e-9 * legs[k].max(1.0) {
            return Err(occluded());
        }
    }

    let states: Vec<PhaseState> = (0..n).map(|k| PhaseState { x: q[k], v: dirs[k] }).collect();
    let t_prim: f64 = legs.iter().sum();
    let curv: Vec<f64> = discs.iter().map(|d| d.curvature()).collect();
    let monodromy = cycle_product(&curv, &cosines, &legs, grazing_tol)?;
    let hyp = hyperbolic_data(&monodromy, t_prim)?;
    Ok(PeriodicOrbit {
        itinerary: itinerary.clone(),
        thetas: thetas.to_vec(),
        states,
        legs,
        cos_incidence: cosines,
        t_prim,
        monodromy,
        hyp,
        newton_residual,
        set_hash: set.set_hash(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// `max_k |reflect(incoming_k) - outgoing_k|`.
    pub specular_defect: f64,
    pub occlusion_ok: bool,
    /// Smallest cosine of incidence along the orbit.
    pub grazing_margin: f64,
    /// `|t_prim - sum of recomputed legs|`.
    pub period_defect: f64,
    pub set_hash_ok: bool,
    pub passed: bool,
}

/// Recomputes every orbit invariant from the stored angles and the given set.
pub fn verify_orbit(set: &ObstacleSet, orbit: &PeriodicOrbit, grazing_tol: f64) -> VerifyReport {
    let syms = orbit.itinerary.symbols();
    let n = syms.len();
    let set_hash_ok = orbit.set_hash == set.set_hash();
    if syms.iter().any(|&s| s >= set.len()) || orbit.thetas.len() != n {
        return VerifyReport {
            specular_defect: f64::INFINITY,
            occlusion_ok: false,
            grazing_margin: 0.0,
            period_defect: f64::INFINITY,
            set_hash_ok,
            passed: false,
        };
    }
    let q: Vec<Vec2> = syms
        .iter()
        .zip(&orbit.thetas)
        .map(|(&i, &t)| bounce_point(&set.discs()[i], t))
        .collect();
    let legs: Vec<f64> = (0..n).map(|k| q[k].dist(q[(k + 1) % n])).collect();
    let dirs: Vec<Vec2> = (0..n).map(|k| (q[(k + 1) % n] - q[k]) * (1.0 / legs[k])).collect();
    let mut specular_defect: f64 = 0.0;
    let mut grazing_margin = f64::INFINITY;
    for k in 0..n {
        let inward = -Vec2::from_angle(orbit.thetas[k]);
        let incoming = dirs[(k + n - 1) % n];
        specular_defect = specular_defect.max(reflect(incoming, inward).dist(dirs[k]));
        grazing_margin = grazing_margin.min(incoming.dot(inward));
    }
    let occlusion_ok = (0..n).all(|k| {
        let ray = Ray {
            origin: q[k],
            direction: dirs[k],
        };
        matches!(first_hit(set, &ray), Ok(Some(h))
            if h.obstacle == syms[(k + 1) % n] && (h.time - legs[k]).abs() <= 1e-9 * legs[k].max(1.0))
    });
    let period_defect = (orbit.t_prim - legs.iter().sum::<f64>()).abs();
    let passed = specular_defect < 1e-10
        && occlusion_ok
        && grazing_margin >= grazing_tol
        && period_defect < 1e-10
        && set_hash_ok;
    VerifyReport {
        specular_defect,
        occlusion_ok,
        grazing_margin,
        period_defect,
        set_hash_ok,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{advance, FlowOptions, Horizon};

    fn two_disk() -> ObstacleSet {
        ObstacleSet::new(vec![
            Disc::new(Vec2::new(0.0, 0.0), 1.0),
            Disc::new(Vec2::new(6.0, 0.0), 1.0),
        ])
        .unwrap()
    }

    pub(crate) fn three_disk() -> ObstacleSet {
        ObstacleSet::new(vec![
            Disc::new(Vec2::new(0.0, 0.0), 1.0),
            Disc::new(Vec2::new(6.0, 0.0), 1.0),
            Disc::new(Vec2::new(3.0, 3.0 * 3f64.sqrt()), 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn two_disk_axial_orbit() {
        let set = two_disk();
        let it: Itinerary = "12".parse().unwrap();
        let orbit = find_orbit(&set, &it, &NewtonOptions::default()).unwrap();
        assert!(orbit.states[0].x.dist(Vec2::new(1.0, 0.0)) < 1e-12);
        assert!(orbit.states[1].x.dist(Vec2::new(5.0, 0.0)) < 1e-12);
        assert!((orbit.t_prim - 8.0).abs() < 1e-12);
        assert!((orbit.hyp.trace - 98.0).abs() < 1e-9);
        assert!(orbit.newton_residual < 1e-12);
    }

    #[test]
    fn three_disk_face_orbit_matches_two_disk() {
        let set = three_disk();
        let it: Itinerary = "12".parse().unwrap();
        let orbit = find_orbit(&set, &it, &NewtonOptions::default()).unwrap();
        assert!((orbit.t_prim - 8.0).abs() < 1e-12);
        assert!((orbit.hyp.trace - 98.0).abs() < 1e-9);
    }

    #[test]
    fn verify_detects_perturbation_and_foreign_set() {
        let set = three_disk();
        let it: Itinerary = "123".parse().unwrap();
        let orbit = find_orbit(&set, &it, &NewtonOptions::default()).unwrap();
        let rep = verify_orbit(&set, &orbit, 1e-9);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.specular_defect < 1e-10);

        let mut bent = orbit.clone();
        bent.thetas[0] += 1e-3;
        let rep = verify_orbit(&set, &bent, 1e-9);
        assert!(!rep.passed);
        assert!(rep.specular_defect > 1e-4 && rep.specular_defect < 1e-2);

        let moved = set.transformed(0.0, Vec2::new(0.5, 0.0));
        assert!(!verify_orbit(&moved, &orbit, 1e-9).passed);
    }

    #[test]
    fn simulated_orbit_closes() {
        let set = three_disk();
        for label in ["12", "123", "1213", "12323"] {
            let it: Itinerary = label.parse().unwrap();
            let orbit = find_orbit(&set, &it, &NewtonOptions::default()).unwrap();
            let res = advance(&set, orbit.states[0], Horizon::Time(orbit.t_prim), &FlowOptions::default()).unwrap();
            // Arrival at the first bounce point, identified with its outgoing state by reflection.
            let fin = res.final_state;
            let inward = -Vec2::from_angle(orbit.thetas[0]);
            assert!(fin.x.dist(orbit.states[0].x) < 1e-8, "{label}");
            let s0 = orbit.states[0].v;
            assert!(
                reflect(fin.v, inward).dist(s0) < 1e-8 || fin.v.dist(s0) < 1e-8,
                "{label}"
            );
            assert!(res.collisions.len() + 1 >= it.len());
        }
    }

    #[test]
    fn occluded_itinerary_rejected() {
        // Three collinear discs: the middle one blocks 1 -> 3.
        let set = ObstacleSet::new(vec![
            Disc::new(Vec2::new(0.0, 0.0), 1.0),
            Disc::new(Vec2::new(5.0, 0.0), 1.0),
            Disc::new(Vec2::new(10.0, 0.0), 1.0),
        ])
        .unwrap();
        let it: Itinerary = "13".parse().unwrap();
        let err = find_orbit(&set, &it, &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, BilliardError::OccludedLeg { .. }), "{err:?}");
    }
}
