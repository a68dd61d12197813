//! Linearized dynamics in transverse Jacobi coordinates
//! `(perpendicular displacement, perpendicular velocity)`.
//!
//! Only conjugation-invariant quantities (trace, multipliers,
//! `|det(1 - P^k)|`) leave this module; the coordinates themselves differ
//! from the Birkhoff-coordinate oracle [`fd_monodromy`].

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};
use crate::flow::{boundary_map, BirkhoffCoord};
use crate::geometry::ObstacleSet;
use crate::orbits::PeriodicOrbit;
use crate::vec2::Vec2;

/// `|trace| <= 2 + PARABOLIC_TOL` is treated as non-hyperbolic.
pub const PARABOLIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiMatrix(pub [[f64; 2]; 2]);

impl JacobiMatrix {
    pub const IDENTITY: JacobiMatrix = JacobiMatrix([[1.0, 0.0], [0.0, 1.0]]);

    /// `ad - bc` with Kahan's compensated evaluation, accurate to a few ulps
    /// of the result for the stored entries.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        let w = m[0][1] * m[1][0];
        let err = (-m[0][1]).mul_add(m[1][0], w);
        m[0][0].mul_add(m[1][1], -w) + err
    }

    /// `|ad| + |bc|`: the scale of roundoff in [`det`](Self::det) caused by
    /// rounding the entries themselves.
    pub fn det_scale(&self) -> f64 {
        let m = &self.0;
        (m[0][0] * m[1][1]).abs() + (m[0][1] * m[1][0]).abs()
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        let m = &self.0;
        Vec2::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
    }

    pub fn powi(&self, k: u32) -> JacobiMatrix {
        (0..k).fold(JacobiMatrix::IDENTITY, |acc, _| acc * *self)
    }
}

impl Mul for JacobiMatrix {
    type Output = JacobiMatrix;
    fn mul(self, o: JacobiMatrix) -> JacobiMatrix {
        let (a, b) = (&self.0, &o.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        JacobiMatrix(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicData {
    /// Unstable multiplier, carrying the sign of the trace.
    pub lambda: f64,
    pub trace: f64,
    pub e_s: Vec2,
    pub e_u: Vec2,
    /// `ln|lambda| / period`.
    pub lyapunov: f64,
}

pub fn free_flight_matrix(length: f64) -> JacobiMatrix {
    JacobiMatrix([[1.0, length], [0.0, 1.0]])
}

/// Reflection off a boundary of curvature `curvature` at incidence cosine `cos_incidence`.
pub fn collision_matrix(curvature: f64, cos_incidence: f64, grazing_tol: f64) -> Result<JacobiMatrix> {
    if cos_incidence < grazing_tol {
        return Err(BilliardError::NearGrazing {
            cos_incidence,
            tol: grazing_tol,
        });
    }
    Ok(JacobiMatrix([
        [-1.0, 0.0],
        [-2.0 * curvature / cos_incidence, -1.0],
    ]))
}

/// Product `C_0 F_{n-1} ... C_1 F_0` for a closed bounce sequence.
///
/// `legs[k]` is the flight from bounce `k` to bounce `k+1 (mod n)`; the
/// product is based just after bounce 0.
pub(crate) fn cycle_product(
    curvatures: &[f64],
    cosines: &[f64],
    legs: &[f64],
    grazing_tol: f64,
) -> Result<JacobiMatrix> {
    let n = legs.len();
    let mut m = JacobiMatrix::IDENTITY;
    for k in 0..n {
        let next = (k + 1) % n;
        let c = collision_matrix(curvatures[next], cosines[next], grazing_tol)?;
        m = c * free_flight_matrix(legs[k]) * m;
    }
    Ok(m)
}

/// Linearized Poincare map of the primitive orbit, from its bounce data.
pub fn monodromy(set: &ObstacleSet, orbit: &PeriodicOrbit, grazing_tol: f64) -> Result<JacobiMatrix> {
    let curv: Vec<f64> = orbit
        .itinerary
        .symbols()
        .iter()
        .map(|&i| set.discs()[i].curvature())
        .collect();
    cycle_product(&curv, &orbit.cos_incidence, &orbit.legs, grazing_tol)
}

/// `|det(1 - P^k)|`, stored as its natural logarithm so that large
/// repetition counts do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetMagnitude {
    pub log_abs: f64,
}

impl DetMagnitude {
    /// `exp(log_abs)`; infinite beyond the double range.
    pub fn value(&self) -> f64 {
        self.log_abs.exp()
    }
}

/// Signed unstable multiplier from the trace of a unimodular matrix.
pub fn unstable_multiplier(trace: f64) -> Result<f64> {
    if trace.abs() <= 2.0 + PARABOLIC_TOL {
        return Err(BilliardError::ParabolicOrbit { trace });
    }
    let t = trace.abs();
    Ok(trace.signum() * 0.5 * (t + (t * t - 4.0).sqrt()))
}

/// `|det(1 - P^k)| = |Lambda|^k (1 - Lambda^{-k})^2`, evaluated in the log domain.
pub fn det_id_minus_power(m: &JacobiMatrix, k: u32) -> Result<DetMagnitude> {
    let lambda = unstable_multiplier(m.trace())?;
    Ok(det_from_multiplier(lambda, k))
}

pub(crate) fn det_from_multiplier(lambda: f64, k: u32) -> DetMagnitude {
    let kf = k as f64;
    let log_abs_lambda = lambda.abs().ln();
    // Lambda^{-k}, with sign; underflows harmlessly to 0.
    let inv_pow = lambda.signum().powi(k as i32) * (-kf * log_abs_lambda).exp();
    DetMagnitude {
        log_abs: kf * log_abs_lambda + 2.0 * (1.0 - inv_pow).abs().ln(),
    }
}

fn eigenvector(m: &JacobiMatrix, mu: f64) -> Vec2 {
    let a = &m.0;
    let v1 = Vec2::new(a[0][1], mu - a[0][0]);
    let v2 = Vec2::new(mu - a[1][1], a[1][0]);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    v.normalized()
}

pub fn hyperbolic_data(m: &JacobiMatrix, period: f64) -> Result<HyperbolicData> {
    let trace = m.trace();
    let lambda = unstable_multiplier(trace)?;
    Ok(HyperbolicData {
        lambda,
        trace,
        e_u: eigenvector(m, lambda),
        e_s: eigenvector(m, 1.0 / lambda),
        lyapunov: lambda.abs().ln() / period,
    })
}

fn wrapped_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

/// Central-difference Jacobian of the full-period return map in Birkhoff
/// coordinates `(s, p)` at the orbit's first bounce.
///
/// Independent of the Jacobi-coordinate product: it only uses
/// [`boundary_map`].
pub fn fd_monodromy(set: &ObstacleSet, orbit: &PeriodicOrbit, h: f64, grazing_tol: f64) -> Result<JacobiMatrix> {
    let base = orbit.birkhoff_start(set);
    let n = orbit.itinerary.len();
    let circ = set.discs()[base.obstacle].circumference();
    let ret = |bc: BirkhoffCoord| -> Result<BirkhoffCoord> {
        let mut cur = bc;
        for _ in 0..n {
            cur = boundary_map(set, &cur, grazing_tol).ok_or_else(|| {
                BilliardError::NonConvergent("perturbed orbit escaped during finite differencing".into())
            })?;
        }
        if cur.obstacle != base.obstacle {
            return Err(BilliardError::NonConvergent(
                "perturbed orbit changed itinerary".into(),
            ));
        }
        Ok(cur)
    };
    let shift = |ds: f64, dp: f64| BirkhoffCoord {
        obstacle: base.obstacle,
        s: (base.s + ds).rem_euclid(circ),
        p: base.p + dp,
    };
    let sp = ret(shift(h, 0.0))?;
    let sm = ret(shift(-h, 0.0))?;
    let pp = ret(shift(0.0, h))?;
    let pm = ret(shift(0.0, -h))?;
    let inv = 0.5 / h;
    Ok(JacobiMatrix([
        [wrapped_diff(sp.s, sm.s, circ) * inv, wrapped_diff(pp.s, pm.s, circ) * inv],
        [(sp.p - sm.p) * inv, (pp.p - pm.p) * inv],
    ]))
}
