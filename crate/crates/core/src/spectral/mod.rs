//! Weighted zeta functions, the Fredholm determinant, resonances and the
//! escape-time resolvent.

mod det;
mod resolvent;
mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use det::{det_grid, fredholm_det, Determinant, GridPoint};
pub use resolvent::{
    resolvent_apply, resolvent_apply_with, resolvent_identity_defect, resolvent_matrix_coeff,
    BumpCutoff, MatrixCoefficient, ResolventValue, TestFunction,
};
pub use search::{find_resonances, residue, Region, Resonance};

use crate::error::{BilliardError, Result};
use crate::orbits::OrbitDb;
use crate::tangent::det_from_multiplier;
use crate::weights::{integrate_along, Weight};

/// Truncation of the periodic-orbit sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZetaConfig {
    /// Topological truncation: primitive orbits and pseudo-orbits with at
    /// most this many bounces.
    pub max_len: usize,
    /// Hard cap on repetitions of a primitive orbit.
    pub max_rep: u32,
    /// Repetitions stop once a term falls below `tail_tol` times the partial sum.
    pub tail_tol: f64,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        ZetaConfig {
            max_len: 6,
            max_rep: 200,
            tail_tol: 1e-16,
        }
    }
}

impl ZetaConfig {
    pub fn with_max_len(max_len: usize) -> Self {
        ZetaConfig {
            max_len,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 2 {
            return Err(BilliardError::InvalidConfig(format!(
                "max_len must be at least 2, got {}",
                self.max_len
            )));
        }
        if self.max_rep < 1 {
            return Err(BilliardError::InvalidConfig("max_rep must be at least 1".into()));
        }
        if !(self.tail_tol >= 0.0) {
            return Err(BilliardError::InvalidConfig("tail_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Direct periodic-orbit sum
/// `Z_f(lambda) = sum_p sum_k chi^{k n_p} e^{-lambda k T_p} (int_p f) / |det(1 - P_p^k)|`.
///
/// Only meaningful where the sum converges; use [`Determinant::zeta`] for the
/// continuation.
pub fn zeta_weighted(lambda: Complex64, weight: &Weight, db: &OrbitDb, cfg: &ZetaConfig) -> Result<Complex64> {
    cfg.validate()?;
    if db.is_empty() {
        return Err(BilliardError::EmptyDb);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for orbit in db.truncated(cfg.max_len) {
        let integral = integrate_along(orbit, weight)?;
        if integral == Complex64::new(0.0, 0.0) {
            continue;
        }
        let lam = orbit.hyp.lambda;
        if !(lam.abs() > 1.0) {
            return Err(BilliardError::ParabolicOrbit { trace: orbit.hyp.trace });
        }
        let chi_n = weight.reflection_factor.powu(orbit.bounces() as u32);
        if (-lambda.re * orbit.t_prim).exp() * chi_n.norm() >= lam.abs() {
            log::warn!(
                "zeta sum diverges for orbit {} at lambda = {}; result is a truncation artifact",
                orbit.itinerary,
                lambda
            );
        }
        let mut partial = Complex64::new(0.0, 0.0);
        let mut chi_pow = Complex64::new(1.0, 0.0);
        for k in 1..=cfg.max_rep {
            chi_pow *= chi_n;
            let kf = k as f64;
            let log_det = det_from_multiplier(lam, k).log_abs;
            let term = integral * chi_pow * (-lambda * (kf * orbit.t_prim) - log_det).exp();
            partial += term;
            if term.norm() < cfg.tail_tol * partial.norm() {
                break;
            }
        }
        total += partial;
    }
    Ok(total)
}
