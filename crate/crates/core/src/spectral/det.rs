//! Cycle-expanded Fredholm determinant.
//!
//! For a primitive orbit with signed multiplier `Lambda`, `n` bounces and
//! period `T`,
//!
//! ```text
//! 1 / |det(1 - P^k)| = sum_{j>=0} (j + 1) (|Lambda|^{-1} Lambda^{-j})^k
//! ```
//!
//! so `exp(-sum_k t^k / (k |det(1 - P^k)|)) = prod_j (1 - t |Lambda|^{-1} Lambda^{-j})^{j+1}`
//! with `t = chi^n e^{-lambda T}`. Expanding each orbit factor in powers of
//! `t` and multiplying the factors out gives `d(lambda) = sum_i c_i e^{-lambda tau_i}`,
//! one term per pseudo-orbit (a multiset of primitive orbits), kept when its
//! total bounce count is at most `max_len`.
//!
//! Tagging each orbit with `e^{s int_p f}` and differentiating in `s` gives
//! the weighted zeta function `Z_f = -(sum_i c_i F_i e^{-lambda tau_i}) / d`,
//! with `F_i` the summed orbit integrals of the pseudo-orbit. For `f = 1`
//! this is `Z_1 = d'/d`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::search::Region;
use super::ZetaConfig;
use crate::error::{BilliardError, Result};
use crate::orbits::OrbitDb;
use crate::weights::{integrate_along, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    /// `ln |c_i|`.
    ln_mag: f64,
    /// `c_i / |c_i|`.
    phase: Complex64,
    tau: f64,
    /// Summed weight integral of the pseudo-orbit.
    flux: Complex64,
    len: usize,
}

impl Term {
    #[inline]
    fn value(&self, lambda: Complex64) -> Complex64 {
        self.phase * (Complex64::new(self.ln_mag, 0.0) - lambda * self.tau).exp()
    }
}

/// `d(lambda)` as a finite exponential sum, optionally carrying a weight.
#[derive(Debug, Clone)]
pub struct Determinant {
    terms: Vec<Term>,
    max_len: usize,
    t_max: f64,
}

/// Coefficients of `prod_j (1 - u a^j)^{j+1}` up to `u^degree`, `a = sign / |Lambda|`.
fn orbit_factor_coeffs(lambda: f64, degree: usize) -> Vec<f64> {
    let a = 1.0 / lambda;
    let ln_l = lambda.abs().ln();
    // Smallest J with sum_{j<=J} (j+1) >= degree, plus enough extra factors
    // to push the neglected ones below double precision.
    let mut needed = 0usize;
    let mut count = 0usize;
    while count < degree {
        needed += 1;
        count += needed;
    }
    let extra = (37.0 / ln_l).ceil() as usize + 1;
    let j_max = needed + extra;
    let mut c = vec![0.0; degree + 1];
    c[0] = 1.0;
    let mut aj = 1.0f64;
    for j in 0..=j_max {
        if aj == 0.0 {
            break;
        }
        for _ in 0..=j {
            for m in (1..=degree).rev() {
                c[m] -= aj * c[m - 1];
            }
        }
        aj *= a;
    }
    c
}

impl Determinant {
    /// Expansion of `d` for `f = 1` and unit reflection factor.
    pub fn new(db: &OrbitDb, cfg: &ZetaConfig) -> Result<Self> {
        Self::weighted(db, cfg, &Weight::one())
    }

    /// Expansion with the weight's reflection factor in `t`, and its orbit
    /// integrals in the flux.
    pub fn weighted(db: &OrbitDb, cfg: &ZetaConfig, weight: &Weight) -> Result<Self> {
        cfg.validate()?;
        if db.is_empty() {
            return Err(BilliardError::EmptyDb);
        }
        let n = cfg.max_len;
        let mut terms = vec![Term {
            ln_mag: 0.0,
            phase: Complex64::new(1.0, 0.0),
            tau: 0.0,
            flux: Complex64::new(0.0, 0.0),
            len: 0,
        }];
        let mut t_max: f64 = 0.0;
        for orbit in db.truncated(n) {
            let lam = orbit.hyp.lambda;
            if !(lam.abs() > 1.0) {
                return Err(BilliardError::ParabolicOrbit { trace: orbit.hyp.trace });
            }
            t_max = t_max.max(orbit.t_prim);
            let np = orbit.bounces();
            let integral = integrate_along(orbit, weight)?;
            let chi_n = weight.reflection_factor.powu(np as u32);
            let coeffs = orbit_factor_coeffs(lam, n / np);
            // ln|coefficient of t^m| and its phase.
            let ln_abs_l = lam.abs().ln();
            let per_m: Vec<(usize, f64, Complex64)> = coeffs
                .iter()
                .enumerate()
                .skip(1)
                .filter(|(_, &c)| c != 0.0)
                .map(|(m, &c)| {
                    let mf = m as f64;
                    let (chi_abs, chi_arg) = chi_n.to_polar();
                    let ln = c.abs().ln() - mf * ln_abs_l + mf * chi_abs.ln();
                    let phase = Complex64::from_polar(c.signum(), mf * chi_arg);
                    (m, ln, phase)
                })
                .filter(|(_, ln, _)| ln.is_finite())
                .collect();
            let mut next = Vec::with_capacity(terms.len() * 2);
            for t in &terms {
                next.push(*t);
                for &(m, ln, phase) in &per_m {
                    let len = t.len + m * np;
                    if len > n {
                        break;
                    }
                    let mf = m as f64;
                    next.push(Term {
                        ln_mag: t.ln_mag + ln,
                        phase: t.phase * phase,
                        tau: t.tau + mf * orbit.t_prim,
                        flux: t.flux + integral * mf,
                        len,
                    });
                }
            }
            terms = next;
        }
        Ok(Determinant {
            terms,
            max_len: n,
            t_max,
        })
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Number of pseudo-orbit terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Longest primitive period in the expansion.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.value(lambda)).sum()
    }

    /// `d(lambda) - 1`: the sum without the empty pseudo-orbit, accurate to
    /// relative precision even where `d` is close to 1.
    pub fn eval_minus_one(&self, lambda: Complex64) -> Complex64 {
        self.terms.iter().filter(|t| t.len > 0).map(|t| t.value(lambda)).sum()
    }

    /// `d^{(order)}(lambda)`, differentiating the exponential sum termwise.
    pub fn derivative(&self, lambda: Complex64, order: u32) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.value(lambda) * (-t.tau).powi(order as i32))
            .sum()
    }

    /// `sum_i |c_i e^{-lambda tau_i}| |tau_i|^order`: the scale against which
    /// cancellation in `d^{(order)}` is judged.
    pub fn magnitude(&self, lambda: Complex64, order: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.ln_mag - lambda.re * t.tau).exp() * t.tau.abs().powi(order as i32))
            .sum()
    }

    /// Continued weighted zeta function `-(sum_i c_i F_i e^{-lambda tau_i}) / d(lambda)`.
    pub fn zeta(&self, lambda: Complex64) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let v = t.value(lambda);
            den += v;
            num += v * t.flux;
        }
        -num / den
    }
}

/// `d(lambda)` for `f = 1`.
pub fn fredholm_det(lambda: Complex64, db: &OrbitDb, cfg: &ZetaConfig) -> Result<Complex64> {
    Ok(Determinant::new(db, cfg)?.eval(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub re: f64,
    pub im: f64,
    pub d_re: f64,
    pub d_im: f64,
}

/// Samples `d` on an `nx x ny` grid of points spanning `region` (corners included).
pub fn det_grid(det: &Determinant, region: &Region, nx: usize, ny: usize) -> Vec<GridPoint> {
    let nx = nx.max(2);
    let ny = ny.max(2);
    (0..ny * nx)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / nx, idx % nx);
            let re = region.re_min + (region.re_max - region.re_min) * i as f64 / (nx - 1) as f64;
            let im = region.im_min + (region.im_max - region.im_min) * j as f64 / (ny - 1) as f64;
            let d = det.eval(Complex64::new(re, im));
            GridPoint {
                re,
                im,
                d_re: d.re,
                d_im: d.im,
            }
        })
        .collect()
}
