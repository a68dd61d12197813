//! Zeros of the determinant by the argument principle, Newton polishing and
//! contour-integral residues.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::det::Determinant;
use super::ZetaConfig;
use crate::error::{BilliardError, Result};
use crate::orbits::OrbitDb;
use crate::weights::Weight;

/// Closed rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Region {
            re_min,
            re_max,
            im_min,
            im_max,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(BilliardError::InvalidConfig(format!(
                "region must be a bounded nonempty rectangle, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub lambda0: Complex64,
    /// `Res Z_1` at `lambda0`; an integer (the rank) in exact arithmetic.
    #[serde(rename = "residue_Z1")]
    pub residue_z1: Complex64,
    /// `|d(lambda0)|` relative to `sum_i |c_i e^{-lambda0 tau_i}|`.
    pub newton_residual: f64,
    pub stable_across_truncation: bool,
    /// Order of the zero of `d`, from the winding number.
    pub multiplicity: u32,
}

/// Relative size below which `d` is treated as vanishing on a contour.
const ZERO_REL: f64 = 1e-14;
const MAX_EDGE_DEPTH: u32 = 40;

/// Change of `arg d` along the straight segment `a -> b`, sampled adaptively.
///
/// A subinterval is accepted when the sampled phase change is small and the
/// step times `|d'/d|` at its ends is below 1, which bounds the phase rate and
/// prevents aliasing of full turns near (multiple) zeros.
fn arg_change(det: &Determinant, a: Complex64, b: Complex64, initial: usize) -> Result<f64> {
    #[derive(Clone, Copy)]
    struct Sample {
        z: Complex64,
        d: Complex64,
        rate: f64,
    }
    let sample = |z: Complex64| -> Result<Sample> {
        let d = det.eval(z);
        if d.norm() <= ZERO_REL * det.magnitude(z, 0) {
            return Err(BilliardError::ContourThroughZero { re: z.re, im: z.im });
        }
        let rate = (det.derivative(z, 1) / d).norm();
        Ok(Sample { z, d, rate })
    };
    fn refine(sample: &dyn Fn(Complex64) -> Result<Sample>, a: Sample, b: Sample, depth: u32) -> Result<f64> {
        let delta = (b.d / a.d).arg();
        let h = (b.z - a.z).norm();
        if delta.abs() <= PI / 4.0 && h * a.rate.max(b.rate) <= 1.0 {
            return Ok(delta);
        }
        let zm = 0.5 * (a.z + b.z);
        if depth >= MAX_EDGE_DEPTH {
            return Err(BilliardError::ContourThroughZero { re: zm.re, im: zm.im });
        }
        let m = sample(zm)?;
        Ok(refine(sample, a, m, depth + 1)? + refine(sample, m, b, depth + 1)?)
    }
    let n = initial.max(1);
    let mut total = 0.0;
    let mut prev = sample(a)?;
    for k in 1..=n {
        let next = sample(a + (b - a) * (k as f64 / n as f64))?;
        total += refine(&sample, prev, next, 0)?;
        prev = next;
    }
    Ok(total)
}

fn winding_polygon(det: &Determinant, vertices: &[Complex64], per_edge: usize) -> Result<i64> {
    let mut total = 0.0;
    for k in 0..vertices.len() {
        let a = vertices[k];
        let b = vertices[(k + 1) % vertices.len()];
        total += arg_change(det, a, b, per_edge)?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn winding_rect(det: &Determinant, r: &Region) -> Result<i64> {
    winding_polygon(det, &r.corners(), 4)
}

/// Number of zeros of `d` inside the circle `|lambda - center| = radius`.
fn winding_circle(det: &Determinant, center: Complex64, radius: f64) -> Result<i64> {
    let n = 32;
    let pts: Vec<Complex64> = (0..n)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
        .collect();
    // The inscribed polygon; zeros strictly between chord and arc are not a
    // concern at the radii used here.
    winding_polygon(det, &pts, 1)
}

/// Newton iteration on `d^{(order)}`.
fn newton(det: &Determinant, start: Complex64, order: u32, bound: f64) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..100 {
        let g = det.derivative(z, order);
        let dg = det.derivative(z, order + 1);
        if dg.norm() == 0.0 || !dg.norm().is_finite() {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !z.re.is_finite() || (z - start).norm() > bound {
            return None;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            return Some(z);
        }
    }
    // Accept a stalled iteration if it sits at the roundoff floor.
    let g = det.derivative(z, order);
    (g.norm() <= 1e-12 * det.magnitude(z, order)).then_some(z)
}

#[derive(Debug, Clone, Copy)]
struct Zero {
    lambda: Complex64,
    multiplicity: u32,
}

/// Schroeder's iteration `z -= w d/d'` for a zero of multiplicity `w`; its
/// basin is much wider than that of plain Newton on `d^{(w-1)}`.
fn schroeder(det: &Determinant, start: Complex64, w: u32, bound: f64) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..60 {
        let d = det.eval(z);
        let dd = det.derivative(z, 1);
        if d.norm() == 0.0 {
            return Some(z);
        }
        if dd.norm() == 0.0 {
            return None;
        }
        let step = d / dd * w as f64;
        z -= step;
        if !z.re.is_finite() || (z - start).norm() > bound {
            return None;
        }
        if step.norm() <= 1e-10 * z.norm().max(1.0) {
            break;
        }
    }
    Some(z)
}

fn polish(det: &Determinant, rect: &Region, w: u32) -> Option<Zero> {
    let size = rect.width().max(rect.height());
    let rough = schroeder(det, rect.center(), w, 2.0 * size)?;
    let z = newton(det, rough, w - 1, 2.0 * size)?;
    let slack = 1e-9 * size.max(1.0);
    let inside = z.re >= rect.re_min - slack
        && z.re <= rect.re_max + slack
        && z.im >= rect.im_min - slack
        && z.im <= rect.im_max + slack;
    if !inside {
        return None;
    }
    let rho = (0.25 * rect.width().min(rect.height())).min(1e-5);
    match winding_circle(det, z, rho) {
        Ok(n) if n == w as i64 => Some(Zero {
            lambda: z,
            multiplicity: w,
        }),
        _ => None,
    }
}

/// Resolves the `w` zeros inside `rect` into polished zeros with multiplicities.
fn isolate(det: &Determinant, rect: Region, w: u32, depth: u32, out: &mut Vec<Zero>) -> Result<()> {
    if let Some(z) = polish(det, &rect, w) {
        out.push(z);
        return Ok(());
    }
    if depth >= 24 {
        return Err(BilliardError::NonConvergent(format!(
            "could not isolate {w} zero(s) near {}",
            rect.center()
        )));
    }
    // Off-center split so that symmetric zero configurations do not land on
    // the new edges.
    let xm = rect.re_min + 0.4871 * rect.width();
    let ym = rect.im_min + 0.5137 * rect.height();
    let quads = [
        Region { re_max: xm, im_max: ym, ..rect },
        Region { re_min: xm, im_max: ym, ..rect },
        Region { re_max: xm, im_min: ym, ..rect },
        Region { re_min: xm, im_min: ym, ..rect },
    ];
    let mut found = 0i64;
    for q in quads {
        let wq = winding_rect(det, &q)?;
        if wq < 0 {
            return Err(BilliardError::NonConvergent(format!("negative winding near {}", q.center())));
        }
        if wq > 0 {
            found += wq;
            isolate(det, q, wq as u32, depth + 1, out)?;
        }
    }
    if found != w as i64 {
        return Err(BilliardError::NonConvergent(format!(
            "winding mismatch while subdividing near {}",
            rect.center()
        )));
    }
    Ok(())
}

/// All zeros of `det` in `region`, counted by the argument principle on a grid.
fn scan(det: &Determinant, region: &Region, attempt: u32) -> Result<Vec<Zero>> {
    let step = if det.t_max() > 0.0 {
        2.0 * PI / (8.0 * det.t_max())
    } else {
        0.1
    };
    // Asymmetric outward margins keep grid lines off symmetry axes; later
    // attempts move them further.
    let a = attempt as f64;
    let grid = Region {
        re_min: region.re_min - (0.0371 + 0.113 * a) * step,
        re_max: region.re_max + (0.0613 + 0.071 * a) * step,
        im_min: region.im_min - (0.0419 + 0.097 * a) * step,
        im_max: region.im_max + (0.0577 + 0.131 * a) * step,
    };
    let nx = (grid.width() / step).ceil().max(1.0) as usize;
    let ny = (grid.height() / step).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=nx).map(|i| grid.re_min + grid.width() * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| grid.im_min + grid.height() * j as f64 / ny as f64).collect();
    let at = |i: usize, j: usize| Complex64::new(xs[i], ys[j]);

    // Horizontal edges (i, j) -> (i+1, j) and vertical edges (i, j) -> (i, j+1).
    let horiz: Vec<f64> = (0..nx * (ny + 1))
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / nx, k % nx);
            arg_change(det, at(i, j), at(i + 1, j), 4)
        })
        .collect::<Result<_>>()?;
    let vert: Vec<f64> = (0..(nx + 1) * ny)
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / (nx + 1), k % (nx + 1));
            arg_change(det, at(i, j), at(i, j + 1), 4)
        })
        .collect::<Result<_>>()?;
    let h = |i: usize, j: usize| horiz[j * nx + i];
    let v = |i: usize, j: usize| vert[j * (nx + 1) + i];

    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let total = h(i, j) + v(i + 1, j) - h(i, j + 1) - v(i, j);
            let w = (total / (2.0 * PI)).round() as i64;
            if w < 0 {
                return Err(BilliardError::NonConvergent(format!(
                    "negative winding number in cell at {}",
                    at(i, j)
                )));
            }
            if w > 0 {
                let rect = Region {
                    re_min: xs[i],
                    re_max: xs[i + 1],
                    im_min: ys[j],
                    im_max: ys[j + 1],
                };
                cells.push((rect, w as u32));
            }
        }
    }
    let per_cell: Vec<Vec<Zero>> = cells
        .par_iter()
        .map(|&(rect, w)| {
            let mut out = Vec::new();
            isolate(det, rect, w, 0, &mut out)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut zeros: Vec<Zero> = Vec::new();
    for z in per_cell.into_iter().flatten() {
        if !zeros.iter().any(|o| (o.lambda - z.lambda).norm() < 1e-8) {
            zeros.push(z);
        }
    }
    Ok(zeros)
}

fn scan_with_retries(det: &Determinant, region: &Region) -> Result<Vec<Zero>> {
    let mut last = None;
    for attempt in 0..4 {
        match scan(det, region, attempt) {
            Ok(z) => return Ok(z),
            Err(e @ BilliardError::ContourThroughZero { .. }) => {
                log::debug!("resonance scan attempt {attempt} failed: {e}; jittering grid");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Zeros of the truncated determinant `d` in `region`, with residues of `Z_1`
/// and a stability flag from re-solving at truncation `max_len - 1`.
pub fn find_resonances(region: &Region, db: &OrbitDb, cfg: &ZetaConfig) -> Result<Vec<Resonance>> {
    region.validate()?;
    let det = Determinant::new(db, cfg)?;
    let coarser = if cfg.max_len > 2 {
        Some(Determinant::new(db, &ZetaConfig { max_len: cfg.max_len - 1, ..*cfg })?)
    } else {
        None
    };
    let mut zeros: Vec<Zero> = scan_with_retries(&det, region)?
        .into_iter()
        .filter(|z| region.contains(z.lambda))
        .collect();
    zeros.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });

    let all: Vec<Complex64> = zeros.iter().map(|z| z.lambda).collect();
    zeros
        .par_iter()
        .map(|z| {
            let nearest = all
                .iter()
                .filter(|o| **o != z.lambda)
                .map(|o| (o - z.lambda).norm())
                .fold(f64::INFINITY, f64::min);
            let mut radius = (0.4 * nearest).min(0.1);
            // Shrink until the circle encloses exactly this zero, so zeros
            // outside the search region cannot contaminate the residue.
            let mut tries = 0;
            while winding_circle(&det, z.lambda, radius).ok() != Some(z.multiplicity as i64) {
                radius *= 0.5;
                tries += 1;
                if tries > 20 {
                    return Err(BilliardError::NonConvergent(format!(
                        "no clean residue contour around {}",
                        z.lambda
                    )));
                }
            }
            let residue_z1 = contour_residue(&det, z.lambda, radius, 0)?;
            let newton_residual = det.eval(z.lambda).norm() / det.magnitude(z.lambda, 0);
            let stable = coarser.as_ref().is_some_and(|c| {
                let bound = 1e-3 * z.lambda.norm().max(1.0);
                newton(c, z.lambda, z.multiplicity - 1, 10.0 * bound)
                    .is_some_and(|w| (w - z.lambda).norm() <= 1e-3 * z.lambda.norm().max(1e-300))
            });
            Ok(Resonance {
                lambda0: z.lambda,
                residue_z1,
                newton_residual,
                stable_across_truncation: stable,
                multiplicity: z.multiplicity,
            })
        })
        .collect()
}

/// `(1 / 2 pi i) oint Z(lambda) (lambda - center)^order d lambda` on a circle,
/// trapezoid rule with node doubling.
fn contour_residue(det: &Determinant, center: Complex64, radius: f64, order: u32) -> Result<Complex64> {
    let integrand = |theta: f64| {
        let offset = Complex64::from_polar(radius, theta);
        det.zeta(center + offset) * offset.powu(order + 1)
    };
    let mut n = 64usize;
    let mut sum: Complex64 = (0..n).map(|k| integrand(2.0 * PI * k as f64 / n as f64)).sum();
    let mut abs_sum: f64 = (0..n)
        .map(|k| integrand(2.0 * PI * k as f64 / n as f64).norm())
        .sum();
    let mut estimate = sum / n as f64;
    while n < 1 << 16 {
        // New nodes sit halfway between the old ones.
        let new: Vec<Complex64> = (0..n)
            .map(|k| integrand(2.0 * PI * (k as f64 + 0.5) / n as f64))
            .collect();
        sum += new.iter().sum::<Complex64>();
        abs_sum += new.iter().map(|z| z.norm()).sum::<f64>();
        n *= 2;
        let next = sum / n as f64;
        let scale = next.norm().max(abs_sum / n as f64);
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(BilliardError::ContourThroughZero {
                re: center.re + radius,
                im: center.im,
            });
        }
        if (next - estimate).norm() <= 1e-10 * scale {
            return Ok(next);
        }
        estimate = next;
    }
    Err(BilliardError::NonConvergent(format!(
        "residue quadrature around {center} did not settle"
    )))
}

/// Residue of `Z_f (lambda - lambda0)^order` at `lambda0`, from the contour
/// integral over the circle of the given radius.
///
/// Fails with `NearbyResonance` when another zero of the determinant lies
/// within `2 radius` of `lambda0`.
pub fn residue(
    weight: &Weight,
    lambda0: Complex64,
    radius: f64,
    db: &OrbitDb,
    cfg: &ZetaConfig,
    order: u32,
) -> Result<Complex64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(BilliardError::InvalidConfig(format!("residue radius must be positive, got {radius}")));
    }
    let det = Determinant::weighted(db, cfg, weight)?;
    let inner = 1e-6 * radius;
    let own = winding_circle(&det, lambda0, inner)?;
    let outer = winding_circle(&det, lambda0, 2.0 * radius)?;
    if outer != own {
        // Bisect for the distance of the nearest other zero.
        let (mut lo, mut hi) = (inner, 2.0 * radius);
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            match winding_circle(&det, lambda0, mid) {
                Ok(w) if w == own => lo = mid,
                _ => hi = mid,
            }
        }
        return Err(BilliardError::NearbyResonance { distance: hi });
    }
    contour_residue(&det, lambda0, radius, order)
}
