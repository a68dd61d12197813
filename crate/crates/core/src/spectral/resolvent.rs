//! The escape-time resolvent
//! `R_U(lambda) f(x, v) = int_0^{-tau^-(x, v)} e^{-lambda t} f(phi_{-t}(x, v)) dt`
//! by Gauss-Legendre quadrature along backward trajectories.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, Result};
use crate::flow::{advance, ball_exit_time, reflect, FlowOptions, Horizon, PhaseState, Termination};
use crate::geometry::{classify_hit, first_hit, HitKind, ObstacleSet, Ray};
use crate::quadrature::gl_composite;
use crate::vec2::Vec2;
use crate::weights::Weight;

/// Radial cutoff `chi(r)`: 1 for `r <= r0`, `exp(1 - 1/(1 - ((r - r0)/w)^2))`
/// on `(r0, r0 + w)`, 0 beyond; `r` measured from the obstacle centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpCutoff {
    pub center: Vec2,
    pub r0: f64,
    pub width: f64,
}

impl BumpCutoff {
    /// `r0 = 0.8 R`, `w = 0.15 R`.
    pub fn standard(center: Vec2, domain_radius: f64) -> Self {
        BumpCutoff {
            center,
            r0: 0.8 * domain_radius,
            width: 0.15 * domain_radius,
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let r = x.dist(self.center);
        if r <= self.r0 {
            return 1.0;
        }
        let s = (r - self.r0) / self.width;
        if s >= 1.0 {
            return 0.0;
        }
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }

    /// Radius beyond which the cutoff vanishes.
    pub fn support_radius(&self) -> f64 {
        self.r0 + self.width
    }
}

/// A weight multiplied by an optional cutoff, optionally composed with the
/// velocity flip `(x, v) -> (x, -v)`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub weight: Weight,
    pub cutoff: Option<BumpCutoff>,
    pub flipped: bool,
}

impl TestFunction {
    pub fn new(weight: Weight, cutoff: Option<BumpCutoff>) -> Self {
        TestFunction {
            weight,
            cutoff,
            flipped: false,
        }
    }

    /// `f o iota`.
    pub fn time_reversed(&self) -> Self {
        TestFunction {
            flipped: !self.flipped,
            ..self.clone()
        }
    }

    pub fn eval(&self, state: &PhaseState) -> Result<Complex64> {
        let chi = self.cutoff.map_or(1.0, |c| c.eval(state.x));
        if chi == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let s = if self.flipped { state.reversed() } else { *state };
        Ok(self.weight.eval(&s)? * chi)
    }

    pub fn is_zero(&self) -> bool {
        self.weight.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventValue {
    pub value: Complex64,
    /// Backward escape time (nonpositive), or the grazing time if `grazing`.
    pub tau_minus: f64,
    /// The backward orbit grazed an obstacle; the integral stops there.
    pub grazing: bool,
    /// The bounce cap was reached before escape.
    pub trapped: bool,
}

/// `R_U(lambda) f` at `state`, integrating over backward legs up to the exit
/// from the ball of radius `domain_radius` about the centroid.
pub fn resolvent_apply_with<F>(
    set: &ObstacleSet,
    lambda: Complex64,
    f: &F,
    state: &PhaseState,
    domain_radius: f64,
    dt: f64,
    opts: &FlowOptions,
) -> Result<ResolventValue>
where
    F: Fn(&PhaseState) -> Result<Complex64>,
{
    if !(dt > 0.0) {
        return Err(BilliardError::InvalidConfig(format!("quadrature step must be positive, got {dt}")));
    }
    let center = set.centroid();
    if state.x.dist(center) > domain_radius {
        return Err(BilliardError::InvalidState("state lies outside the resolvent domain".into()));
    }
    state.validate(set)?;

    // Walk the reversed state forward; phi_{-t}(x, v) = iota(phi_t(iota(x, v))).
    let mut cur = state.reversed();
    let mut t0 = 0.0;
    let mut value = Complex64::new(0.0, 0.0);
    for bounce in 0..=opts.max_bounces {
        let hit = first_hit(set, &Ray { origin: cur.x, direction: cur.v })?;
        let exit = ball_exit_time(cur.x, cur.v, center, domain_radius);
        let (leg, next) = match hit {
            Some(h) if h.time < exit => (h.time, Some(h)),
            _ => (exit, None),
        };
        let panels = ((leg / dt).ceil() as usize).max(1);
        let leg_state = cur;
        let integral = gl_composite(0.0, leg, panels, |s| -> Result<Complex64> {
            let p = PhaseState {
                x: leg_state.x + leg_state.v * s,
                v: -leg_state.v,
            };
            Ok((-lambda * (t0 + s)).exp() * f(&p)?)
        })?;
        value += integral;
        t0 += leg;
        let Some(h) = next else {
            return Ok(ResolventValue {
                value,
                tau_minus: -t0,
                grazing: false,
                trapped: false,
            });
        };
        if classify_hit(&h, opts.grazing_tol) == HitKind::Grazing {
            return Ok(ResolventValue {
                value,
                tau_minus: -t0,
                grazing: true,
                trapped: false,
            });
        }
        cur = PhaseState {
            x: h.point,
            v: reflect(cur.v, h.inward_normal),
        };
        if bounce == opts.max_bounces {
            break;
        }
    }
    Ok(ResolventValue {
        value,
        tau_minus: -t0,
        grazing: false,
        trapped: true,
    })
}

/// `R_U(lambda) (chi f)` at `state` for a weight `f` and cutoff `chi`.
pub fn resolvent_apply(
    set: &ObstacleSet,
    lambda: Complex64,
    f: &Weight,
    cutoff: Option<&BumpCutoff>,
    state: &PhaseState,
    domain_radius: f64,
    dt: f64,
) -> Result<ResolventValue> {
    let tf = TestFunction::new(f.clone(), cutoff.copied());
    resolvent_apply_with(
        set,
        lambda,
        &|p: &PhaseState| tf.eval(p),
        state,
        domain_radius,
        dt,
        &FlowOptions::default(),
    )
}

fn flow_by(set: &ObstacleSet, state: &PhaseState, t: f64, opts: &FlowOptions) -> Result<PhaseState> {
    let (start, flip) = if t >= 0.0 { (*state, false) } else { (state.reversed(), true) };
    let res = advance(set, start, Horizon::Time(t.abs()), opts)?;
    if res.termination != Termination::TimeReached {
        return Err(BilliardError::InvalidState(format!(
            "flow for time {t} ended with {:?}",
            res.termination
        )));
    }
    Ok(if flip { res.final_state.reversed() } else { res.final_state })
}

/// `|((P + lambda) R f)(state) - f(state)|`, with `P` the central difference
/// of `s -> (R f)(phi_s(state))` at `s = 0`.
pub fn resolvent_identity_defect(
    set: &ObstacleSet,
    lambda: Complex64,
    f: &TestFunction,
    state: &PhaseState,
    domain_radius: f64,
    dt: f64,
    h: f64,
) -> Result<f64> {
    let opts = FlowOptions::default();
    let eval = |p: &PhaseState| f.eval(p);
    let apply = |p: &PhaseState| resolvent_apply_with(set, lambda, &eval, p, domain_radius, dt, &opts);
    let plus = apply(&flow_by(set, state, h, &opts)?)?;
    let minus = apply(&flow_by(set, state, -h, &opts)?)?;
    let here = apply(state)?;
    let p_rf = (plus.value - minus.value) / (2.0 * h);
    Ok((p_rf + lambda * here.value - f.eval(state)?).norm())
}

/// Monte-Carlo estimate of `<R_U(lambda) f, g>` over `(ball \ obstacles) x S^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixCoefficient {
    pub lambda: Complex64,
    pub domain_radius: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub estimate: Complex64,
    pub stderr: f64,
    /// Samples whose backward orbit grazed or hit the bounce cap.
    pub flagged: usize,
}

/// Uniform sample of `(ball \ obstacles) x S^1`, drawn by rejection.
pub(crate) fn sample_phase_point(set: &ObstacleSet, center: Vec2, radius: f64, rng: &mut impl Rng) -> PhaseState {
    loop {
        let x = center + Vec2::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius));
        if x.dist(center) < radius && set.containing(x).is_none() {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            return PhaseState::from_angle(x, angle);
        }
    }
}

/// `<R f, g> = int R f(p) conj(g(p)) dp` scaled by the phase-space volume
/// `(pi R^2 - sum pi r_i^2) 2 pi`; deterministic for a given seed.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_matrix_coeff(
    set: &ObstacleSet,
    lambda: Complex64,
    f: &TestFunction,
    g: &TestFunction,
    domain_radius: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MatrixCoefficient> {
    if n_samples < 2 {
        return Err(BilliardError::InvalidConfig("need at least two Monte-Carlo samples".into()));
    }
    let center = set.centroid();
    let obstacle_area: f64 = set.discs().iter().map(|d| std::f64::consts::PI * d.radius * d.radius).sum();
    let volume = (std::f64::consts::PI * domain_radius * domain_radius - obstacle_area) * std::f64::consts::TAU;
    let zero = MatrixCoefficient {
        lambda,
        domain_radius,
        dt,
        n_samples,
        estimate: Complex64::new(0.0, 0.0),
        stderr: 0.0,
        flagged: 0,
    };
    if f.is_zero() || g.is_zero() {
        return Ok(zero);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<PhaseState> = (0..n_samples)
        .map(|_| sample_phase_point(set, center, domain_radius, &mut rng))
        .collect();
    let opts = FlowOptions::default();
    let eval_f = |p: &PhaseState| f.eval(p);
    let samples: Vec<(Complex64, bool)> = points
        .par_iter()
        .map(|p| {
            let gp = g.eval(p)?;
            if gp == Complex64::new(0.0, 0.0) {
                return Ok((gp, false));
            }
            let r = resolvent_apply_with(set, lambda, &eval_f, p, domain_radius, dt, &opts)?;
            Ok((r.value * gp.conj(), r.grazing || r.trapped))
        })
        .collect::<Result<_>>()?;
    let n = n_samples as f64;
    let mean: Complex64 = samples.iter().map(|s| s.0).sum::<Complex64>() / n;
    let var: f64 = samples.iter().map(|s| (s.0 - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok(MatrixCoefficient {
        estimate: mean * volume,
        stderr: volume * (var / n).sqrt(),
        flagged: samples.iter().filter(|s| s.1).count(),
        ..zero
    })
}
