//! Weight functions on phase space: a small arithmetic expression language
//! over `x, y, vx, vy`, and orbit line integrals.

mod expr;
mod parse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use expr::{eval, Func, Op, Var, WeightExpr};
pub use parse::parse_weight;

use crate::error::Result;
use crate::flow::PhaseState;
use crate::orbits::PeriodicOrbit;
use crate::quadrature::gl_adaptive;

/// A complex weight `re + i im` and the factor picked up at every reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub re: WeightExpr,
    pub im: Option<WeightExpr>,
    pub reflection_factor: Complex64,
}

/// Textual weight description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub re: String,
    #[serde(default)]
    pub im: Option<String>,
    #[serde(default = "unit_factor")]
    pub reflection_factor: [f64; 2],
}

fn unit_factor() -> [f64; 2] {
    [1.0, 0.0]
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            re: "1".into(),
            im: None,
            reflection_factor: unit_factor(),
        }
    }
}

impl Weight {
    pub fn real(expr: WeightExpr) -> Self {
        Weight {
            re: expr,
            im: None,
            reflection_factor: Complex64::new(1.0, 0.0),
        }
    }

    /// The constant weight `f = 1`.
    pub fn one() -> Self {
        Weight::real(WeightExpr::Num(1.0))
    }

    pub fn parse(re: &str) -> Result<Self> {
        Ok(Weight::real(parse_weight(re)?))
    }

    pub fn with_reflection_factor(mut self, factor: Complex64) -> Self {
        self.reflection_factor = factor;
        self
    }

    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        Ok(Weight {
            re: parse_weight(&spec.re)?,
            im: spec.im.as_deref().map(parse_weight).transpose()?,
            reflection_factor: Complex64::new(spec.reflection_factor[0], spec.reflection_factor[1]),
        })
    }

    pub fn to_spec(&self) -> WeightSpec {
        WeightSpec {
            re: self.re.to_string(),
            im: self.im.as_ref().map(|e| e.to_string()),
            reflection_factor: [self.reflection_factor.re, self.reflection_factor.im],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re == WeightExpr::Num(0.0) && self.im.as_ref().is_none_or(|e| *e == WeightExpr::Num(0.0))
    }

    pub fn eval(&self, state: &PhaseState) -> Result<Complex64> {
        let re = eval(&self.re, state)?;
        let im = match &self.im {
            Some(e) => eval(e, state)?,
            None => 0.0,
        };
        Ok(Complex64::new(re, im))
    }
}

const LEG_REL_TOL: f64 = 1e-12;
const LEG_ABS_TOL: f64 = 1e-14;
const LEG_MAX_PANELS: usize = 1 << 12;

fn integrate_expr_leg(expr: &WeightExpr, start: &PhaseState, length: f64) -> Result<f64> {
    gl_adaptive(0.0, length, LEG_REL_TOL, LEG_ABS_TOL, LEG_MAX_PANELS, |t| {
        eval(
            expr,
            &PhaseState {
                x: start.x + start.v * t,
                v: start.v,
            },
        )
    })
}

/// `int_{gamma#} f` over one primitive period: Gauss-Legendre on every free
/// leg. The reflection factor is not part of the integral.
pub fn integrate_along(orbit: &PeriodicOrbit, weight: &Weight) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (state, &len) in orbit.states.iter().zip(&orbit.legs) {
        total.re += integrate_expr_leg(&weight.re, state, len)?;
        if let Some(im) = &weight.im {
            total.im += integrate_expr_leg(im, state, len)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Disc, ObstacleSet};
    use crate::orbits::{find_orbit, Itinerary, NewtonOptions};
    use crate::vec2::Vec2;

    fn two_disk_orbit() -> PeriodicOrbit {
        let set = ObstacleSet::new(vec![
            Disc::new(Vec2::new(0.0, 0.0), 1.0),
            Disc::new(Vec2::new(6.0, 0.0), 1.0),
        ])
        .unwrap();
        let it: Itinerary = "12".parse().unwrap();
        find_orbit(&set, &it, &NewtonOptions::default()).unwrap()
    }

    #[test]
    fn two_disk_line_integrals() {
        let orbit = two_disk_orbit();
        let one = integrate_along(&orbit, &Weight::one()).unwrap();
        assert!((one.re - 8.0).abs() < 1e-12 && one.im == 0.0);
        let x = integrate_along(&orbit, &Weight::parse("x").unwrap()).unwrap();
        assert!((x.re - 24.0).abs() < 1e-12);
        let vx = integrate_along(&orbit, &Weight::parse("vx").unwrap()).unwrap();
        assert!(vx.re.abs() < 1e-12);
    }

    #[test]
    fn complex_weight() {
        let orbit = two_disk_orbit();
        let spec = WeightSpec {
            re: "1".into(),
            im: Some("x".into()),
            reflection_factor: [-1.0, 0.0],
        };
        let w = Weight::from_spec(&spec).unwrap();
        let v = integrate_along(&orbit, &w).unwrap();
        assert!((v.re - 8.0).abs() < 1e-12 && (v.im - 24.0).abs() < 1e-12);
        assert_eq!(w.reflection_factor, Complex64::new(-1.0, 0.0));
        assert_eq!(w.to_spec(), spec);
    }

    #[test]
    fn domain_error_propagates() {
        let orbit = two_disk_orbit();
        let w = Weight::parse("sqrt(0-1)").unwrap();
        assert!(integrate_along(&orbit, &w).is_err());
    }
}
