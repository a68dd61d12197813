//! Classical dynamics and Ruelle-Pollicott resonances of open planar billiards.
//!
//! The obstacle configurations handled here are finite sets of pairwise
//! disjoint discs in the Euclidean plane. Trajectories move at unit speed,
//! reflect specularly and cease to exist at grazing collisions. On top of
//! the flow the crate builds:
//!
//! - periodic orbits from the symbolic itinerary of bounces, found by Newton
//!   iteration on the cyclic length functional,
//! - their linearized Poincare maps and hyperbolicity data,
//! - weighted dynamical zeta functions, the associated Fredholm determinant,
//!   its zeros (the resonances) and contour-integral residues,
//! - the escape-time resolvent applied to test functions, by quadrature along
//!   backward trajectories and Monte-Carlo over phase space.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod error;
pub mod flow;
pub mod geometry;
pub mod orbits;
pub mod quadrature;
pub mod spectral;
pub mod tangent;
pub mod vec2;
pub mod weights;

pub use error::{BilliardError, Result};
pub use flow::{
    advance, boundary_map, contact_reflection_check, escape_time, reflect, trapped_set_grid,
    BirkhoffCoord, Collision, EscapeTime, FlowOptions, FlowResult, Horizon, PhaseState,
    Termination, TimeDirection, TrappedGrid,
};
pub use geometry::{
    boundary_point, classify_hit, first_hit, no_eclipse_check, Disc, Hit, HitKind,
    NoEclipseReport, ObstacleSet, Ray,
};
pub use orbits::{
    build_db, enumerate_itineraries, find_orbit, verify_orbit, Itinerary, NewtonOptions, OrbitDb,
    PeriodicOrbit, VerifyReport,
};
pub use spectral::{
    det_grid, find_resonances, fredholm_det, residue, resolvent_apply, resolvent_identity_defect,
    resolvent_matrix_coeff, zeta_weighted, BumpCutoff, Determinant, MatrixCoefficient, Region,
    Resonance, ResolventValue, TestFunction, ZetaConfig,
};
pub use tangent::{
    collision_matrix, det_id_minus_power, fd_monodromy, free_flight_matrix, hyperbolic_data,
    monodromy, HyperbolicData, JacobiMatrix,
};
pub use vec2::Vec2;
pub use weights::{eval, integrate_along, parse_weight, Weight, WeightExpr};

/// Default tolerance on the cosine of incidence below which a hit is grazing.
pub const DEFAULT_GRAZING_TOL: f64 = 1e-9;
