use thiserror::Error;

pub type Result<T> = std::result::Result<T, BilliardError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("collision too close to grazing (cos incidence {cos_incidence:e} < {tol:e})")]
    NearGrazing { cos_incidence: f64, tol: f64 },

    #[error("orbit is not hyperbolic (|trace| = {trace} <= 2)")]
    ParabolicOrbit { trace: f64 },

    #[error("Newton iteration diverged for itinerary {itinerary} (residual {residual:e})")]
    NewtonDiverged { itinerary: String, residual: f64 },

    #[error("itinerary {itinerary} is not realizable: leg {leg} is occluded")]
    OccludedLeg { itinerary: String, leg: usize },

    #[error("orbit {itinerary} has a grazing bounce (cos incidence {cos_incidence:e})")]
    GrazingOrbit { itinerary: String, cos_incidence: f64 },

    #[error("invalid itinerary: {0}")]
    InvalidItinerary(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("domain error evaluating `{expr}`: {message}")]
    EvalDomain { expr: String, message: String },

    #[error("orbit database is empty")]
    EmptyDb,

    #[error("orbit database was built for obstacle set {found}, expected {expected}")]
    StaleDb { expected: String, found: String },

    #[error("contour passes through a zero of the determinant near {re} + {im}i")]
    ContourThroughZero { re: f64, im: f64 },

    #[error("another resonance lies within {distance} of the residue contour center")]
    NearbyResonance { distance: f64 },

    #[error("computation did not converge: {0}")]
    NonConvergent(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BilliardError {
    fn from(e: std::io::Error) -> Self {
        BilliardError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for BilliardError {
    fn from(e: serde_json::Error) -> Self {
        BilliardError::Io(e.to_string())
    }
}
