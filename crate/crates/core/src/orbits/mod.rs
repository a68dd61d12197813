//! Symbolic dynamics, periodic-orbit search and the orbit database.

mod db;
mod itinerary;
mod search;

pub use db::{build_db, LengthSummary, OrbitDb, OrbitRecord};
pub use itinerary::{enumerate_itineraries, prime_cycle_count, Itinerary};
pub use search::{find_orbit, orbit_from_thetas, verify_orbit, NewtonOptions, PeriodicOrbit, VerifyReport};
