//! Core of a barangay community information service: resident registry,
//! blotter casework and clearance gating, health records, zones and hotspot
//! maps, offender-factor classifiers, SMS broadcasts and open-data exports.
//!
//! Numeric geometry and classifier probabilities are generic over
//! [`scalar::Real`] (`f32` or `f64`); the aliases below fix the common
//! choices.
//!
//! [`System`] ties the modules to a durable event log and is what the HTTP
//! service and CLI drive.

pub mod access;
pub mod analytics;
pub mod casework;
pub mod clock;
pub mod dates;
pub mod error;
pub mod geo;
pub mod health;
pub mod notify;
pub mod opendata;
pub mod registry;
pub mod scalar;
pub mod state;
pub mod store;
pub mod synthetic;
pub mod system;

pub use error::{Error, Result};
pub use system::{System, SystemConfig};

/// WGS84 point in double precision; the storage type everywhere.
pub type LatLon = geo::GeoPoint<f64>;
/// Single-precision point for bulk geometry where memory matters.
pub type LatLon32 = geo::GeoPoint<f32>;

/// Great-circle distance in metres, double precision.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    geo::haversine(a, b)
}

/// Class posterior in double precision.
pub fn nb_posterior(model: &analytics::NaiveBayesModel, x: &[Option<usize>]) -> Result<Vec<f64>> {
    model.posterior::<f64>(x)
}
