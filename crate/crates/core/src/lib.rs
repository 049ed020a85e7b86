//! MIMO secrecy capacity with multiple eavesdroppers, computed through a
//! sequence of convex cognitive-radio spectrum-sharing capacity problems.

pub mod baselines;
pub mod channels;
pub mod cr;
pub mod ellipsoid;
pub mod error;
pub mod linalg;
pub mod secrecy;

pub use error::{Error, Result};
