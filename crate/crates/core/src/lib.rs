//! Optimal consumption and investment for a loss-averse agent whose S-shaped
//! utility is measured against a fraction of the running consumption peak.
//!
//! The solution is built in dual space ([`dual`]), mapped back to wealth
//! ([`policy`]) and checked by Monte Carlo ([`sim`]).

pub mod analytics;
pub mod dual;
pub mod envelope;
pub mod error;
pub mod params;
pub mod policy;
pub mod quad;
pub mod roots;
pub mod sim;

pub use error::{Error, Result};
pub use params::{validate, DerivedConstants, ModelParams};
