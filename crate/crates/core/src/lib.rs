//! Dyadic shell model: Galerkin integration and a constructive certificate of
//! non-unique Leray-Hopf solutions.

pub mod cli;
pub mod construction;
pub mod error;
pub mod linalg;
pub mod model;
pub mod profiles;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod texp;
pub mod verify;

pub use error::{DyadicError, Result};
pub use model::Params;
