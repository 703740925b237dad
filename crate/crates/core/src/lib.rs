//! Geometric singular perturbation toolkit for the Olsen peroxidase-oxidase model.

pub mod error;
pub mod integrate;
pub mod manifolds;
pub mod model;
pub mod blowup;
pub mod transcritical;
pub mod loops;
pub mod candidates;
pub mod config;
pub mod returnmap;

pub use error::{Error, Result};
