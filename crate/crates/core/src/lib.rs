//! City-road reaction-diffusion lattice: road solver, lattice simulator,
//! dispersion relation and front-speed measurement.

pub mod acceptance;
pub mod asymptotic;
pub mod dispersion;
pub mod edge_solver;
pub mod error;
pub mod front_speed;
pub mod lattice_sim;
pub mod model;

pub use error::{Error, Result};
