//! Moving-mesh mixed finite element solver for two-dimensional thin film flow.

pub mod error;
pub mod fem;
pub mod io;
pub mod krylov;
pub mod mesh;
pub mod moving_mesh;
pub mod scenarios;
pub mod solver;
pub mod sparse;
pub mod tw;

pub use error::{Error, Result};
