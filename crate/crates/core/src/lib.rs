//! Semi-Lagrangian discrete differential form solver for the incompressible
//! Euler and Navier-Stokes equations in two dimensions.

pub mod error;
pub mod linsolve;
pub mod femspace;
pub mod harness;
pub mod mesh;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod tracer;
pub mod transport;

pub use error::{Error, Result};
pub use femspace::{FeSpace, OneForm, Order, ZeroForm};
pub use mesh::{Location, Mesh, Rect};
