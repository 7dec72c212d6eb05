pub mod analysis;
pub mod diagnostics;
pub mod director;
pub mod error;
pub mod flow;
pub mod harness;
pub mod mesh;
pub mod operators;
pub mod poisson;
pub mod solver;
pub mod stepper;

pub use error::{Error, Result};
pub use mesh::{BoundaryCondition, CellField, DirectorField, FaceField, Grid, GridSpec, ScalarField, State, VectorFaceField, make_grid};
