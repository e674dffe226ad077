//! Set-valued maps with a right one-sided Lipschitz (ROSL) bound, an inverse
//! iteration that solves `y in F(x)` for such maps, and a finite-element
//! discretization of an elliptic differential inclusion built on top of it.

pub mod elliptic;
mod error;
mod fista;
pub mod gelfand;
pub mod maps;
pub mod sets;
pub mod solver;
pub mod space;

pub use elliptic::{build_grid, builtin_initial, builtin_rhs, GelfandGrid, PdiOptions, PdiReport, PointwiseMap, RhsParams};
pub use error::{Error, Result};
pub use gelfand::{composite_constants, embedding_constant, GelfandData};
pub use maps::{SamplePlan, SetValuedMap};
pub use sets::{ConvexSet, ProjectionOptions, ProjectionResult};
pub use space::{Functional, GramSpace, Vector};
pub use solver::{solve, SolveOptions, SolveReport};
