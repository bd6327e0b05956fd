//! Numerical verification of canonical and canonoid transformations on
//! symplectic, cosymplectic, contact and cocontact phase spaces.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod sampling;
pub mod stensor;
pub mod transform;

pub use error::{Error, Result};
pub use expr::{ExprError, Expression};
pub use geometry::{Geometry, GeometryKind};
pub use transform::TransformMap;
