use thiserror::Error;

use crate::expr::ExprError;
use crate::geometry::GeometryKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("point has {got} coordinates, the chart has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("{op} is not defined on {kind} geometry")]
    WrongGeometry { op: &'static str, kind: GeometryKind },
    #[error("invalid transformation: {0}")]
    InvalidTransform(String),
    #[error("Jacobian of the transformation is singular at {point:?}")]
    SingularJacobian { point: Vec<f64> },
    #[error("Reeb system of the pulled-back contact form is singular at {point:?}")]
    SingularReeb { point: Vec<f64> },
    #[error("pulled-back Poisson matrix is singular at {point:?}")]
    SingularPullback { point: Vec<f64> },
    #[error("closedness residual {residual:e} exceeds {tol:e}: K would be path dependent")]
    NonCanonoid { residual: f64, tol: f64 },
    #[error("adaptive step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
