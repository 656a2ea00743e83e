//! Dense numerical kernels sized for desk-scale problems.

pub(crate) mod barrier;
pub mod linalg;
pub mod lp;
pub mod qp;
pub mod roots;

pub use linalg::{default_sing_tol, solve_linear, Matrix, Singular};
pub use lp::{lp_solve, FarkasCertificate, LinearProgram, LpError, LpOutcome, DEFAULT_FEAS_TOL};
pub use qp::{qp_solve, AffineForm, ConvexQp, QpError, QpOutcome, DEFAULT_QP_TOL};
pub use roots::find_real_roots;
