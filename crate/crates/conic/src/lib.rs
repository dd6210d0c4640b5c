//! Dense interior-point solver for semidefinite programs in a free vector
//! variable `w`:
//!
//! ```text
//! minimize    <c, w>
//! subject to  <a_i, w>  = b_i          (equality rows)
//!             <a_i, w> >= b_i          (inequality rows)
//!             F_j(w) PSD               (affine symmetric maps)
//!             G_j(w) = 0               (affine symmetric maps)
//! ```
//!
//! [`solve`] returns either an optimal primal/dual pair or a verified
//! Farkas ray when the constraints are inconsistent.

// `!(x > 0.0)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

mod error;
mod ipm;
mod kkt;
mod ldl;
mod options;
mod program;
mod solution;

pub use error::ConicError;
pub use kkt::{check_kkt, check_pair, verify_ray, KktReport, RayCheck};
pub use options::SolverOptions;
pub use program::{ConicProgram, LinearRow, MatrixEntry, MatrixMap};
pub use solution::{ConicSolution, DualVariables, FarkasRay, Residuals, Status};

/// Solve `prog`. Errors only on malformed input; numerical failures are
/// reported through [`ConicSolution::status`].
pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    Ok(ipm::solve_program(prog, opts))
}
