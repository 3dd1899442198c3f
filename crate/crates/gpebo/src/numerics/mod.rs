//! Fixed-step ODE integration over flat state vectors and a small
//! dense-matrix kit shared by the rest of the crate.
//!
//! Everything here targets matrices no larger than a few dozen entries per
//! side (4n×4n for the estimator covariance), so the implementations favor
//! robustness and determinism over asymptotics: classical RK4 with no
//! adaptive stepping, cyclic Jacobi for symmetric eigenvalue bounds, and an
//! unpivoted Cholesky for SPD factorization.

mod matrix;
mod ode;

pub use matrix::{frobenius_norm, sym_eig_bounds, Cholesky, Matrix, MatrixError};
pub use ode::{rk4_step, FlatState, OdeError};
