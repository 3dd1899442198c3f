//! Adaptive state observation for nonlinear time-varying SISO systems with
//! unknown constant parameters.
//!
//! The plant is
//!
//! ```text
//! x'(t) = A(t) x(t) + k Cᵀ(t) x(t) + b u(t) + m f(y(t)),    x(0) = x₀,
//!  y(t) = Cᵀ(t) x(t),
//! ```
//!
//! with known, bounded `A(t)`, `C(t)` and a known scalar nonlinearity `f`,
//! while `k`, `b`, `m` and the initial state are unknown constants. Instead of
//! driving a copy of the plant, the observer runs a bank of output/input
//! driven filters (ξ, η, ζ, ρ and the fundamental matrix Φ of
//! `A₀ = A − L Cᵀ`) whose states combine the unknowns into one measurable
//! linear regression `z(t) = Ψ(t) Θ` over the 4n-vector
//! `Θ = [−x(0) | k | b | m]`. A forgetting-factor least-squares estimator
//! identifies `Θ` online, and the state estimate is recovered algebraically:
//!
//! ```text
//! x̂(t) = ξ(t) − Φ(t) θ̂ + η(t) k̂ + ζ(t) b̂ + ρ(t) m̂.
//! ```
//!
//! Modules map onto the pipeline:
//!
//! * [`numerics`] — fixed-step RK4 over flat state vectors plus the small
//!   dense-matrix kit (Frobenius norm, Jacobi eigenvalue bounds, SPD
//!   factorization) everything else builds on;
//! * [`exprs`] — parser/evaluator for scalar expressions of `t`, so scenario
//!   files can state matrix entries like `"2 - sin(t)"` verbatim;
//! * [`plant`] — ground-truth simulation of the system above;
//! * [`filters`] — the filter bank, the regression `z = Ψ Θ`, and the state
//!   reconstruction;
//! * [`estimator`] — forgetting-factor least squares with covariance freeze,
//!   plus the persistent-excitation Gram diagnostic;
//! * [`observer`] — one coupled run: plant (or replayed signals), filter
//!   bank, estimator and reconstruction integrated jointly on one grid.
//!
//! The crate is `no_std`-compatible (`alloc` is required); disable the
//! default `std` feature and enable `libm` for bare-metal builds.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("gpebo requires either the `std` or the `libm` feature");

mod math;

pub mod estimator;
pub mod exprs;
pub mod filters;
pub mod numerics;
pub mod observer;
pub mod plant;

pub use estimator::{estimator_deriv, is_pe, pe_gram, EstimatorConfig, EstimatorState};
pub use exprs::{parse_expr, TimeExpr};
pub use filters::{
    a0_at, filter_deriv, reconstruct_state, regression_sample, FilterBank, RegressionSample,
};
pub use numerics::{frobenius_norm, rk4_step, sym_eig_bounds, FlatState, Matrix};
pub use observer::{error_series, ObserverRun, TraceRecord};
pub use plant::{
    output, plant_deriv, simulate_truth, Nonlinearity, SystemDefinition, TrueParameters,
};
