//! Classical fixed-step fourth-order Runge-Kutta over flat state vectors.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Flat packing of one ODE system's state; the layout is owned by the caller
/// and must stay fixed for the lifetime of an integration run.
pub type FlatState = Vec<f64>;

/// Errors raised while evaluating or combining RK4 stages.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// Step size must be strictly positive.
    NonPositiveStep { h: f64 },
    /// The derivative has a different length than the state.
    LengthMismatch { expected: usize, got: usize },
    /// A stage derivative came back NaN or infinite.
    NonFiniteDerivative { t: f64, index: usize },
    /// The combined update overflowed: the new state is NaN or infinite.
    NonFiniteState { t: f64, index: usize },
    /// The derivative callback itself failed (e.g. an expression evaluation
    /// error inside a time-varying coefficient).
    Eval { t: f64, detail: String },
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::NonPositiveStep { h } => write!(f, "step size must be positive, got {h}"),
            OdeError::LengthMismatch { expected, got } => {
                write!(
                    f,
                    "derivative length {got} does not match state length {expected}"
                )
            }
            OdeError::NonFiniteDerivative { t, index } => {
                write!(f, "non-finite derivative at t = {t} (component {index})")
            }
            OdeError::NonFiniteState { t, index } => {
                write!(
                    f,
                    "non-finite state after the step from t = {t} (component {index})"
                )
            }
            OdeError::Eval { t, detail } => {
                write!(f, "derivative evaluation failed at t = {t}: {detail}")
            }
        }
    }
}

impl core::error::Error for OdeError {}

/// One classical RK4 step from `t` to `t + h`.
///
/// `deriv` is invoked exactly four times, at `t`, `t + h/2`, `t + h/2` and
/// `t + h`, in that order; callers that sample recorded signals may count
/// invocations to distinguish the two half-step stages. Every stage
/// derivative is checked for finiteness, so a diverging field fails with the
/// stage time and the offending component instead of propagating NaNs.
///
/// The update is deterministic: identical inputs produce bit-identical
/// outputs.
pub fn rk4_step<F>(deriv: &mut F, t: f64, state: &[f64], h: f64) -> Result<FlatState, OdeError>
where
    F: FnMut(f64, &[f64]) -> Result<FlatState, OdeError>,
{
    if !(h > 0.0) {
        return Err(OdeError::NonPositiveStep { h });
    }
    let n = state.len();
    let half = 0.5 * h;

    let k1 = checked(deriv(t, state)?, n, t)?;
    let s2: Vec<f64> = state.iter().zip(&k1).map(|(x, k)| x + half * k).collect();
    let k2 = checked(deriv(t + half, &s2)?, n, t + half)?;
    let s3: Vec<f64> = state.iter().zip(&k2).map(|(x, k)| x + half * k).collect();
    let k3 = checked(deriv(t + half, &s3)?, n, t + half)?;
    let s4: Vec<f64> = state.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
    let k4 = checked(deriv(t + h, &s4)?, n, t + h)?;

    let sixth = h / 6.0;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = state[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if let Some(index) = out.iter().position(|x| !x.is_finite()) {
        return Err(OdeError::NonFiniteState { t, index });
    }
    Ok(out)
}

fn checked(k: FlatState, expected: usize, t: f64) -> Result<FlatState, OdeError> {
    if k.len() != expected {
        return Err(OdeError::LengthMismatch {
            expected,
            got: k.len(),
        });
    }
    if let Some(index) = k.iter().position(|x| !x.is_finite()) {
        return Err(OdeError::NonFiniteDerivative { t, index });
    }
    Ok(k)
}
