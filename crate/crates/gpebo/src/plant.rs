//! Ground-truth simulation of the nonlinear time-varying plant
//!
//! ```text
//! x'(t) = A(t) x(t) + k Cᵀ(t) x(t) + b u(t) + m f(y(t)),    x(0) = x₀,
//!  y(t) = Cᵀ(t) x(t).
//! ```
//!
//! `A`, `C`, `L` and `u` are expression-valued so scenarios can state entries
//! like `"2 - sin(t)"` directly; `k`, `b`, `m`, `x₀` are the unknown
//! constants the observer will identify and live in [`TrueParameters`],
//! which only the simulation and the test oracles may read.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::exprs::{EvalError, TimeExpr};
use crate::math;
use crate::numerics::{rk4_step, Matrix, OdeError};

/// Default bound for the bounded-trajectory monitor.
pub const DEFAULT_STATE_BOUND: f64 = 1e6;

/// Known scalar nonlinearity applied to the output.
///
/// The nonlinearity must be known for the regression to be measurable, so it
/// is picked from a fixed registry instead of being parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Sin,
    Cos,
    Tanh,
    Square,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Nonlinearity::Sin => math::sin(y),
            Nonlinearity::Cos => math::cos(y),
            Nonlinearity::Tanh => math::tanh(y),
            Nonlinearity::Square => y * y,
            Nonlinearity::Identity => y,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Nonlinearity::Sin,
            "cos" => Nonlinearity::Cos,
            "tanh" => Nonlinearity::Tanh,
            "square" => Nonlinearity::Square,
            "identity" => Nonlinearity::Identity,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Sin => "sin",
            Nonlinearity::Cos => "cos",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Square => "square",
            Nonlinearity::Identity => "identity",
        }
    }
}

/// Errors from plant construction and simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantError {
    /// Field dimensions do not match the declared state dimension.
    Dimension {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    /// Expression evaluation failed while assembling a coefficient.
    Eval {
        field: &'static str,
        t: f64,
        source: EvalError,
    },
    /// The derivative or state went NaN/infinite.
    NonFinite { t: f64 },
    /// Bounded-trajectory monitor tripped: `||x(t)|| > bound`.
    UnboundedState { t: f64, norm: f64, bound: f64 },
    /// Integration failure from the RK4 core.
    Ode(OdeError),
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::Dimension {
                field,
                expected,
                got,
            } => {
                write!(f, "field `{field}` has {got} entries, expected {expected}")
            }
            PlantError::Eval { field, t, source } => {
                write!(f, "evaluating `{field}` at t = {t}: {source}")
            }
            PlantError::NonFinite { t } => write!(f, "non-finite plant derivative at t = {t}"),
            PlantError::UnboundedState { t, norm, bound } => write!(
                f,
                "bounded-trajectory violation at t = {t}: ||x|| = {norm:e} exceeds {bound:e}"
            ),
            PlantError::Ode(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PlantError {}

impl From<OdeError> for PlantError {
    fn from(e: OdeError) -> Self {
        PlantError::Ode(e)
    }
}

/// The plant's known structure: dimension, time-varying coefficients, the
/// observer injection gain, the output nonlinearity and the input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    n: usize,
    a: Vec<TimeExpr>,
    c: Vec<TimeExpr>,
    l: Vec<TimeExpr>,
    f: Nonlinearity,
    u: TimeExpr,
}

impl SystemDefinition {
    /// `a` is the row-major n×n state matrix, `c` the n output weights, `l`
    /// the n injection gains.
    pub fn new(
        n: usize,
        a: Vec<TimeExpr>,
        c: Vec<TimeExpr>,
        l: Vec<TimeExpr>,
        f: Nonlinearity,
        u: TimeExpr,
    ) -> Result<Self, PlantError> {
        if n == 0 {
            return Err(PlantError::Dimension {
                field: "n",
                expected: 1,
                got: 0,
            });
        }
        if a.len() != n * n {
            return Err(PlantError::Dimension {
                field: "a",
                expected: n * n,
                got: a.len(),
            });
        }
        if c.len() != n {
            return Err(PlantError::Dimension {
                field: "c",
                expected: n,
                got: c.len(),
            });
        }
        if l.len() != n {
            return Err(PlantError::Dimension {
                field: "l",
                expected: n,
                got: l.len(),
            });
        }
        Ok(SystemDefinition { n, a, c, l, f, u })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.f
    }

    /// State matrix `A(t)`.
    pub fn a_at(&self, t: f64) -> Result<Matrix, PlantError> {
        let mut data = Vec::with_capacity(self.n * self.n);
        for e in &self.a {
            data.push(e.eval(t).map_err(|source| PlantError::Eval {
                field: "A",
                t,
                source,
            })?);
        }
        Ok(Matrix::from_row_major(self.n, self.n, data))
    }

    /// Output weights `C(t)`.
    pub fn c_at(&self, t: f64) -> Result<Vec<f64>, PlantError> {
        self.c
            .iter()
            .map(|e| {
                e.eval(t).map_err(|source| PlantError::Eval {
                    field: "C",
                    t,
                    source,
                })
            })
            .collect()
    }

    /// Injection gain `L(t)`.
    pub fn l_at(&self, t: f64) -> Result<Vec<f64>, PlantError> {
        self.l
            .iter()
            .map(|e| {
                e.eval(t).map_err(|source| PlantError::Eval {
                    field: "L",
                    t,
                    source,
                })
            })
            .collect()
    }

    /// Input signal `u(t)`.
    pub fn u_at(&self, t: f64) -> Result<f64, PlantError> {
        self.u.eval(t).map_err(|source| PlantError::Eval {
            field: "u",
            t,
            source,
        })
    }

    pub fn expressions(&self) -> (&[TimeExpr], &[TimeExpr], &[TimeExpr], &TimeExpr) {
        (&self.a, &self.c, &self.l, &self.u)
    }
}

/// Ground-truth constants: only the simulation and the oracles read these.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameters {
    pub k: Vec<f64>,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    pub x0: Vec<f64>,
}

impl TrueParameters {
    pub fn new(k: Vec<f64>, b: Vec<f64>, m: Vec<f64>, x0: Vec<f64>) -> Self {
        TrueParameters { k, b, m, x0 }
    }

    pub fn validate(&self, n: usize) -> Result<(), PlantError> {
        let fields: [(&'static str, &Vec<f64>); 4] = [
            ("k", &self.k),
            ("b", &self.b),
            ("m", &self.m),
            ("x0", &self.x0),
        ];
        for (field, v) in fields {
            if v.len() != n {
                return Err(PlantError::Dimension {
                    field,
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PlantError::NonFinite { t: 0.0 });
            }
        }
        Ok(())
    }

    /// The regression's true parameter vector `[−x₀ | k | b | m]`; the first
    /// block is the filter-bank error initial condition `e(0) = −x(0)`.
    pub fn theta_true(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(4 * self.x0.len());
        theta.extend(self.x0.iter().map(|x| -x));
        theta.extend_from_slice(&self.k);
        theta.extend_from_slice(&self.b);
        theta.extend_from_slice(&self.m);
        theta
    }
}

/// One node of the truth trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub y: f64,
}

/// Plant output `y = Cᵀ(t) x`.
pub fn output(sys: &SystemDefinition, x: &[f64], t: f64) -> Result<f64, PlantError> {
    debug_assert_eq!(x.len(), sys.n());
    let c = sys.c_at(t)?;
    Ok(dot(&c, x))
}

/// Right-hand side `A(t)x + k·(Cᵀx) + b·u(t) + m·f(Cᵀx)`.
pub fn plant_deriv(
    sys: &SystemDefinition,
    p: &TrueParameters,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>, PlantError> {
    let n = sys.n();
    debug_assert_eq!(x.len(), n);
    let a = sys.a_at(t)?;
    let y = output(sys, x, t)?;
    let u = sys.u_at(t)?;
    let fy = sys.nonlinearity().apply(y);
    let mut dx = a.mul_vec(x);
    for i in 0..n {
        dx[i] += p.k[i] * y + p.b[i] * u + p.m[i] * fy;
        if !dx[i].is_finite() {
            return Err(PlantError::NonFinite { t });
        }
    }
    Ok(dx)
}

/// Simulates the truth on the uniform grid `{0, h, …, T}` with RK4, emitting
/// one `(t, x, u, y)` sample per node.
///
/// `state_bound` is the bounded-trajectory monitor: the run aborts with a
/// diagnostic as soon as `||x(t)||` exceeds it at a node.
pub fn simulate_truth(
    sys: &SystemDefinition,
    p: &TrueParameters,
    t_end: f64,
    h: f64,
    state_bound: f64,
) -> Result<Vec<PlantSample>, PlantError> {
    if !(h > 0.0) {
        return Err(PlantError::Ode(OdeError::NonPositiveStep { h }));
    }
    p.validate(sys.n())?;
    let steps =
        grid_steps(t_end, h).ok_or(PlantError::Ode(OdeError::NonPositiveStep { h: t_end }))?;

    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = p.x0.clone();
    let mut deriv =
        |t: f64, state: &[f64]| plant_deriv(sys, p, state, t).map_err(|e| plant_to_ode(e, t));
    for k in 0..=steps {
        let t = k as f64 * h;
        let norm = euclidean(&x);
        if !norm.is_finite() || norm > state_bound {
            return Err(PlantError::UnboundedState {
                t,
                norm,
                bound: state_bound,
            });
        }
        let y = output(sys, &x, t)?;
        let u = sys.u_at(t)?;
        samples.push(PlantSample {
            t,
            x: x.clone(),
            u,
            y,
        });
        if k < steps {
            x = rk4_step(&mut deriv, t, &x, h)?;
        }
    }
    Ok(samples)
}

/// Number of steps for the grid `{0, h, .., T}`; `T/h` must be integral
/// within rounding.
pub fn grid_steps(t_end: f64, h: f64) -> Option<usize> {
    if !(t_end > 0.0) || !(h > 0.0) || h > t_end {
        return None;
    }
    let ratio = t_end / h;
    let steps = math::round(ratio);
    if math::abs(ratio - steps) > 1e-6 * steps.max(1.0) {
        return None;
    }
    Some(steps as usize)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn euclidean(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

fn plant_to_ode(e: PlantError, t: f64) -> OdeError {
    match e {
        PlantError::Ode(o) => o,
        other => OdeError::Eval {
            t,
            detail: format!("{other}"),
        },
    }
}
