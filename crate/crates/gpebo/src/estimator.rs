//! Forgetting-factor least-squares identification of the regression
//! parameters, plus the persistent-excitation diagnostic.
//!
//! The law, for the scalar regression `z = Ψ Θ`:
//!
//! ```text
//! Θ̂' = γ F Ψᵀ (z − Ψ Θ̂)
//! F'  = −γ F Ψᵀ Ψ F + β F      while ‖F‖_F ≤ M,
//! F'  = 0                      once ‖F‖_F > M (freeze; Θ̂ keeps updating)
//! ```
//!
//! with `F(0) = I / f₀`. [`estimator_deriv`] implements exactly this.
//!
//! For integration inside a run the equivalent *information form* is used:
//! `P = F⁻¹`, `q = F⁻¹ Θ̂` obey the linear, non-stiff flow
//!
//! ```text
//! P' = −β P + γ Ψᵀ Ψ,    P(0) = f₀ I,
//! q' = −β q + γ Ψᵀ z,    q(0) = f₀ Θ̂(0),
//! ```
//!
//! and `Θ̂ = P⁻¹ q`, `F = P⁻¹` recover the direct variables at any node.
//! Substituting back reproduces the law above identically, but the direct
//! Riccati flow of `F` has stiffness `γ Ψ F Ψᵀ` (10⁴ at the initial
//! conditions of typical gains), which no explicit fixed-step integrator
//! survives, while the information flow's only feedback rate is `β`.
//!
//! The estimator's whole input is the [`RegressionSample`] stream `(t, z,
//! Ψ)`; that stream is the seam where an alternative identification law
//! (gradient descent on the instantaneous residual, regressor-extension
//! schemes, ...) would plug in without touching the filter bank or the
//! reconstruction.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::filters::RegressionSample;
use crate::numerics::{frobenius_norm, sym_eig_bounds, Cholesky, Matrix, MatrixError};

/// Gains of the forgetting-factor least-squares estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Adaptation gain γ > 0.
    pub gamma: f64,
    /// Forgetting factor β ≥ 0.
    pub beta: f64,
    /// Initial covariance scale: `F(0) = I / f0`, so f0 > 0.
    pub f0: f64,
    /// Covariance norm cap M for the freeze test.
    pub norm_cap: f64,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |field: &'static str, requirement: &'static str, value: f64| {
            Err(EstimatorError::InvalidConfig {
                field,
                requirement,
                value,
            })
        };
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma", "must be finite and > 0", self.gamma);
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta", "must be finite and >= 0", self.beta);
        }
        if !(self.f0 > 0.0) || !self.f0.is_finite() {
            // F(0) = I / f0 is undefined at f0 = 0
            return bad("f0", "must be finite and > 0 (F(0) = I / f0)", self.f0);
        }
        if !(self.norm_cap > 0.0) {
            return bad("M", "must be > 0", self.norm_cap);
        }
        Ok(())
    }
}

/// Errors from estimator construction and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    InvalidConfig {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    /// The excitation window had fewer than two samples.
    EmptyWindow,
    /// Samples in the window are not on a uniform grid.
    NonUniformGrid {
        detail: String,
    },
    Matrix(MatrixError),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::InvalidConfig {
                field,
                requirement,
                value,
            } => {
                write!(f, "estimator gain `{field}` = {value}: {requirement}")
            }
            EstimatorError::EmptyWindow => {
                write!(f, "excitation window needs at least two samples")
            }
            EstimatorError::NonUniformGrid { detail } => {
                write!(f, "excitation window is not uniformly sampled: {detail}")
            }
            EstimatorError::Matrix(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EstimatorError {}

impl From<MatrixError> for EstimatorError {
    fn from(e: MatrixError) -> Self {
        EstimatorError::Matrix(e)
    }
}

/// Direct-form estimator state.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: Vec<f64>,
    pub f: Matrix,
    pub frozen: bool,
    pub t: f64,
}

impl EstimatorState {
    /// Fresh state: `Θ̂(0) = theta_init` (zeros are the uninformed default),
    /// `F(0) = I / f0`, not frozen.
    pub fn new(cfg: &EstimatorConfig, theta_init: Vec<f64>) -> Self {
        let dim = theta_init.len();
        EstimatorState {
            theta_hat: theta_init,
            f: Matrix::identity(dim).scale(1.0 / cfg.f0),
            frozen: false,
            t: 0.0,
        }
    }
}

/// Right-hand side of the forgetting-factor least-squares law.
///
/// Returns `(Θ̂', F')`. The covariance derivative is exactly the zero matrix
/// whenever the state is frozen or `‖F‖_F` exceeds the cap; the parameter
/// derivative always uses the current (possibly frozen) `F`.
pub fn estimator_deriv(
    cfg: &EstimatorConfig,
    st: &EstimatorState,
    s: &RegressionSample,
) -> (Vec<f64>, Matrix) {
    let dim = st.theta_hat.len();
    debug_assert_eq!(s.psi.len(), dim);
    debug_assert_eq!(st.f.rows(), dim);

    let v = st.f.mul_vec(&s.psi); // F Ψᵀ
    let residual = s.z - crate::plant::dot(&s.psi, &st.theta_hat);
    let theta_dot: Vec<f64> = v.iter().map(|vi| cfg.gamma * vi * residual).collect();

    let f_dot = if st.frozen || frobenius_norm(&st.f) > cfg.norm_cap {
        Matrix::zeros(dim, dim)
    } else {
        // −γ (FΨᵀ)(FΨᵀ)ᵀ + βF; the outer product keeps F' bit-symmetric
        Matrix::outer(&v)
            .scale(-cfg.gamma)
            .add_scaled(cfg.beta, &st.f)
    };
    (theta_dot, f_dot)
}

/// Information-form estimator state: `p = F⁻¹`, `q = F⁻¹ Θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoState {
    pub p: Matrix,
    pub q: Vec<f64>,
}

impl InfoState {
    pub fn new(cfg: &EstimatorConfig, theta_init: &[f64]) -> Self {
        let dim = theta_init.len();
        InfoState {
            p: Matrix::identity(dim).scale(cfg.f0),
            q: theta_init.iter().map(|x| cfg.f0 * x).collect(),
        }
    }

    /// Linear right-hand side `(P', q')`.
    pub fn deriv(&self, cfg: &EstimatorConfig, s: &RegressionSample) -> (Matrix, Vec<f64>) {
        let p_dot = Matrix::outer(&s.psi)
            .scale(cfg.gamma)
            .add_scaled(-cfg.beta, &self.p);
        let q_dot: Vec<f64> = self
            .q
            .iter()
            .zip(&s.psi)
            .map(|(qi, psi_i)| -cfg.beta * qi + cfg.gamma * psi_i * s.z)
            .collect();
        (p_dot, q_dot)
    }

    /// Current estimate `Θ̂ = P⁻¹ q` via the SPD factorization of `P`.
    pub fn theta_hat(&self) -> Result<Vec<f64>, MatrixError> {
        Ok(Cholesky::factor(&self.p)?.solve(&self.q))
    }

    /// Current covariance `F = P⁻¹`, bit-symmetric and positive definite by
    /// construction whenever the factorization succeeds.
    pub fn covariance(&self) -> Result<Matrix, MatrixError> {
        Ok(Cholesky::factor(&self.p)?.inverse())
    }
}

/// Certificate from the persistent-excitation test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeCertificate {
    pub excited: bool,
    /// Largest eigenvalue of the window Gram (α₁).
    pub alpha1: f64,
    /// Smallest eigenvalue of the window Gram (α₂).
    pub alpha2: f64,
}

/// Trapezoidal approximation of the excitation Gram `∫ Ψᵀ(τ)Ψ(τ) dτ` over a
/// uniformly sampled window.
pub fn pe_gram(samples: &[RegressionSample]) -> Result<Matrix, EstimatorError> {
    if samples.len() < 2 {
        return Err(EstimatorError::EmptyWindow);
    }
    let dim = samples[0].psi.len();
    let h = samples[1].t - samples[0].t;
    if !(h > 0.0) {
        return Err(EstimatorError::NonUniformGrid {
            detail: alloc::format!("first spacing is {h}"),
        });
    }
    for w in samples.windows(2) {
        let d = w[1].t - w[0].t;
        if (d - h).abs() > 1e-9 * h.max(1.0) {
            return Err(EstimatorError::NonUniformGrid {
                detail: alloc::format!("spacing {d} at t = {} differs from {h}", w[0].t),
            });
        }
    }

    let mut gram = Matrix::zeros(dim, dim);
    let last = samples.len() - 1;
    for (idx, s) in samples.iter().enumerate() {
        debug_assert_eq!(s.psi.len(), dim);
        let w = if idx == 0 || idx == last { 0.5 * h } else { h };
        for i in 0..dim {
            let wi = w * s.psi[i];
            if wi == 0.0 {
                continue;
            }
            for j in i..dim {
                let add = wi * s.psi[j];
                gram[(i, j)] += add;
                if j != i {
                    gram[(j, i)] += add;
                }
            }
        }
    }
    Ok(gram)
}

/// Eigenvalue bounds of the Gram as an excitation certificate:
/// `excited` iff the smallest eigenvalue α₂ reaches `alpha2_min`.
pub fn is_pe(gram: &Matrix, alpha2_min: f64) -> Result<PeCertificate, EstimatorError> {
    let (alpha2, alpha1) = sym_eig_bounds(gram)?;
    Ok(PeCertificate {
        excited: alpha2 >= alpha2_min,
        alpha1,
        alpha2,
    })
}
