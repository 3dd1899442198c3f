//! One coupled observer run: plant (or replayed signals), filter bank,
//! estimator and state reconstruction integrated jointly on a single
//! fixed-step grid.
//!
//! In simulation mode the truth plant is part of the integrated state, so
//! the filters and estimator see stage-consistent `(u, y)` at every RK4
//! stage — no sample-and-hold coupling, the whole cascade keeps fourth
//! order. A run can record those stage signals into a [`SignalTape`];
//! replaying the tape reproduces the filter/estimator trace bit for bit
//! without the plant, which is also how recorded real signals would be fed
//! in. The observer path reads only `(u, y)`: the plant state never leaks
//! into the filters or the estimator.
//!
//! The estimator is integrated in information form (`P = F⁻¹`, `q = F⁻¹Θ̂`,
//! see [`crate::estimator`]); `Θ̂` and `F` are recovered at every node. The
//! covariance freeze latches at the first node with `‖F‖_F > M`: from that
//! node on `F` is held constant (bit-identical — it is no longer part of the
//! integrated state at all) and `Θ̂` continues under the direct law with the
//! frozen `F`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::estimator::{
    estimator_deriv, EstimatorConfig, EstimatorError, EstimatorState, InfoState,
};
use crate::filters::{filter_deriv, reconstruct_state, regression_sample, FilterBank};
use crate::numerics::{frobenius_norm, rk4_step, Cholesky, Matrix, MatrixError, OdeError};
use crate::plant::{
    euclidean, grid_steps, output, plant_deriv, PlantError, SystemDefinition, TrueParameters,
    DEFAULT_STATE_BOUND,
};

/// Divergence guard on `‖Θ̂‖`.
pub const DEFAULT_THETA_BOUND: f64 = 1e9;
/// Boundedness monitor on `‖Φ‖_F` (uniform-stability check on `A₀`).
pub const DEFAULT_PHI_BOUND: f64 = 1e6;

/// Errors from a coupled observer run.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverError {
    /// Run setup violates an invariant (dimensions, grid, gains).
    Invalid {
        what: String,
    },
    /// Simulation mode requires ground-truth parameters.
    MissingTruth,
    Plant(PlantError),
    Estimator(EstimatorError),
    Ode(OdeError),
    /// The information matrix lost positive definiteness.
    Covariance {
        t: f64,
        source: MatrixError,
    },
    /// `‖Θ̂‖` crossed the divergence guard.
    ThetaDiverged {
        t: f64,
        norm: f64,
        bound: f64,
    },
    /// `‖Φ‖_F` crossed the uniform-stability monitor.
    PhiUnbounded {
        t: f64,
        norm: f64,
        bound: f64,
    },
    /// A filter state went NaN/infinite at a node.
    NonFiniteState {
        t: f64,
    },
    /// The replay tape does not match the run grid.
    TapeMismatch {
        what: String,
    },
    /// `error_series` needs a simulation-mode trace carrying the truth.
    SeriesNeedsTruth,
}

impl fmt::Display for ObserverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObserverError::Invalid { what } => write!(f, "invalid observer run: {what}"),
            ObserverError::MissingTruth => {
                write!(f, "simulation mode requires ground-truth parameters")
            }
            ObserverError::Plant(e) => write!(f, "{e}"),
            ObserverError::Estimator(e) => write!(f, "{e}"),
            ObserverError::Ode(e) => write!(f, "{e}"),
            ObserverError::Covariance { t, source } => {
                write!(f, "covariance breakdown at t = {t}: {source}")
            }
            ObserverError::ThetaDiverged { t, norm, bound } => write!(
                f,
                "estimate divergence at t = {t}: ||theta_hat|| = {norm:e} exceeds {bound:e}"
            ),
            ObserverError::PhiUnbounded { t, norm, bound } => write!(
                f,
                "fundamental matrix unbounded at t = {t}: ||Phi||_F = {norm:e} exceeds {bound:e}"
            ),
            ObserverError::NonFiniteState { t } => {
                write!(f, "non-finite observer state at t = {t}")
            }
            ObserverError::TapeMismatch { what } => write!(f, "signal tape mismatch: {what}"),
            ObserverError::SeriesNeedsTruth => {
                write!(
                    f,
                    "error series need a simulation-mode trace (no truth recorded)"
                )
            }
        }
    }
}

impl core::error::Error for ObserverError {}

impl From<PlantError> for ObserverError {
    fn from(e: PlantError) -> Self {
        ObserverError::Plant(e)
    }
}

impl From<EstimatorError> for ObserverError {
    fn from(e: EstimatorError) -> Self {
        ObserverError::Estimator(e)
    }
}

impl From<OdeError> for ObserverError {
    fn from(e: OdeError) -> Self {
        ObserverError::Ode(e)
    }
}

/// One record per grid node; the quantities a consumer would plot.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// Truth state; present in simulation mode only.
    pub x: Option<Vec<f64>>,
    pub x_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub z: f64,
    pub psi: Vec<f64>,
    pub f_norm: f64,
    pub frozen: bool,
}

/// Per-node view handed to a run inspector; exposes the internal state
/// (filters, covariance) that [`TraceRecord`] deliberately omits.
pub struct NodeView<'a> {
    pub t: f64,
    pub x: Option<&'a [f64]>,
    pub filters: &'a FilterBank,
    pub theta_hat: &'a [f64],
    pub covariance: &'a Matrix,
    pub f_norm: f64,
    pub frozen: bool,
    pub z: f64,
    pub psi: &'a [f64],
}

/// Recorded `(u, y)` at every RK4 evaluation point of a run, sufficient to
/// re-drive the observer bit-identically without the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTape {
    step: f64,
    /// `(u, y)` at each grid node (stage 1 of the step starting there).
    node: Vec<(f64, f64)>,
    /// `(u, y)` at stages 2, 3, 4 of each step.
    stages: Vec<[(f64, f64); 3]>,
}

impl SignalTape {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> usize {
        self.node.len()
    }
}

/// A fully specified observer run.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRun {
    pub sys: SystemDefinition,
    /// Ground truth; required in simulation mode, ignored on replay.
    pub truth: Option<TrueParameters>,
    pub cfg: EstimatorConfig,
    /// `Θ̂(0)`, flat `[θ | k | b | m]`; zeros by default.
    pub theta_init: Vec<f64>,
    pub t_end: f64,
    pub step: f64,
    /// Bounded-trajectory monitor on `‖x‖` (simulation mode).
    pub state_bound: f64,
    /// Divergence guard on `‖Θ̂‖`.
    pub theta_bound: f64,
    /// Uniform-stability monitor on `‖Φ‖_F`.
    pub phi_bound: f64,
}

impl ObserverRun {
    pub fn new(
        sys: SystemDefinition,
        truth: Option<TrueParameters>,
        cfg: EstimatorConfig,
        t_end: f64,
        step: f64,
    ) -> Self {
        let dim4 = 4 * sys.n();
        ObserverRun {
            sys,
            truth,
            cfg,
            theta_init: vec![0.0; dim4],
            t_end,
            step,
            state_bound: DEFAULT_STATE_BOUND,
            theta_bound: DEFAULT_THETA_BOUND,
            phi_bound: DEFAULT_PHI_BOUND,
        }
    }

    pub fn validate(&self) -> Result<(), ObserverError> {
        let n = self.sys.n();
        self.cfg.validate()?;
        if self.theta_init.len() != 4 * n {
            return Err(ObserverError::Invalid {
                what: format!(
                    "theta_init has {} entries, expected {}",
                    self.theta_init.len(),
                    4 * n
                ),
            });
        }
        if grid_steps(self.t_end, self.step).is_none() {
            return Err(ObserverError::Invalid {
                what: format!(
                    "grid must satisfy 0 < h <= T with T/h integral, got T = {}, h = {}",
                    self.t_end, self.step
                ),
            });
        }
        for (name, v) in [
            ("state_bound", self.state_bound),
            ("theta_bound", self.theta_bound),
            ("phi_bound", self.phi_bound),
        ] {
            if !(v > 0.0) {
                return Err(ObserverError::Invalid {
                    what: format!("{name} must be > 0, got {v}"),
                });
            }
        }
        if let Some(truth) = &self.truth {
            truth.validate(n)?;
        }
        Ok(())
    }

    /// Simulation-mode run: integrates the truth plant jointly with the
    /// observer and emits one record per node.
    pub fn run(&self) -> Result<Vec<TraceRecord>, ObserverError> {
        self.run_inspect(|_| {})
    }

    /// Simulation-mode run with a per-node inspector for deep diagnostics.
    pub fn run_inspect<F: FnMut(NodeView<'_>)>(
        &self,
        mut inspector: F,
    ) -> Result<Vec<TraceRecord>, ObserverError> {
        self.drive(None, None, &mut inspector)
    }

    /// Simulation-mode run that also records the stage signals.
    pub fn run_with_tape(&self) -> Result<(Vec<TraceRecord>, SignalTape), ObserverError> {
        self.validate()?;
        let steps = grid_steps(self.t_end, self.step).expect("validated");
        let mut tape = SignalTape {
            step: self.step,
            node: Vec::with_capacity(steps + 1),
            stages: Vec::with_capacity(steps),
        };
        let trace = self.drive(None, Some(&mut tape), &mut |_| {})?;
        Ok((trace, tape))
    }

    /// Replay-mode run: drives the observer from recorded signals alone.
    /// The truth plant is not integrated and `TraceRecord::x` is `None`.
    pub fn run_replay(&self, tape: &SignalTape) -> Result<Vec<TraceRecord>, ObserverError> {
        self.drive(Some(tape), None, &mut |_| {})
    }

    fn drive(
        &self,
        replay: Option<&SignalTape>,
        mut record: Option<&mut SignalTape>,
        inspector: &mut dyn FnMut(NodeView<'_>),
    ) -> Result<Vec<TraceRecord>, ObserverError> {
        self.validate()?;
        let n = self.sys.n();
        let dim4 = 4 * n;
        let fb_len = FilterBank::flat_len(n);
        let h = self.step;
        let steps = grid_steps(self.t_end, h).expect("validated");

        let simulate = replay.is_none();
        let truth = if simulate {
            Some(self.truth.as_ref().ok_or(ObserverError::MissingTruth)?)
        } else {
            None
        };
        if let Some(tape) = replay {
            if tape.node.len() != steps + 1 || tape.stages.len() != steps {
                return Err(ObserverError::TapeMismatch {
                    what: format!(
                        "tape covers {} nodes / {} steps, run needs {} / {}",
                        tape.node.len(),
                        tape.stages.len(),
                        steps + 1,
                        steps
                    ),
                });
            }
            if tape.step != h {
                return Err(ObserverError::TapeMismatch {
                    what: format!("tape step {} differs from run step {h}", tape.step),
                });
            }
        }

        let x_len = if simulate { n } else { 0 };
        let fb_off = x_len;
        let est_off = x_len + fb_len;

        // tracking phase: flat = [x? | fb | P | q]; after the freeze latches
        // the estimator block shrinks to [theta_hat] and F lives in `frozen`
        let mut flat = vec![0.0; est_off + dim4 * dim4 + dim4];
        if let Some(truth) = truth {
            flat[..n].copy_from_slice(&truth.x0);
        }
        FilterBank::new(n).write_flat(&mut flat[fb_off..est_off]);
        let info0 = InfoState::new(&self.cfg, &self.theta_init);
        flat[est_off..est_off + dim4 * dim4].copy_from_slice(info0.p.as_slice());
        flat[est_off + dim4 * dim4..].copy_from_slice(&info0.q);

        let mut frozen: Option<(Matrix, f64)> = None;
        let mut trace = Vec::with_capacity(steps + 1);

        for k in 0..=steps {
            let t = k as f64 * h;

            let x_node: Option<Vec<f64>> = if simulate {
                Some(flat[..n].to_vec())
            } else {
                None
            };
            if let Some(x) = &x_node {
                let norm = euclidean(x);
                if !norm.is_finite() || norm > self.state_bound {
                    return Err(ObserverError::Plant(PlantError::UnboundedState {
                        t,
                        norm,
                        bound: self.state_bound,
                    }));
                }
            }
            let fb = FilterBank::from_flat(n, &flat[fb_off..fb_off + fb_len], t);
            if !fb.is_finite() {
                return Err(ObserverError::NonFiniteState { t });
            }
            let phi_norm = frobenius_norm(&fb.phi);
            if phi_norm > self.phi_bound {
                return Err(ObserverError::PhiUnbounded {
                    t,
                    norm: phi_norm,
                    bound: self.phi_bound,
                });
            }

            let (u, y) = if let Some(tape) = replay {
                tape.node[k]
            } else {
                let x = x_node.as_ref().expect("simulation mode");
                (self.sys.u_at(t)?, output(&self.sys, x, t)?)
            };
            if let Some(tape) = record.as_deref_mut() {
                tape.node.push((u, y));
            }
            let sample = regression_sample(&self.sys, &fb, y)?;

            // recover (theta_hat, F) from the phase state; latch the freeze
            let mut fresh_cov: Option<Matrix> = None;
            let theta_hat: Vec<f64>;
            if frozen.is_none() {
                let p = Matrix::from_row_major(
                    dim4,
                    dim4,
                    flat[est_off..est_off + dim4 * dim4].to_vec(),
                );
                let factor = Cholesky::factor(&p)
                    .map_err(|source| ObserverError::Covariance { t, source })?;
                theta_hat = factor.solve(&flat[est_off + dim4 * dim4..]);
                let f = factor.inverse();
                let f_norm = frobenius_norm(&f);
                if f_norm > self.cfg.norm_cap {
                    flat.truncate(est_off);
                    flat.extend_from_slice(&theta_hat);
                    frozen = Some((f, f_norm));
                } else {
                    fresh_cov = Some(f);
                }
            } else {
                theta_hat = flat[est_off..est_off + dim4].to_vec();
            }
            let (covariance, f_norm, is_frozen) = match (&fresh_cov, &frozen) {
                (Some(f), _) => (f, frobenius_norm(f), false),
                (None, Some((f, norm))) => (f, *norm, true),
                (None, None) => unreachable!("one phase always holds a covariance"),
            };

            let theta_norm = euclidean(&theta_hat);
            if !theta_norm.is_finite() || theta_norm > self.theta_bound {
                return Err(ObserverError::ThetaDiverged {
                    t,
                    norm: theta_norm,
                    bound: self.theta_bound,
                });
            }

            let x_hat = reconstruct_state(&fb, &theta_hat);
            inspector(NodeView {
                t,
                x: x_node.as_deref(),
                filters: &fb,
                theta_hat: &theta_hat,
                covariance,
                f_norm,
                frozen: is_frozen,
                z: sample.z,
                psi: &sample.psi,
            });
            trace.push(TraceRecord {
                t,
                x: x_node,
                x_hat,
                theta_hat,
                z: sample.z,
                psi: sample.psi,
                f_norm,
                frozen: is_frozen,
            });

            if k == steps {
                break;
            }

            // advance one step; the derivative closure is called exactly four
            // times by rk4_step, which is how stage signals are indexed
            let mut stage_buf = [(0.0_f64, 0.0_f64); 3];
            let mut stage_idx = 0_usize;
            let sys = &self.sys;
            let cfg = &self.cfg;
            let frozen_ref = &frozen;
            let mut deriv = |ts: f64, s: &[f64]| -> Result<Vec<f64>, OdeError> {
                let stage = stage_idx;
                stage_idx += 1;
                let (u, y) = if let Some(tape) = replay {
                    if stage == 0 {
                        tape.node[k]
                    } else {
                        tape.stages[k][stage - 1]
                    }
                } else {
                    let u = sys.u_at(ts).map_err(|e| to_ode(e, ts))?;
                    let y = output(sys, &s[..n], ts).map_err(|e| to_ode(e, ts))?;
                    if stage > 0 {
                        stage_buf[stage - 1] = (u, y);
                    }
                    (u, y)
                };
                let fb_s = FilterBank::from_flat(n, &s[fb_off..fb_off + fb_len], ts);
                let fd = filter_deriv(sys, &fb_s, y, u).map_err(|e| to_ode(e, ts))?;
                let rs = regression_sample(sys, &fb_s, y).map_err(|e| to_ode(e, ts))?;

                let mut out = vec![0.0; s.len()];
                if let Some(truth) = truth {
                    let xd = plant_deriv(sys, truth, &s[..n], ts).map_err(|e| to_ode(e, ts))?;
                    out[..n].copy_from_slice(&xd);
                }
                fd.write_flat(&mut out[fb_off..fb_off + fb_len]);
                match frozen_ref {
                    None => {
                        let info = InfoState {
                            p: Matrix::from_row_major(
                                dim4,
                                dim4,
                                s[est_off..est_off + dim4 * dim4].to_vec(),
                            ),
                            q: s[est_off + dim4 * dim4..].to_vec(),
                        };
                        let (pd, qd) = info.deriv(cfg, &rs);
                        out[est_off..est_off + dim4 * dim4].copy_from_slice(pd.as_slice());
                        out[est_off + dim4 * dim4..].copy_from_slice(&qd);
                    }
                    Some((f_bar, _)) => {
                        let st = EstimatorState {
                            theta_hat: s[est_off..].to_vec(),
                            f: f_bar.clone(),
                            frozen: true,
                            t: ts,
                        };
                        let (td, _) = estimator_deriv(cfg, &st, &rs);
                        out[est_off..].copy_from_slice(&td);
                    }
                }
                Ok(out)
            };
            flat = rk4_step(&mut deriv, t, &flat, h)?;
            if let Some(tape) = record.as_deref_mut() {
                tape.stages.push(stage_buf);
            }
        }

        Ok(trace)
    }
}

fn to_ode(e: PlantError, t: f64) -> OdeError {
    match e {
        PlantError::Ode(o) => o,
        other => OdeError::Eval {
            t,
            detail: format!("{other}"),
        },
    }
}

/// Per-parameter and per-state error time series from a simulation-mode
/// trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    /// `Θ̂ᵢ(t) − Θᵢ` for i = 1..4n.
    pub theta: Vec<Vec<f64>>,
    /// `x̂ⱼ(t) − xⱼ(t)` for j = 1..n.
    pub state: Vec<Vec<f64>>,
}

/// Subtracts the truth from a simulation-mode trace.
pub fn error_series(
    trace: &[TraceRecord],
    truth: &TrueParameters,
) -> Result<ErrorSeries, ObserverError> {
    let theta_true = truth.theta_true();
    let dim4 = theta_true.len();
    let n = truth.x0.len();
    let mut series = ErrorSeries {
        t: Vec::with_capacity(trace.len()),
        theta: vec![Vec::with_capacity(trace.len()); dim4],
        state: vec![Vec::with_capacity(trace.len()); n],
    };
    for rec in trace {
        let x = rec.x.as_ref().ok_or(ObserverError::SeriesNeedsTruth)?;
        series.t.push(rec.t);
        for i in 0..dim4 {
            series.theta[i].push(rec.theta_hat[i] - theta_true[i]);
        }
        for j in 0..n {
            series.state[j].push(rec.x_hat[j] - x[j]);
        }
    }
    Ok(series)
}
