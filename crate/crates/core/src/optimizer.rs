//! The two-loop unlearning optimizer.
//!
//! Each outer iteration runs `inner_steps` of gradient ascent on the
//! inner forgetting objective (fresh forget/retain mini-batches per
//! step), then one penalized descent step on the retain objective with
//! a fresh retain batch, then advances the penalty schedule. The run
//! terminates after `outer_iters` iterations or as soon as the inner
//! gradient norm falls below `stationarity_tol`.
//!
//! The loop itself is generic over a [`TwoLoopDriver`], so the same
//! algorithm runs against mini-batch model objectives ([`run_ofmu`])
//! and against closed-form instances used to check its convergence
//! behavior (see [`crate::verify`]).

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::UnlearnSplit;
use crate::error::{invalid, CoreError, Result};
use crate::objective::{
    cosine_sim, grad_penalty_objective, grad_phi, ObjectiveContext, GradMethod, DEFAULT_SIM_FLOOR,
};
use crate::problem::{DifferentiableProblem, LabeledBatch};
use crate::sampler::MinibatchSampler;
use crate::vector::ParameterVector;

/// Iterates whose magnitude exceeds this abort the run; unbounded loss
/// ascent is explosive by design and a bounded failure beats silent
/// NaN propagation.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Hyperparameters of one unlearning run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OfmuConfig {
    /// Strength of the gradient-decorrelation term in the inner
    /// objective.
    pub beta: f64,
    /// Inner ascent step size.
    pub inner_lr: f64,
    /// Outer descent step size.
    pub outer_lr: f64,
    /// Ascent steps per outer iteration.
    pub inner_steps: usize,
    /// Outer iterations.
    pub outer_iters: usize,
    /// Mini-batch size for both sides of the split.
    pub batch_size: usize,
    /// Initial penalty weight.
    pub rho_init: f64,
    /// Geometric growth factor of the penalty weight (1 = constant).
    pub rho_growth: f64,
    /// Penalty weight cap.
    pub rho_max: f64,
    /// Early-termination threshold on the inner gradient norm.
    pub stationarity_tol: f64,
    /// Norm floor below which similarities and penalty directions are
    /// treated as zero.
    pub sim_floor: f64,
    /// Strategy for differentiating the inner objective.
    pub grad_method: GradMethod,
    /// Seed for all stochastic choices of the run.
    pub seed: u64,
}

impl OfmuConfig {
    /// Defaults: a small fixed inner budget, mild ascent with a
    /// stronger outer repair step, a near-zero initial penalty weight
    /// ramping geometrically to a modest cap, and the exact
    /// inner-gradient strategy.
    ///
    /// The penalty must stay negligible until the ascent has escaped
    /// the forget-loss minimum: for losses whose only stationary basin
    /// is the fit itself (cross-entropy), an early penalty pulls the
    /// iterate straight back into refitting the forget data. The ramp
    /// reaches its cap after roughly 30 iterations.
    pub fn new(seed: u64) -> Self {
        Self {
            beta: 0.5,
            inner_lr: 0.005,
            outer_lr: 0.3,
            inner_steps: 5,
            outer_iters: 40,
            batch_size: 32,
            rho_init: 1e-4,
            rho_growth: 1.3,
            rho_max: 0.1,
            stationarity_tol: 1e-6,
            sim_floor: DEFAULT_SIM_FLOOR,
            grad_method: GradMethod::FdExact,
            seed,
        }
    }

    /// Checks the config invariants. Step sizes of zero are permitted
    /// (they make a run a no-op, which the tests rely on).
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(invalid("beta must be non-negative"));
        }
        if !(self.inner_lr >= 0.0) || !(self.outer_lr >= 0.0) {
            return Err(invalid("step sizes must be non-negative"));
        }
        if self.inner_steps == 0 || self.outer_iters == 0 || self.batch_size == 0 {
            return Err(invalid("inner_steps, outer_iters and batch_size must be at least 1"));
        }
        if !(self.rho_init > 0.0) {
            return Err(invalid("rho_init must be positive"));
        }
        if !(self.rho_growth >= 1.0) {
            return Err(invalid("rho_growth must be at least 1"));
        }
        if !(self.rho_max >= self.rho_init) {
            return Err(invalid("rho_max must be at least rho_init"));
        }
        if !(self.stationarity_tol > 0.0) {
            return Err(invalid("stationarity_tol must be positive"));
        }
        if !(self.sim_floor > 0.0) {
            return Err(invalid("sim_floor must be positive"));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    MaxIterations,
    Stationarity,
}

/// Per-outer-iteration observations.
///
/// Equality ignores `wall_time_s`: two runs of the same seed and config
/// are identical in every recorded quantity except wall-clock time.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryRecord {
    /// Outer iteration index.
    pub k: usize,
    /// Penalty weight used at this iteration.
    pub rho: f64,
    /// Inner gradient norm at the post-ascent iterate, measured on the
    /// last inner batches.
    pub grad_phi_norm: f64,
    /// Retain loss at the post-ascent iterate, when observed.
    pub loss_r: Option<f64>,
    /// Forget loss at the post-ascent iterate, when observed.
    pub loss_f: Option<f64>,
    /// Forget/retain gradient cosine similarity, when observed.
    pub sim: Option<f64>,
    /// Seconds since the run started; excluded from equality.
    pub wall_time_s: f64,
}

impl PartialEq for TrajectoryRecord {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.rho == other.rho
            && self.grad_phi_norm == other.grad_phi_norm
            && self.loss_r == other.loss_r
            && self.loss_f == other.loss_f
            && self.sim == other.sim
    }
}

/// The full history of a run plus its final parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_theta: ParameterVector,
    pub termination: Termination,
}

/// What a driver reports about the post-ascent iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub grad_phi_norm: f64,
    pub loss_r: Option<f64>,
    pub loss_f: Option<f64>,
    pub sim: Option<f64>,
}

/// Objective access required by the two-loop algorithm.
///
/// Stochastic drivers sample fresh batches inside [`Self::inner_gradient`]
/// and [`Self::outer_gradient`] and keep the last inner batches fixed
/// for [`Self::stationarity_stats`]; deterministic drivers simply
/// evaluate closed forms.
pub trait TwoLoopDriver {
    /// Ascent direction of the inner objective at `theta`, on freshly
    /// sampled batches.
    fn inner_gradient(&mut self, theta: &ParameterVector) -> Result<ParameterVector>;

    /// Diagnostics at the post-ascent iterate, evaluated on the last
    /// inner batches (no resampling).
    fn stationarity_stats(&mut self, theta_in: &ParameterVector) -> Result<StepStats>;

    /// Descent direction of the penalty objective at `theta_in` with
    /// penalty weight `rho`, using a freshly sampled retain batch.
    fn outer_gradient(&mut self, theta_in: &ParameterVector, rho: f64)
        -> Result<ParameterVector>;

    /// Observer hook invoked with each post-outer iterate.
    fn after_outer(&mut self, _k: usize, _theta: &ParameterVector) {}
}

/// Failure modes of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// An iterate left the finite range. `outer`/`inner` locate the
    /// step; `partial` carries the trajectory recorded so far when the
    /// failure happened inside a full run.
    Diverged {
        outer: Option<usize>,
        inner: Option<usize>,
        partial: Option<Box<Trajectory>>,
    },
    /// An objective evaluation failed.
    Eval(CoreError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Diverged { outer, inner, .. } => {
                write!(f, "iterate diverged (outer {outer:?}, inner {inner:?})")
            }
            RunError::Eval(e) => write!(f, "evaluation failed: {e}"),
        }
    }
}

impl core::error::Error for RunError {}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Eval(e)
    }
}

fn check_iterate(theta: &ParameterVector) -> bool {
    theta.is_finite() && theta.max_abs() <= DIVERGENCE_LIMIT
}

/// Penalty weight at outer iteration `k`:
/// `min(rho_init · rho_growth^k, rho_max)`. Non-decreasing in `k`.
pub fn penalty_schedule(cfg: &OfmuConfig, k: usize) -> f64 {
    let raw = cfg.rho_init * cfg.rho_growth.powi(k.min(i32::MAX as usize) as i32);
    if raw.is_finite() {
        raw.min(cfg.rho_max)
    } else {
        cfg.rho_max
    }
}

/// Runs `inner_steps` ascent steps `θ ← θ + inner_lr·g` from `theta`,
/// sampling fresh batches through the driver each step.
pub fn inner_loop<D: TwoLoopDriver>(
    driver: &mut D,
    theta: &ParameterVector,
    cfg: &OfmuConfig,
) -> core::result::Result<ParameterVector, RunError> {
    let mut current = theta.clone();
    for step in 0..cfg.inner_steps {
        let g = driver.inner_gradient(&current)?;
        current.add_scaled(cfg.inner_lr, &g);
        if !check_iterate(&current) {
            return Err(RunError::Diverged {
                outer: None,
                inner: Some(step),
                partial: None,
            });
        }
    }
    Ok(current)
}

/// One outer descent step `θ ← θ_in − outer_lr·∇F(θ_in; rho)`.
pub fn outer_step<D: TwoLoopDriver>(
    driver: &mut D,
    theta_in: &ParameterVector,
    rho: f64,
    cfg: &OfmuConfig,
) -> core::result::Result<ParameterVector, RunError> {
    if !(rho >= 0.0) {
        return Err(RunError::Eval(invalid("rho must be non-negative")));
    }
    let g = driver.outer_gradient(theta_in, rho)?;
    let mut next = theta_in.clone();
    next.add_scaled(-cfg.outer_lr, &g);
    if !check_iterate(&next) {
        return Err(RunError::Diverged {
            outer: None,
            inner: None,
            partial: None,
        });
    }
    Ok(next)
}

/// The full two-loop run over an arbitrary driver.
pub fn run_two_loop<D: TwoLoopDriver>(
    driver: &mut D,
    theta0: &ParameterVector,
    cfg: &OfmuConfig,
) -> core::result::Result<Trajectory, RunError> {
    cfg.validate()?;
    if !check_iterate(theta0) {
        return Err(RunError::Eval(CoreError::NumericalFailure {
            context: "initial parameters",
            coordinate: None,
        }));
    }

    #[cfg(feature = "std")]
    let started = std::time::Instant::now();
    let elapsed = || -> f64 {
        #[cfg(feature = "std")]
        {
            started.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    };

    let mut theta = theta0.clone();
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    let mut termination = Termination::MaxIterations;

    for k in 0..cfg.outer_iters {
        let rho = penalty_schedule(cfg, k);

        let theta_in = match inner_loop(driver, &theta, cfg) {
            Ok(t) => t,
            Err(RunError::Diverged { inner, .. }) => {
                return Err(RunError::Diverged {
                    outer: Some(k),
                    inner,
                    partial: Some(Box::new(Trajectory {
                        records,
                        final_theta: theta,
                        termination,
                    })),
                })
            }
            Err(e) => return Err(e),
        };

        let stats = driver.stationarity_stats(&theta_in)?;
        records.push(TrajectoryRecord {
            k,
            rho,
            grad_phi_norm: stats.grad_phi_norm,
            loss_r: stats.loss_r,
            loss_f: stats.loss_f,
            sim: stats.sim,
            wall_time_s: elapsed(),
        });

        theta = match outer_step(driver, &theta_in, rho, cfg) {
            Ok(t) => t,
            Err(RunError::Diverged { .. }) => {
                return Err(RunError::Diverged {
                    outer: Some(k),
                    inner: None,
                    partial: Some(Box::new(Trajectory {
                        records,
                        final_theta: theta_in,
                        termination,
                    })),
                })
            }
            Err(e) => return Err(e),
        };
        driver.after_outer(k, &theta);

        if stats.grad_phi_norm <= cfg.stationarity_tol {
            termination = Termination::Stationarity;
            break;
        }
    }

    Ok(Trajectory {
        records,
        final_theta: theta,
        termination,
    })
}

/// Mini-batch driver over a model and a retain/forget split.
pub struct OfmuDriver<'a> {
    problem: &'a DifferentiableProblem,
    sampler: MinibatchSampler<'a>,
    beta: f64,
    sim_floor: f64,
    grad_method: GradMethod,
    last_f: Option<LabeledBatch>,
    last_r: Option<LabeledBatch>,
}

impl<'a> OfmuDriver<'a> {
    pub fn new(
        problem: &'a DifferentiableProblem,
        split: &'a UnlearnSplit,
        cfg: &OfmuConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if split.retain.feature_dim() != problem.feature_dim()
            || split.forget.feature_dim() != problem.feature_dim()
        {
            return Err(CoreError::DimensionMismatch {
                expected: problem.feature_dim(),
                got: split.retain.feature_dim(),
            });
        }
        Ok(Self {
            problem,
            sampler: MinibatchSampler::new(split, cfg.batch_size, cfg.seed),
            beta: cfg.beta,
            sim_floor: cfg.sim_floor,
            grad_method: cfg.grad_method,
            last_f: None,
            last_r: None,
        })
    }
}

impl TwoLoopDriver for OfmuDriver<'_> {
    fn inner_gradient(&mut self, theta: &ParameterVector) -> Result<ParameterVector> {
        self.last_f = Some(self.sampler.next_forget()?);
        self.last_r = Some(self.sampler.next_retain()?);
        let ctx = ObjectiveContext::new(
            self.problem,
            self.last_f.as_ref().unwrap(),
            self.last_r.as_ref().unwrap(),
            self.beta,
            self.sim_floor,
        )?;
        grad_phi(&ctx, theta, self.grad_method)
    }

    fn stationarity_stats(&mut self, theta_in: &ParameterVector) -> Result<StepStats> {
        let batch_f = match &self.last_f {
            Some(b) => b.clone(),
            None => self.sampler.next_forget()?,
        };
        let batch_r = match &self.last_r {
            Some(b) => b.clone(),
            None => self.sampler.next_retain()?,
        };
        let ctx =
            ObjectiveContext::new(self.problem, &batch_f, &batch_r, self.beta, self.sim_floor)?;
        let g = grad_phi(&ctx, theta_in, self.grad_method)?;
        let g_f = self.problem.grad(theta_in, &batch_f)?;
        let g_r = self.problem.grad(theta_in, &batch_r)?;
        Ok(StepStats {
            grad_phi_norm: g.norm(),
            loss_r: Some(self.problem.eval_loss(theta_in, &batch_r)?),
            loss_f: Some(self.problem.eval_loss(theta_in, &batch_f)?),
            sim: Some(cosine_sim(&g_f, &g_r, self.sim_floor)?),
        })
    }

    fn outer_gradient(&mut self, theta_in: &ParameterVector, rho: f64) -> Result<ParameterVector> {
        // Fresh retain batch; the forget batch stays the last inner one.
        let fresh_r = self.sampler.next_retain()?;
        self.last_r = Some(fresh_r);
        let batch_f = match &self.last_f {
            Some(b) => b,
            None => {
                self.last_f = Some(self.sampler.next_forget()?);
                self.last_f.as_ref().unwrap()
            }
        };
        let ctx = ObjectiveContext::new(
            self.problem,
            batch_f,
            self.last_r.as_ref().unwrap(),
            self.beta,
            self.sim_floor,
        )?;
        grad_penalty_objective(&ctx, theta_in, rho, self.grad_method)
    }
}

/// Runs the full unlearning procedure on a model and split.
pub fn run_ofmu(
    problem: &DifferentiableProblem,
    split: &UnlearnSplit,
    theta0: &ParameterVector,
    cfg: &OfmuConfig,
) -> core::result::Result<Trajectory, RunError> {
    if theta0.dim() != problem.param_dim() {
        return Err(RunError::Eval(CoreError::DimensionMismatch {
            expected: problem.param_dim(),
            got: theta0.dim(),
        }));
    }
    let mut driver = OfmuDriver::new(problem, split, cfg)?;
    run_two_loop(&mut driver, theta0, cfg)
}
