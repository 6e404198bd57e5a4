//! Reference unlearning methods: exact retraining, fine-tuning on the
//! retain set, gradient ascent on the forget set, and the
//! gradient-difference scalarization.
//!
//! All four share the optimizer's trajectory format. Retraining draws
//! only from the retain stream — its result is invariant to the forget
//! set's contents by construction. Fine-tuning and gradient difference
//! run the same scalarized loop (`L_r − λ·L_f`) so that `λ = 0`
//! reproduces fine-tuning step for step.

use alloc::vec::Vec;

use crate::data::UnlearnSplit;
use crate::error::{invalid, CoreError, Result};
use crate::objective::{cosine_sim, DEFAULT_SIM_FLOOR};
use crate::optimizer::{
    RunError, StepStats, Termination, Trajectory, TrajectoryRecord, DIVERGENCE_LIMIT,
};
use crate::problem::DifferentiableProblem;
use crate::sampler::{derive_seed, MinibatchSampler};
use crate::vector::ParameterVector;

const RETRAIN_INIT_TAG: u64 = 0x5EED;

/// Which reference method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BaselineMethod {
    /// Fresh initialization, then descent on the retain set only.
    Retrain,
    /// Descent on the retain set from the given parameters.
    Finetune,
    /// Ascent on the forget set from the given parameters.
    GradAscent,
    /// Descent on `L_r − gd_lambda·L_f` from the given parameters.
    GradDiff,
}

/// Hyperparameters for one baseline run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Step size.
    pub lr: f64,
    /// Number of parameter updates.
    pub steps: usize,
    pub batch_size: usize,
    /// Forget-loss weight of the gradient-difference scalarization;
    /// ignored by the other methods.
    pub gd_lambda: f64,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, seed: u64) -> Self {
        Self {
            method,
            lr: 0.1,
            steps: 200,
            batch_size: 32,
            gd_lambda: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) {
            return Err(invalid("lr must be non-negative"));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(invalid("steps and batch_size must be at least 1"));
        }
        if !(self.gd_lambda >= 0.0) {
            return Err(invalid("gd_lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Runs the configured baseline and returns its trajectory.
///
/// `theta0` seeds every method except retraining, which only uses it to
/// size a fresh initialization (seeded from `cfg.seed`).
pub fn run_baseline(
    problem: &DifferentiableProblem,
    split: &UnlearnSplit,
    theta0: &ParameterVector,
    cfg: &BaselineConfig,
) -> core::result::Result<Trajectory, RunError> {
    cfg.validate()?;
    if theta0.dim() != problem.param_dim() {
        return Err(RunError::Eval(CoreError::DimensionMismatch {
            expected: problem.param_dim(),
            got: theta0.dim(),
        }));
    }

    let mut theta = match cfg.method {
        BaselineMethod::Retrain => problem.init_theta(derive_seed(cfg.seed, RETRAIN_INIT_TAG)),
        _ => theta0.clone(),
    };
    let mut sampler = MinibatchSampler::new(split, cfg.batch_size, cfg.seed);
    let mut records: Vec<TrajectoryRecord> = Vec::with_capacity(cfg.steps);

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

    for step in 0..cfg.steps {
        let stats;
        let update; // direction added to θ with step size lr
        match cfg.method {
            BaselineMethod::GradAscent => {
                let batch_f = sampler.next_forget()?;
                let g_f = problem.grad(&theta, &batch_f)?;
                stats = StepStats {
                    grad_phi_norm: g_f.norm(),
                    loss_r: None,
                    loss_f: Some(problem.eval_loss(&theta, &batch_f)?),
                    sim: None,
                };
                update = g_f; // ascend
            }
            BaselineMethod::Retrain => {
                let batch_r = sampler.next_retain()?;
                let g_r = problem.grad(&theta, &batch_r)?;
                stats = StepStats {
                    grad_phi_norm: g_r.norm(),
                    loss_r: Some(problem.eval_loss(&theta, &batch_r)?),
                    loss_f: None,
                    sim: None,
                };
                update = g_r.scaled(-1.0);
            }
            BaselineMethod::Finetune | BaselineMethod::GradDiff => {
                // One shared loop: finetune is the λ = 0 scalarization,
                // sampling (and logging) identically so trajectories
                // coincide bit for bit.
                let lambda = match cfg.method {
                    BaselineMethod::GradDiff => cfg.gd_lambda,
                    _ => 0.0,
                };
                let batch_f = sampler.next_forget()?;
                let batch_r = sampler.next_retain()?;
                let g_f = problem.grad(&theta, &batch_f)?;
                let g_r = problem.grad(&theta, &batch_r)?;
                let direction = if lambda == 0.0 {
                    g_r.clone()
                } else {
                    let mut d = g_r.clone();
                    d.add_scaled(-lambda, &g_f);
                    d
                };
                stats = StepStats {
                    grad_phi_norm: direction.norm(),
                    loss_r: Some(problem.eval_loss(&theta, &batch_r)?),
                    loss_f: Some(problem.eval_loss(&theta, &batch_f)?),
                    sim: Some(cosine_sim(&g_f, &g_r, DEFAULT_SIM_FLOOR)?),
                };
                update = direction.scaled(-1.0);
            }
        }

        records.push(TrajectoryRecord {
            k: step,
            rho: 0.0,
            grad_phi_norm: stats.grad_phi_norm,
            loss_r: stats.loss_r,
            loss_f: stats.loss_f,
            sim: stats.sim,
            wall_time_s: elapsed(),
        });

        let mut next = theta.clone();
        next.add_scaled(cfg.lr, &update);
        if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
            return Err(RunError::Diverged {
                outer: Some(step),
                inner: None,
                partial: Some(alloc::boxed::Box::new(Trajectory {
                    records,
                    final_theta: theta,
                    termination: Termination::MaxIterations,
                })),
            });
        }
        theta = next;
    }

    Ok(Trajectory {
        records,
        final_theta: theta,
        termination: Termination::MaxIterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, split_classwise};
    use alloc::vec;

    fn fixture() -> (DifferentiableProblem, crate::data::UnlearnSplit) {
        let data = gen_blobs(2, 3, 10, 2, 6.0).unwrap();
        let split = split_classwise(&data, &[0]).unwrap();
        let problem = DifferentiableProblem::logistic_regression(2, 3).unwrap();
        (problem, split)
    }

    #[test]
    fn one_explicit_ascent_step_matches_hand_arithmetic() {
        // Linear model, sample x = 1 with target 1: L = ½(w + b − 1)².
        let problem = DifferentiableProblem::linear_regression(1, 1).unwrap();
        let data = crate::data::Dataset::new(
            vec![1.0, 1.0],
            vec![0, 0],
            1,
            1,
            crate::data::Provenance::External {
                label: "fixture".into(),
            },
        )
        .unwrap();
        // both rows identical; forget = row 0, retain = row 1 via random split
        let split = crate::data::split_random(&data, 0.5, 0).unwrap();
        let mut cfg = BaselineConfig::new(BaselineMethod::GradAscent, 0);
        cfg.lr = 1.0;
        cfg.steps = 1;
        cfg.batch_size = 4;
        // (w, b) = (2, 0): residual 1, grad (1, 1), ascent lands at (3, 1).
        let theta0 = ParameterVector::new(vec![2.0, 0.0]).unwrap();
        let traj = run_baseline(&problem, &split, &theta0, &cfg).unwrap();
        assert_eq!(traj.final_theta.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn zero_lr_finetune_is_identity() {
        let (problem, split) = fixture();
        let mut cfg = BaselineConfig::new(BaselineMethod::Finetune, 3);
        cfg.lr = 0.0;
        cfg.steps = 5;
        let theta0 = problem.init_theta(0);
        let traj = run_baseline(&problem, &split, &theta0, &cfg).unwrap();
        assert_eq!(traj.final_theta, theta0);
    }

    #[test]
    fn graddiff_with_zero_lambda_matches_finetune_bitwise() {
        let (problem, split) = fixture();
        let theta0 = problem.init_theta(4);
        let mut ft = BaselineConfig::new(BaselineMethod::Finetune, 11);
        ft.steps = 20;
        let mut gd = BaselineConfig::new(BaselineMethod::GradDiff, 11);
        gd.steps = 20;
        gd.gd_lambda = 0.0;
        let a = run_baseline(&problem, &split, &theta0, &ft).unwrap();
        let b = run_baseline(&problem, &split, &theta0, &gd).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn retrain_ignores_forget_contents() {
        let (problem, split) = fixture();
        // Corrupt the forget side; retraining must not notice.
        let mut corrupted = split.clone();
        corrupted.forget = split
            .forget
            .subset(&[0, 0, 0], "forget stand-in with repeated rows")
            .unwrap();
        let theta0 = problem.init_theta(0);
        let mut cfg = BaselineConfig::new(BaselineMethod::Retrain, 21);
        cfg.steps = 30;
        let a = run_baseline(&problem, &split, &theta0, &cfg).unwrap();
        let b = run_baseline(&problem, &corrupted, &theta0, &cfg).unwrap();
        assert_eq!(a, b);
        // and θ0 only matters through its dimension
        let other0 = problem.init_theta(99);
        let c = run_baseline(&problem, &split, &other0, &cfg).unwrap();
        assert_eq!(a.final_theta, c.final_theta);
    }

    #[test]
    fn ascent_increases_the_forget_loss_initially() {
        let (problem, split) = fixture();
        // Train briefly first so the forget loss is low.
        let mut warm = BaselineConfig::new(BaselineMethod::Finetune, 1);
        warm.steps = 100;
        warm.lr = 0.3;
        let base = run_baseline(&problem, &split, &problem.init_theta(0), &warm)
            .unwrap()
            .final_theta;
        let full_f = split.forget.full_batch().unwrap();
        let before = problem.eval_loss(&base, &full_f).unwrap();

        let mut ga = BaselineConfig::new(BaselineMethod::GradAscent, 2);
        ga.steps = 1;
        ga.lr = 0.05;
        ga.batch_size = split.forget.len(); // full batch
        let after_theta = run_baseline(&problem, &split, &base, &ga).unwrap().final_theta;
        let after = problem.eval_loss(&after_theta, &full_f).unwrap();
        assert!(after > before, "ascent step: {before} → {after}");
    }
}
