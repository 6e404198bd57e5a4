//! Experiment orchestration: data, split, base model, unlearning
//! methods, metric aggregation, artifact emission.

use std::fs;
use std::path::{Path, PathBuf};

use ofmu_core::data::{Dataset, UnlearnSplit};
use ofmu_core::metrics::{accuracy, mia_efficacy, overall_score};
use ofmu_core::optimizer::{run_ofmu, RunError, Trajectory, DIVERGENCE_LIMIT};
use ofmu_core::baselines::run_baseline;
use ofmu_core::problem::{DifferentiableProblem, LabeledBatch};
use ofmu_core::sampler::{derive_seed, DatasetSampler};
use ofmu_core::ParameterVector;

use crate::config::{
    ExperimentConfig, RunnableMethod, TAG_BASE_INIT, TAG_BASE_SAMPLER, TAG_MIA,
};
use crate::error::{LabError, Result};
use crate::formats::write_theta;
use crate::report::{
    BaseModelReport, Environment, MethodMetricsReport, MethodReport, MethodStatus, RunReport,
};

/// Everything shared by the methods of one experiment: datasets, the
/// split, the model, and the trained base parameters every unlearner
/// starts from.
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub split: UnlearnSplit,
    pub problem: DifferentiableProblem,
    pub theta_base: ParameterVector,
    pub base_steps: usize,
    pub base_accuracy: f64,
}

/// Builds the data, split, and model, then trains the base model on
/// the full dataset until it reaches the target training accuracy (or
/// the step cap) — unlearning must start from parameters that actually
/// fit the forget set.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    let (train, test) = config.build_datasets()?;
    if train.class_count() != test.class_count() {
        return Err(LabError::config(
            "train and test datasets disagree on class_count",
        ));
    }
    let split = config.build_split(&train)?;
    let problem = config.build_problem(&train)?;
    let (theta_base, base_steps, base_accuracy) = train_base_model(&problem, &train, config)?;
    Ok(PreparedExperiment {
        config: config.clone(),
        train,
        test,
        split,
        problem,
        theta_base,
        base_steps,
        base_accuracy,
    })
}

fn train_base_model(
    problem: &DifferentiableProblem,
    train: &Dataset,
    config: &ExperimentConfig,
) -> Result<(ParameterVector, usize, f64)> {
    let spec = &config.base_training;
    let mut theta = problem.init_theta(derive_seed(config.seed, TAG_BASE_INIT));
    let mut sampler = DatasetSampler::new(
        train,
        spec.batch_size,
        derive_seed(config.seed, TAG_BASE_SAMPLER),
    );
    let full = train.full_batch()?;
    let mut steps = 0;
    let mut acc = accuracy(problem, &theta, &full)?;
    const EVAL_EVERY: usize = 25;
    while steps < spec.max_steps && acc < spec.target_accuracy {
        for _ in 0..EVAL_EVERY.min(spec.max_steps - steps) {
            let batch = sampler.next_batch()?;
            let g = problem.grad(&theta, &batch)?;
            theta.add_scaled(-spec.lr, &g);
            steps += 1;
        }
        if !theta.is_finite() || theta.max_abs() > DIVERGENCE_LIMIT {
            return Err(LabError::runtime(format!(
                "base training diverged after {steps} steps; lower base_training.lr"
            )));
        }
        acc = accuracy(problem, &theta, &full)?;
    }
    Ok((theta, steps, acc))
}

/// Outcome of one method run.
pub struct MethodOutcome {
    pub name: String,
    pub kind: String,
    pub status: MethodStatus,
    /// Full trajectory on success, partial trajectory on divergence
    /// (when one was recoverable).
    pub trajectory: Option<Trajectory>,
}

/// Runs one configured method from the base parameters. Divergence is
/// a recorded per-method outcome; evaluation errors (bad dimensions,
/// invalid arguments) abort with context.
pub fn run_method(prepared: &PreparedExperiment, index: usize) -> Result<MethodOutcome> {
    let spec = &prepared.config.methods[index];
    let seed = prepared.config.method_seed(index);
    let result = match spec.to_runnable(seed, None) {
        RunnableMethod::Ofmu(cfg) => run_ofmu(
            &prepared.problem,
            &prepared.split,
            &prepared.theta_base,
            &cfg,
        ),
        RunnableMethod::Baseline(cfg) => run_baseline(
            &prepared.problem,
            &prepared.split,
            &prepared.theta_base,
            &cfg,
        ),
    };
    match result {
        Ok(trajectory) => Ok(MethodOutcome {
            name: spec.name().to_string(),
            kind: spec.kind().to_string(),
            status: MethodStatus::Ok,
            trajectory: Some(trajectory),
        }),
        Err(RunError::Diverged {
            outer,
            inner,
            partial,
        }) => Ok(MethodOutcome {
            name: spec.name().to_string(),
            kind: spec.kind().to_string(),
            status: MethodStatus::Diverged { outer, inner },
            trajectory: partial.map(|b| *b),
        }),
        Err(RunError::Eval(e)) => Err(LabError::runtime(format!(
            "method '{}': {e}",
            spec.name()
        ))),
    }
}

/// The four headline metrics of one unlearned model.
pub fn evaluate_method(
    prepared: &PreparedExperiment,
    theta: &ParameterVector,
) -> Result<(f64, f64, f64, f64)> {
    let forget = prepared.split.forget.full_batch()?;
    let retain = prepared.split.retain.full_batch()?;
    let test = prepared.test.full_batch()?;
    let forget_acc = accuracy(&prepared.problem, theta, &forget)?;
    let ua = 1.0 - forget_acc;
    let ra = accuracy(&prepared.problem, theta, &retain)?;
    let ta = accuracy(&prepared.problem, theta, &test)?;
    let mia = mia_efficacy(
        &prepared.problem,
        theta,
        &retain,
        &test,
        &forget,
        derive_seed(prepared.config.seed, TAG_MIA),
    )?;
    Ok((ua, ra, ta, mia))
}

/// Runs the whole experiment and writes every artifact into
/// `out_dir`: `report.json`, `metrics.csv`, `config_echo.toml`,
/// `base_theta.bin`, and per-method trajectory/checkpoint files.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(out_dir)?;
    let prepared = prepare(config)?;

    let base_theta_path = "base_theta.bin".to_string();
    write_theta(&out_dir.join(&base_theta_path), &prepared.theta_base)?;

    let mut methods: Vec<MethodReport> = Vec::new();
    let mut metric_rows: Vec<(usize, [f64; 4])> = Vec::new();

    for index in 0..config.methods.len() {
        let outcome = run_method(&prepared, index)?;
        let trajectory_path = format!("{}_trajectory.jsonl", outcome.name);
        let mut theta_path = None;
        let mut termination = None;
        let mut iterations = 0;

        if let Some(trajectory) = &outcome.trajectory {
            iterations = trajectory.records.len();
            let checkpoint = format!("{}_theta.bin", outcome.name);
            write_theta(&out_dir.join(&checkpoint), &trajectory.final_theta)?;
            crate::report::write_trajectory_jsonl(
                &out_dir.join(&trajectory_path),
                trajectory,
                &checkpoint,
            )?;
            theta_path = Some(checkpoint);
            termination = Some(trajectory.termination);
        }

        let metrics = match (&outcome.status, &outcome.trajectory) {
            (MethodStatus::Ok, Some(trajectory)) => {
                let (ua, ra, ta, mia) = evaluate_method(&prepared, &trajectory.final_theta)?;
                metric_rows.push((methods.len(), [ua, ra, ta, mia]));
                Some(MethodMetricsReport {
                    ua,
                    ra,
                    ta,
                    mia,
                    overall: None, // filled after the table is complete
                })
            }
            _ => None,
        };

        methods.push(MethodReport {
            name: outcome.name,
            kind: outcome.kind,
            status: outcome.status,
            termination,
            iterations,
            theta_path,
            trajectory_path,
            metrics,
        });
    }

    // Normalized overall column over the successful methods.
    if !metric_rows.is_empty() {
        let table: Vec<Vec<f64>> = metric_rows.iter().map(|(_, row)| row.to_vec()).collect();
        if let Ok(overall) = overall_score(&table) {
            for ((method_index, _), score) in metric_rows.iter().zip(overall) {
                if let Some(metrics) = &mut methods[*method_index].metrics {
                    metrics.overall = Some(score);
                }
            }
        }
    }

    let report = RunReport {
        environment: Environment::current(),
        seed: config.seed,
        config: config.clone(),
        base: BaseModelReport {
            steps: prepared.base_steps,
            train_accuracy: prepared.base_accuracy,
            theta_path: base_theta_path,
        },
        methods,
    };

    report.save(&out_dir.join("report.json"))?;
    report.write_metrics_csv(&out_dir.join("metrics.csv"))?;
    let echo = toml::to_string_pretty(config)
        .map_err(|e| LabError::runtime(format!("config echo: {e}")))?;
    fs::write(out_dir.join("config_echo.toml"), echo)?;
    Ok(report)
}

/// Output directory for a config, honoring a CLI override of the seed
/// (the directory comes from the config as-is).
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&config.output_dir)
}

/// Convenience for tests: a single full batch of a dataset.
pub fn full_batch(data: &Dataset) -> Result<LabeledBatch> {
    data.full_batch().map_err(LabError::from)
}
