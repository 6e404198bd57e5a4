//! Difficulty-vs-damage coupling study.
//!
//! For each selected forget sample the study computes its difficulty
//! index at the base parameters, then runs each configured method with
//! a small fixed update budget against that sample alone (retain set
//! unchanged) and measures the retain-accuracy drop it causes. The
//! per-method rank correlation between difficulty and drop quantifies
//! how much harder samples cost in collateral utility.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ofmu_core::baselines::run_baseline;
use ofmu_core::data::UnlearnSplit;
use ofmu_core::metrics::{accuracy, spearman, udi};
use ofmu_core::optimizer::{run_ofmu, RunError};
use ofmu_core::sampler::derive_seed;
use ofmu_core::CoreError;

use crate::config::{ExperimentConfig, RunnableMethod, TAG_UDI_RUN_BASE};
use crate::error::{LabError, Result};
use crate::experiment::{prepare, PreparedExperiment};
use crate::report::Environment;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodCoupling {
    pub name: String,
    /// Rank correlation between difficulty and retain-accuracy drop;
    /// absent when undefined (constant drops).
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
    /// Per-sample retain-accuracy drops, ordered like `sample_rows`.
    pub drops: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UdiStudyReport {
    pub environment: Environment,
    pub seed: u64,
    /// Forget-set row indices that entered the study.
    pub sample_rows: Vec<usize>,
    pub udi_values: Vec<f64>,
    pub retain_accuracy_before: f64,
    pub methods: Vec<MethodCoupling>,
}

impl UdiStudyReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn write_tau_csv(&self, path: &Path) -> Result<()> {
        let mut out = fs::File::create(path)?;
        writeln!(out, "method,tau")?;
        for m in &self.methods {
            match m.tau {
                Some(tau) => writeln!(out, "{},{tau:?}", m.name)?,
                None => writeln!(out, "{},", m.name)?,
            }
        }
        Ok(())
    }
}

/// Evenly spaced selection of `take` rows from `0..n`.
fn spaced_rows(n: usize, take: usize) -> Vec<usize> {
    let take = take.min(n);
    (0..take).map(|i| i * n / take).collect()
}

/// Runs the coupling study for the config's `udi_study` section.
pub fn udi_coupling_study(config: &ExperimentConfig) -> Result<UdiStudyReport> {
    let study = config
        .udi_study
        .clone()
        .ok_or_else(|| LabError::config("config has no [udi_study] section"))?;
    let prepared = prepare(config)?;
    let class_count = prepared.train.class_count();
    let udi_cfg = config.metrics.udi_config(class_count);

    let retain_full = prepared.split.retain.full_batch()?;
    let ra_before = accuracy(&prepared.problem, &prepared.theta_base, &retain_full)?;

    let rows = spaced_rows(prepared.split.forget.len(), study.max_samples);
    let mut udi_values = Vec::with_capacity(rows.len());
    for &row in &rows {
        let sample = prepared.split.forget.batch(&[row])?;
        udi_values.push(udi(
            &prepared.problem,
            &prepared.theta_base,
            &sample,
            &retain_full,
            &udi_cfg,
        )?);
    }

    let mut methods = Vec::new();
    for method_name in &study.methods {
        let (index, spec) = config
            .methods
            .iter()
            .enumerate()
            .find(|(_, m)| m.name() == method_name)
            .ok_or_else(|| LabError::config(format!("unknown method '{method_name}'")))?;

        let mut drops = Vec::with_capacity(rows.len());
        for (j, &row) in rows.iter().enumerate() {
            let single = single_sample_split(&prepared, row)?;
            let seed = derive_seed(
                config.seed,
                TAG_UDI_RUN_BASE + (index as u64) * 100_000 + j as u64,
            );
            let theta_after = match spec.to_runnable(seed, Some(study.budget)) {
                RunnableMethod::Ofmu(cfg) => {
                    run_ofmu(&prepared.problem, &single, &prepared.theta_base, &cfg)
                }
                RunnableMethod::Baseline(cfg) => {
                    run_baseline(&prepared.problem, &single, &prepared.theta_base, &cfg)
                }
            };
            let theta_after = match theta_after {
                Ok(trajectory) => trajectory.final_theta,
                // A diverged budget run still damaged the model; score
                // its last finite iterate.
                Err(RunError::Diverged {
                    partial: Some(partial),
                    ..
                }) => partial.final_theta,
                Err(RunError::Diverged { partial: None, .. }) => prepared.theta_base.clone(),
                Err(RunError::Eval(e)) => {
                    return Err(LabError::runtime(format!(
                        "method '{method_name}' sample {row}: {e}"
                    )))
                }
            };
            let ra_after = accuracy(&prepared.problem, &theta_after, &retain_full)?;
            drops.push(ra_before - ra_after);
        }

        let (tau, undefined_reason) = match spearman(&udi_values, &drops) {
            Ok(t) => (Some(t), None),
            Err(CoreError::UndefinedCorrelation) => (
                None,
                Some("constant sequence: zero rank variance".to_string()),
            ),
            Err(e) => return Err(e.into()),
        };
        methods.push(MethodCoupling {
            name: method_name.clone(),
            tau,
            undefined_reason,
            drops,
        });
    }

    Ok(UdiStudyReport {
        environment: Environment::current(),
        seed: config.seed,
        sample_rows: rows,
        udi_values,
        retain_accuracy_before: ra_before,
        methods,
    })
}

fn single_sample_split(prepared: &PreparedExperiment, forget_row: usize) -> Result<UnlearnSplit> {
    Ok(UnlearnSplit {
        retain: prepared.split.retain.clone(),
        forget: prepared
            .split
            .forget
            .subset(&[forget_row], "single-sample coupling target")?,
        mode: prepared.split.mode.clone(),
        retain_indices: prepared.split.retain_indices.clone(),
        forget_indices: vec![prepared.split.forget_indices[forget_row]],
    })
}

/// Runs the study and writes `udi_report.json` and `udi_taus.csv`.
pub fn run_udi_study(config: &ExperimentConfig, out_dir: &Path) -> Result<UdiStudyReport> {
    fs::create_dir_all(out_dir)?;
    let report = udi_coupling_study(config)?;
    report.save(&out_dir.join("udi_report.json"))?;
    report.write_tau_csv(&out_dir.join("udi_taus.csv"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaced_rows_are_strictly_increasing_and_bounded() {
        let rows = spaced_rows(100, 30);
        assert_eq!(rows.len(), 30);
        for w in rows.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(*rows.last().unwrap() < 100);
        assert_eq!(spaced_rows(5, 100), vec![0, 1, 2, 3, 4]);
    }
}
