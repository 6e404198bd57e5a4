//! Experiment configuration: a TOML file with a strict schema.
//! Unknown keys are errors — silent config typos are the main source
//! of irreproducible runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ofmu_core::baselines::{BaselineConfig, BaselineMethod};
use ofmu_core::data::{gen_blobs, split_classwise, split_random, Dataset, UnlearnSplit};
use ofmu_core::metrics::UdiConfig;
use ofmu_core::objective::GradMethod;
use ofmu_core::optimizer::OfmuConfig;
use ofmu_core::problem::{DifferentiableProblem, LossKind};
use ofmu_core::sampler::derive_seed;

use crate::error::{LabError, Result};
use crate::formats::read_dataset_auto;

// Seed-derivation tags; one user-facing seed fans out deterministically.
pub const TAG_TRAIN_DATA: u64 = 1;
pub const TAG_TEST_DATA: u64 = 2;
pub const TAG_SPLIT: u64 = 3;
pub const TAG_BASE_INIT: u64 = 4;
pub const TAG_BASE_SAMPLER: u64 = 5;
pub const TAG_MIA: u64 = 6;
pub const TAG_METHOD_BASE: u64 = 100;
pub const TAG_UDI_RUN_BASE: u64 = 10_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub dataset: DatasetSpec,
    pub split: SplitSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub base_training: BaseTrainingSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub udi_study: Option<UdiStudySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        class_count: usize,
        samples_per_class: usize,
        feature_dim: usize,
        separation: f64,
        /// Held-out draw size per class; defaults to a quarter of the
        /// training draw (at least one).
        #[serde(default)]
        test_samples_per_class: Option<usize>,
    },
    File {
        path: String,
        test_path: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitSpec {
    ClassWise { target_classes: Vec<usize> },
    Random { fraction: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: FamilySpec,
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default)]
    pub layer_widths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySpec {
    LinearRegression,
    LogisticRegression,
    Mlp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseTrainingSpec {
    #[serde(default = "default_base_lr")]
    pub lr: f64,
    #[serde(default = "default_base_steps")]
    pub max_steps: usize,
    #[serde(default = "default_base_batch")]
    pub batch_size: usize,
    #[serde(default = "default_target_accuracy")]
    pub target_accuracy: f64,
}

fn default_base_lr() -> f64 {
    0.5
}
fn default_base_steps() -> usize {
    4000
}
fn default_base_batch() -> usize {
    64
}
fn default_target_accuracy() -> f64 {
    0.95
}

impl Default for BaseTrainingSpec {
    fn default() -> Self {
        Self {
            lr: default_base_lr(),
            max_steps: default_base_steps(),
            batch_size: default_base_batch(),
            target_accuracy: default_target_accuracy(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "one")]
    pub udi_grad_weight: f64,
    #[serde(default = "one")]
    pub udi_conflict_weight: f64,
    #[serde(default = "one")]
    pub udi_margin_weight: f64,
    /// Defaults to `ln(class_count)`, the uniform-prediction loss.
    #[serde(default)]
    pub udi_loss_target: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            udi_grad_weight: 1.0,
            udi_conflict_weight: 1.0,
            udi_margin_weight: 1.0,
            udi_loss_target: None,
        }
    }
}

impl MetricsSpec {
    pub fn udi_config(&self, class_count: usize) -> UdiConfig {
        UdiConfig {
            grad_weight: self.udi_grad_weight,
            conflict_weight: self.udi_conflict_weight,
            margin_weight: self.udi_margin_weight,
            loss_target: self
                .udi_loss_target
                .unwrap_or_else(|| (class_count as f64).ln()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    Ofmu {
        name: String,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_inner_lr")]
        inner_lr: f64,
        #[serde(default = "default_outer_lr")]
        outer_lr: f64,
        #[serde(default = "default_inner_steps")]
        inner_steps: usize,
        #[serde(default = "default_outer_iters")]
        outer_iters: usize,
        #[serde(default = "default_method_batch")]
        batch_size: usize,
        #[serde(default = "default_rho_init")]
        rho_init: f64,
        #[serde(default = "default_rho_growth")]
        rho_growth: f64,
        #[serde(default = "default_rho_max")]
        rho_max: f64,
        #[serde(default = "default_stationarity_tol")]
        stationarity_tol: f64,
        #[serde(default = "default_grad_method")]
        grad_method: GradMethod,
    },
    Retrain {
        name: String,
        #[serde(default = "default_baseline_lr")]
        lr: f64,
        #[serde(default = "default_baseline_steps")]
        steps: usize,
        #[serde(default = "default_method_batch")]
        batch_size: usize,
    },
    Finetune {
        name: String,
        #[serde(default = "default_baseline_lr")]
        lr: f64,
        #[serde(default = "default_baseline_steps")]
        steps: usize,
        #[serde(default = "default_method_batch")]
        batch_size: usize,
    },
    GradAscent {
        name: String,
        #[serde(default = "default_baseline_lr")]
        lr: f64,
        #[serde(default = "default_baseline_steps")]
        steps: usize,
        #[serde(default = "default_method_batch")]
        batch_size: usize,
    },
    GradDiff {
        name: String,
        #[serde(default = "default_baseline_lr")]
        lr: f64,
        #[serde(default = "default_baseline_steps")]
        steps: usize,
        #[serde(default = "default_method_batch")]
        batch_size: usize,
        #[serde(default = "one")]
        gd_lambda: f64,
    },
}

fn default_beta() -> f64 {
    0.5
}
fn default_inner_lr() -> f64 {
    0.005
}
fn default_outer_lr() -> f64 {
    0.3
}
fn default_inner_steps() -> usize {
    5
}
fn default_outer_iters() -> usize {
    40
}
fn default_method_batch() -> usize {
    32
}
fn default_rho_init() -> f64 {
    1e-4
}
fn default_rho_growth() -> f64 {
    1.3
}
fn default_rho_max() -> f64 {
    0.1
}
fn default_stationarity_tol() -> f64 {
    1e-6
}
fn default_grad_method() -> GradMethod {
    GradMethod::FdExact
}
fn default_baseline_lr() -> f64 {
    0.1
}
fn default_baseline_steps() -> usize {
    200
}

impl MethodSpec {
    pub fn name(&self) -> &str {
        match self {
            MethodSpec::Ofmu { name, .. }
            | MethodSpec::Retrain { name, .. }
            | MethodSpec::Finetune { name, .. }
            | MethodSpec::GradAscent { name, .. }
            | MethodSpec::GradDiff { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MethodSpec::Ofmu { .. } => "ofmu",
            MethodSpec::Retrain { .. } => "retrain",
            MethodSpec::Finetune { .. } => "finetune",
            MethodSpec::GradAscent { .. } => "grad-ascent",
            MethodSpec::GradDiff { .. } => "grad-diff",
        }
    }

    /// Core config for this method under the given run seed, with an
    /// optional override of the iteration budget (used by the
    /// per-sample coupling protocol).
    pub fn to_runnable(&self, seed: u64, budget: Option<usize>) -> RunnableMethod {
        match *self {
            MethodSpec::Ofmu {
                beta,
                inner_lr,
                outer_lr,
                inner_steps,
                outer_iters,
                batch_size,
                rho_init,
                rho_growth,
                rho_max,
                stationarity_tol,
                grad_method,
                ..
            } => RunnableMethod::Ofmu(OfmuConfig {
                beta,
                inner_lr,
                outer_lr,
                inner_steps,
                outer_iters: budget.unwrap_or(outer_iters),
                batch_size,
                rho_init,
                rho_growth,
                rho_max,
                stationarity_tol,
                sim_floor: ofmu_core::objective::DEFAULT_SIM_FLOOR,
                grad_method,
                seed,
            }),
            MethodSpec::Retrain {
                lr,
                steps,
                batch_size,
                ..
            } => RunnableMethod::Baseline(BaselineConfig {
                method: BaselineMethod::Retrain,
                lr,
                steps: budget.unwrap_or(steps),
                batch_size,
                gd_lambda: 0.0,
                seed,
            }),
            MethodSpec::Finetune {
                lr,
                steps,
                batch_size,
                ..
            } => RunnableMethod::Baseline(BaselineConfig {
                method: BaselineMethod::Finetune,
                lr,
                steps: budget.unwrap_or(steps),
                batch_size,
                gd_lambda: 0.0,
                seed,
            }),
            MethodSpec::GradAscent {
                lr,
                steps,
                batch_size,
                ..
            } => RunnableMethod::Baseline(BaselineConfig {
                method: BaselineMethod::GradAscent,
                lr,
                steps: budget.unwrap_or(steps),
                batch_size,
                gd_lambda: 0.0,
                seed,
            }),
            MethodSpec::GradDiff {
                lr,
                steps,
                batch_size,
                gd_lambda,
                ..
            } => RunnableMethod::Baseline(BaselineConfig {
                method: BaselineMethod::GradDiff,
                lr,
                steps: budget.unwrap_or(steps),
                batch_size,
                gd_lambda,
                seed,
            }),
        }
    }
}

/// A method spec resolved into a core configuration.
#[derive(Debug, Clone)]
pub enum RunnableMethod {
    Ofmu(OfmuConfig),
    Baseline(BaselineConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UdiStudySpec {
    /// Names of configured methods to couple against difficulty.
    pub methods: Vec<String>,
    /// Parameter updates (outer iterations for the two-loop method)
    /// granted to each per-sample run.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Cap on how many forget samples enter the study; evenly spaced
    /// over the forget set when it is larger.
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
}

fn default_budget() -> usize {
    5
}
fn default_max_samples() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(LabError::config("at least one method must be configured"));
        }
        let mut names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::config("method names must be unique"));
        }
        if let Some(study) = &self.udi_study {
            for name in &study.methods {
                if !self.methods.iter().any(|m| m.name() == name) {
                    return Err(LabError::config(format!(
                        "udi_study references unknown method '{name}'"
                    )));
                }
            }
            if study.budget == 0 || study.max_samples == 0 {
                return Err(LabError::config(
                    "udi_study budget and max_samples must be positive",
                ));
            }
        }
        if let DatasetSpec::Blobs {
            class_count,
            samples_per_class,
            feature_dim,
            separation,
            ..
        } = &self.dataset
        {
            if *class_count == 0 || *samples_per_class == 0 || *feature_dim == 0 {
                return Err(LabError::config("dataset counts must be positive"));
            }
            if !(*separation > 0.0) {
                return Err(LabError::config("separation must be positive"));
            }
        }
        match &self.split {
            SplitSpec::ClassWise { target_classes } => {
                if target_classes.is_empty() {
                    return Err(LabError::config("target_classes must be non-empty"));
                }
            }
            SplitSpec::Random { fraction } => {
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(LabError::config("fraction must lie in (0, 1)"));
                }
            }
        }
        if self.model.family == FamilySpec::Mlp && self.model.layer_widths.is_none() {
            return Err(LabError::config("mlp requires layer_widths"));
        }
        Ok(())
    }

    /// Training and held-out datasets under this config's seed.
    pub fn build_datasets(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            DatasetSpec::Blobs {
                class_count,
                samples_per_class,
                feature_dim,
                separation,
                test_samples_per_class,
            } => {
                let train = gen_blobs(
                    derive_seed(self.seed, TAG_TRAIN_DATA),
                    *class_count,
                    *samples_per_class,
                    *feature_dim,
                    *separation,
                )?;
                let test_n = test_samples_per_class.unwrap_or((samples_per_class / 4).max(1));
                let test = gen_blobs(
                    derive_seed(self.seed, TAG_TEST_DATA),
                    *class_count,
                    test_n,
                    *feature_dim,
                    *separation,
                )?;
                Ok((train, test))
            }
            DatasetSpec::File { path, test_path } => {
                let train = read_dataset_auto(Path::new(path))?;
                let test = read_dataset_auto(Path::new(test_path))?;
                if train.feature_dim() != test.feature_dim() {
                    return Err(LabError::config(
                        "train and test datasets disagree on feature_dim",
                    ));
                }
                Ok((train, test))
            }
        }
    }

    pub fn build_split(&self, train: &Dataset) -> Result<UnlearnSplit> {
        match &self.split {
            SplitSpec::ClassWise { target_classes } => {
                split_classwise(train, target_classes).map_err(LabError::from)
            }
            SplitSpec::Random { fraction } => {
                split_random(train, *fraction, derive_seed(self.seed, TAG_SPLIT))
                    .map_err(LabError::from)
            }
        }
    }

    pub fn build_problem(&self, train: &Dataset) -> Result<DifferentiableProblem> {
        let d = train.feature_dim();
        let c = train.class_count();
        match self.model.family {
            FamilySpec::LinearRegression => {
                if matches!(self.model.loss, Some(LossKind::CrossEntropy)) {
                    return Err(LabError::config(
                        "cross-entropy with a linear model is the logistic-regression family",
                    ));
                }
                DifferentiableProblem::linear_regression(d, c).map_err(LabError::from)
            }
            FamilySpec::LogisticRegression => {
                if matches!(self.model.loss, Some(LossKind::MeanSquaredError)) {
                    return Err(LabError::config(
                        "logistic-regression uses cross-entropy; pick mlp for squared error",
                    ));
                }
                DifferentiableProblem::logistic_regression(d, c).map_err(LabError::from)
            }
            FamilySpec::Mlp => {
                let widths = self
                    .model
                    .layer_widths
                    .clone()
                    .ok_or_else(|| LabError::config("mlp requires layer_widths"))?;
                if widths.first() != Some(&d) {
                    return Err(LabError::config(format!(
                        "layer_widths must start at the feature dimension {d}"
                    )));
                }
                if widths.last() != Some(&c) {
                    return Err(LabError::config(format!(
                        "layer_widths must end at the class count {c}"
                    )));
                }
                let loss = self.model.loss.unwrap_or(LossKind::CrossEntropy);
                DifferentiableProblem::mlp(widths, loss).map_err(LabError::from)
            }
        }
    }

    /// Deterministic per-method seed: global seed and method index.
    pub fn method_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, TAG_METHOD_BASE + index as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
seed = 7
output_dir = "out"

[dataset]
kind = "blobs"
class_count = 4
samples_per_class = 30
feature_dim = 2
separation = 8.0

[split]
mode = "class-wise"
target_classes = [0]

[model]
family = "logistic-regression"

[[methods]]
name = "retrain"
kind = "retrain"
steps = 50

[[methods]]
name = "ofmu"
kind = "ofmu"
outer_iters = 5
"#;

    #[test]
    fn parses_the_example_config() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[1].kind(), "ofmu");
        let (train, test) = cfg.build_datasets().unwrap();
        assert_eq!(train.len(), 120);
        assert_eq!(test.len(), 4 * 7);
        let split = cfg.build_split(&train).unwrap();
        assert_eq!(split.forget.len(), 30);
        cfg.build_problem(&train).unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = EXAMPLE.replace("separation = 8.0", "separation = 8.0\nbogus_key = 1");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(matches!(err, LabError::Config(_)), "{err}");
    }

    #[test]
    fn duplicate_method_names_are_rejected() {
        let bad = EXAMPLE.replace("name = \"ofmu\"", "name = \"retrain\"");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn udi_study_must_reference_known_methods() {
        let with_study = format!("{EXAMPLE}\n[udi_study]\nmethods = [\"nope\"]\n");
        assert!(ExperimentConfig::from_toml(&with_study).is_err());
        let ok = format!("{EXAMPLE}\n[udi_study]\nmethods = [\"ofmu\"]\n");
        assert!(ExperimentConfig::from_toml(&ok).is_ok());
    }

    #[test]
    fn mlp_widths_are_cross_checked() {
        let cfg_text = EXAMPLE.replace(
            "family = \"logistic-regression\"",
            "family = \"mlp\"\nlayer_widths = [3, 8, 4]",
        );
        let cfg = ExperimentConfig::from_toml(&cfg_text).unwrap();
        let (train, _) = cfg.build_datasets().unwrap();
        // widths start at 3 but the data has 2 features
        assert!(cfg.build_problem(&train).is_err());
    }
}
