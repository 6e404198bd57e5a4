//! Run reports and their serialized forms.
//!
//! A run emits `report.json` (the full record: environment, config
//! echo, base-model summary, per-method outcomes and metrics),
//! `metrics.csv` (one row per successful method: method, UA, RA, TA,
//! MIA, overall), per-method trajectory JSON-lines, and binary
//! parameter checkpoints. None of these carry timestamps; two runs of
//! the same config and seed produce byte-identical report and CSV
//! files, and trajectory lines differ only in their `wall_time_s`
//! field.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use ofmu_core::optimizer::{Termination, Trajectory};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package: "ofmu-lab".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseModelReport {
    pub steps: usize,
    pub train_accuracy: f64,
    pub theta_path: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MethodMetricsReport {
    pub ua: f64,
    pub ra: f64,
    pub ta: f64,
    pub mia: f64,
    /// Average of max-normalized metric columns across methods; absent
    /// when the normalization is undefined (an all-zero column).
    pub overall: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum MethodStatus {
    Ok,
    Diverged {
        outer: Option<usize>,
        inner: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub name: String,
    pub kind: String,
    pub status: MethodStatus,
    pub termination: Option<Termination>,
    /// Number of recorded iterations (outer iterations or steps).
    pub iterations: usize,
    pub theta_path: Option<String>,
    pub trajectory_path: String,
    pub metrics: Option<MethodMetricsReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub environment: Environment,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub base: BaseModelReport,
    pub methods: Vec<MethodReport>,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(LabError::from)
    }

    /// `metrics.csv`: method, UA, RA, TA, MIA, overall — successful
    /// methods only, in configuration order.
    pub fn write_metrics_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "method,UA,RA,TA,MIA,overall")?;
        for m in &self.methods {
            if let Some(metrics) = &m.metrics {
                let overall = metrics
                    .overall
                    .map(|v| format!("{v:?}"))
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{},{:?},{:?},{:?},{:?},{}",
                    m.name, metrics.ua, metrics.ra, metrics.ta, metrics.mia, overall
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Plain-text summary table for the terminal.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8}  status\n",
            "method", "UA", "RA", "TA", "MIA", "overall"
        ));
        for m in &self.methods {
            match (&m.status, &m.metrics) {
                (MethodStatus::Ok, Some(metrics)) => {
                    s.push_str(&format!(
                        "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8}  ok\n",
                        m.name,
                        metrics.ua,
                        metrics.ra,
                        metrics.ta,
                        metrics.mia,
                        metrics
                            .overall
                            .map(|v| format!("{v:.4}"))
                            .unwrap_or_else(|| "-".to_string()),
                    ));
                }
                _ => {
                    s.push_str(&format!(
                        "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8}  diverged\n",
                        m.name, "-", "-", "-", "-", "-"
                    ));
                }
            }
        }
        s
    }
}

#[derive(Debug, Serialize)]
struct TrajectoryFinalLine<'a> {
    #[serde(rename = "final")]
    fin: FinalBlock<'a>,
}

#[derive(Debug, Serialize)]
struct FinalBlock<'a> {
    termination: Termination,
    theta_path: &'a str,
    dim: usize,
}

/// One JSON object per line: every recorded iteration, then a closing
/// block referencing the parameter checkpoint and termination reason.
pub fn write_trajectory_jsonl(
    path: &Path,
    trajectory: &Trajectory,
    theta_path: &str,
) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for record in &trajectory.records {
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    let final_line = TrajectoryFinalLine {
        fin: FinalBlock {
            termination: trajectory.termination,
            theta_path,
            dim: trajectory.final_theta.dim(),
        },
    };
    writeln!(out, "{}", serde_json::to_string(&final_line)?)?;
    out.flush()?;
    Ok(())
}

/// Reads a trajectory JSONL back, dropping the wall-time annotations
/// (the one field two identical runs may disagree on).
pub fn read_trajectory_jsonl_normalized(path: &Path) -> Result<Vec<serde_json::Value>> {
    let input = BufReader::new(fs::File::open(path)?);
    let mut lines = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value = serde_json::from_str(&line)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("wall_time_s");
        }
        lines.push(value);
    }
    Ok(lines)
}
