//! Experiment pipelines on the stacking simulator and their reports.
//!
//! Every report is a pure function of its configuration: wall-clock timings
//! go to the log, never into the serialized report.

mod demo;
mod e1;
mod e2;
mod heatmap;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CausalModel, LearnConfig};
use crate::pc::PcConfig;

pub use demo::{demo_timely_shifted, demo_with_models, simulated_success, DemoConfig, DemoExample, DemoReport, DemoResult, DEMO_TRAIN_EPISODES};
pub use e1::{e1_model, run_e1, E1Config};
pub use e2::{
    as_first_cube, e2_models, evaluate_e2, run_e2, three_stack_options, three_stack_state, E2Config, E2Models,
    MIN_RECOMMENDED_TRAIN,
};
pub use heatmap::{export_heatmap, write_heatmap_csv, HeatmapRow};

/// 2×2 success-prediction table, in percent of all cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Actual success, predicted success.
    pub success_predicted_success: f64,
    /// Actual success, predicted failure.
    pub success_predicted_failure: f64,
    /// Actual failure, predicted success.
    pub failure_predicted_success: f64,
    /// Actual failure, predicted failure.
    pub failure_predicted_failure: f64,
    pub cases: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> f64 {
        self.success_predicted_success
            + self.success_predicted_failure
            + self.failure_predicted_success
            + self.failure_predicted_failure
    }

    /// Share of actual successes wrongly predicted to fail, in percent.
    pub fn false_failure_share(&self) -> f64 {
        let actual = self.success_predicted_success + self.success_predicted_failure;
        if actual == 0.0 {
            0.0
        } else {
            100.0 * self.success_predicted_failure / actual
        }
    }
}

/// Tabulates aligned `(predicted success, actual success)` pairs.
pub fn confusion_matrix(predictions: &[bool], actuals: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("confusion matrix of zero cases".into()));
    }
    if predictions.len() != actuals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions but {} outcomes",
            predictions.len(),
            actuals.len()
        )));
    }
    let mut counts = [0usize; 4];
    for (&p, &a) in predictions.iter().zip(actuals) {
        counts[2 * usize::from(!a) + usize::from(!p)] += 1;
    }
    let n = predictions.len();
    let pct = |c: usize| round4(100.0 * c as f64 / n as f64);
    Ok(ConfusionMatrix {
        success_predicted_success: pct(counts[0]),
        success_predicted_failure: pct(counts[1]),
        failure_predicted_success: pct(counts[2]),
        failure_predicted_failure: pct(counts[3]),
        cases: n,
    })
}

/// Rounds to four decimals so reports stay stable across platforms'
/// last-bit differences in percentage arithmetic.
pub(crate) fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub(crate) fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round4(100.0 * part as f64 / whole as f64)
    }
}

/// Failures attributed to the cube whose drop ended the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackBreakdown {
    pub cube: usize,
    pub failures: usize,
    /// Percent of all episodes.
    pub rate: f64,
    /// Percent of all failures.
    pub share: f64,
}

/// Results of one evaluation arm on the shared test episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub episodes: usize,
    pub failures: usize,
    /// Percent of episodes that failed.
    pub failure_rate: f64,
    /// Percent of baseline failures removed by this arm (corrected arms only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_fraction: Option<f64>,
    /// Episodes in which at least one correction was applied.
    pub corrected_episodes: usize,
    /// Corrections requested but impossible (no successful assignment).
    pub unreachable: usize,
    /// Corrected states that did not re-predict success.
    pub idempotence_violations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_stack: Vec<StackBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

impl ArmReport {
    pub(crate) fn new(name: &str, failed_at: &[Option<usize>], cubes: usize) -> Self {
        let episodes = failed_at.len();
        let failures = failed_at.iter().filter(|f| f.is_some()).count();
        let per_stack = if cubes > 1 {
            (1..=cubes)
                .map(|cube| {
                    let n = failed_at.iter().filter(|&&f| f == Some(cube)).count();
                    StackBreakdown {
                        cube,
                        failures: n,
                        rate: percent(n, episodes),
                        share: percent(n, failures),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            name: name.into(),
            episodes,
            failures,
            failure_rate: percent(failures, episodes),
            corrected_fraction: None,
            corrected_episodes: 0,
            unreachable: 0,
            idempotence_violations: 0,
            per_stack,
            confusion: None,
        }
    }

    pub(crate) fn against(mut self, baseline: &ArmReport) -> Self {
        let removed = baseline.failures as f64 - self.failures as f64;
        self.corrected_fraction = Some(if baseline.failures == 0 {
            0.0
        } else {
            round4(100.0 * removed / baseline.failures as f64)
        });
        self
    }
}

/// Summary of a learned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub samples: usize,
    pub edges: Vec<(String, String)>,
    pub intervals: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ModelSummary {
    pub fn of(name: &str, model: &CausalModel) -> Self {
        let intervals = model
            .variables()
            .iter()
            .zip(model.cardinalities())
            .filter(|(v, _)| v.is_continuous())
            .map(|(v, &c)| (v.name.clone(), c))
            .collect();
        Self {
            name: name.into(),
            samples: model.metadata().samples,
            edges: model.edges(),
            intervals,
            warnings: model.metadata().warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub train_seed: u64,
    pub test_seed: u64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub epsilon: f64,
    pub noise_k: f64,
    pub margin: f64,
    pub models: Vec<ModelSummary>,
    /// Baseline first, then the corrected arms.
    pub arms: Vec<ArmReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn baseline(&self) -> &ArmReport {
        &self.arms[0]
    }

    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Plain-text rendering: failure table, per-stack breakdown, and one
    /// confusion matrix per corrected arm.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (test episodes: {})", self.scenario, self.test_episodes);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} {:>10} {:>20}", "", "failures", "corrected failures");
        for arm in &self.arms {
            let fixed = arm
                .corrected_fraction
                .map_or_else(|| "-".to_string(), |f| format!("{f:.1}%"));
            let _ = writeln!(out, "{:<16} {:>9.1}% {:>20}", arm.name, arm.failure_rate, fixed);
        }
        if self.arms.iter().any(|a| !a.per_stack.is_empty()) {
            let _ = writeln!(out);
            let cubes = self.arms[0].per_stack.len();
            let _ = write!(out, "{:<16}", "failed at cube");
            for c in 1..=cubes {
                let _ = write!(out, " {c:>8}");
            }
            let _ = writeln!(out);
            for arm in &self.arms {
                let _ = write!(out, "{:<16}", arm.name);
                for s in &arm.per_stack {
                    let _ = write!(out, " {:>7.1}%", s.share);
                }
                let _ = writeln!(out);
            }
        }
        for arm in &self.arms {
            if let Some(cm) = &arm.confusion {
                let _ = writeln!(out);
                let _ = writeln!(out, "{} prediction (percent of {} cases)", arm.name, cm.cases);
                let _ = writeln!(out, "{:<18} {:>10} {:>10}", "actual \\ predicted", "success", "failure");
                let _ = writeln!(
                    out,
                    "{:<18} {:>10.1} {:>10.1}",
                    "success", cm.success_predicted_success, cm.success_predicted_failure
                );
                let _ = writeln!(
                    out,
                    "{:<18} {:>10.1} {:>10.1}",
                    "failure", cm.failure_predicted_success, cm.failure_predicted_failure
                );
            }
        }
        out
    }
}

/// Learning settings shared by the experiment configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_cond")]
    pub max_cond: usize,
    #[serde(default = "default_iss")]
    pub iss: f64,
    /// The simulator draws every action component independently, so the
    /// experiments tell structure learning so by default.
    #[serde(default = "default_randomized")]
    pub randomized_causes: bool,
}

fn default_randomized() -> bool {
    true
}

fn default_alpha() -> f64 {
    PcConfig::default().alpha
}

fn default_max_cond() -> usize {
    PcConfig::default().max_cond
}

fn default_iss() -> f64 {
    crate::cpt::DEFAULT_ISS
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            max_cond: default_max_cond(),
            iss: default_iss(),
            randomized_causes: true,
        }
    }
}

impl LearnSettings {
    pub fn learn_config(&self, bins: BTreeMap<String, usize>) -> LearnConfig {
        LearnConfig {
            bins,
            pc: PcConfig {
                alpha: self.alpha,
                max_cond: self.max_cond,
                randomized_causes: self.randomized_causes,
            },
            iss: self.iss,
        }
    }
}

/// Interval counts per cube: `xy` for the horizontal offsets, `drop` for
/// the drop height.
pub fn stacking_bins(cubes: &[(usize, usize, usize)]) -> BTreeMap<String, usize> {
    let mut bins = BTreeMap::new();
    for (i, &(x, y, z)) in cubes.iter().enumerate() {
        bins.insert(format!("xOff{}", i + 1), x);
        bins.insert(format!("yOff{}", i + 1), y);
        bins.insert(format!("dropOff{}", i + 1), z);
    }
    bins
}

/// Checks that every `(from, to)` edge is present; returns the missing ones.
pub fn missing_edges(model: &CausalModel, expected: &[(String, String)]) -> Vec<(String, String)> {
    let edges = model.edges();
    expected.iter().filter(|e| !edges.contains(e)).cloned().collect()
}

pub(crate) fn require_edges(name: &str, model: &CausalModel, expected: &[(String, String)]) -> Result<()> {
    let missing = missing_edges(model, expected);
    if missing.is_empty() {
        return Ok(());
    }
    let fmt = |es: &[(String, String)]| {
        es.iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Err(Error::Structure(format!(
        "{name}: missing expected edges [{}]; learned [{}]",
        fmt(&missing),
        fmt(&model.edges())
    )))
}
