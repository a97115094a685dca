//! Replays hand-picked tower plans through both three-stack-experiment
//! models to show failures whose cause lies in an earlier cube.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::e2::{as_first_cube, e2_models, three_stack_options, three_stack_state, E2Config, E2Models};
use crate::data::Sample;
use crate::discretize::{discretize_sample, IntervalAssignment};
use crate::error::{Error, Result};
use crate::model::CausalModel;
use crate::prevention::{prevent, Decision};
use crate::search::{CorrectionResult, SearchOptions};
use crate::sim::{episode_draws, execute, SimConfig, StackAction};

/// A named three-cube plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoExample {
    pub name: String,
    pub actions: Vec<StackAction>,
}

impl DemoExample {
    fn uniform(name: &str, per_cube: [(f64, f64, f64); 3]) -> Self {
        Self {
            name: name.into(),
            actions: per_cube
                .iter()
                .enumerate()
                .map(|(k, &(x, y, z))| StackAction {
                    cube: k + 1,
                    x_off: x,
                    y_off: y,
                    drop_off: z,
                })
                .collect(),
        }
    }

    /// First cube far to the right, the rest near the centre.
    pub fn off_centre_base() -> Self {
        Self::uniform("example 1", [(0.02, 0.0, 0.01), (0.01, 0.0, 0.01), (0.0, 0.0, 0.01)])
    }

    /// Every cube slightly right and forward; each drop looks harmless on
    /// its own but the offsets add up.
    pub fn cumulative_drift() -> Self {
        Self::uniform("example 2", [(0.01, -0.01, 0.01); 3])
    }

    pub fn centred() -> Self {
        Self::uniform("centred", [(0.0, 0.0, 0.01); 3])
    }
}

/// Training episodes for the demonstration models.
pub const DEMO_TRAIN_EPISODES: usize = 800_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    /// Settings used to train the models when no model files are given.
    pub e2: E2Config,
    pub one_stack_model: Option<PathBuf>,
    pub three_stack_model: Option<PathBuf>,
    pub examples: Vec<DemoExample>,
    /// Simulated replays per plan for the empirical success rates.
    pub oracle_episodes: usize,
    pub oracle_seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            // Links from cube 1 to the last outcome need the larger training set.
            e2: E2Config {
                train_episodes: DEMO_TRAIN_EPISODES,
                ..E2Config::default()
            },
            one_stack_model: None,
            three_stack_model: None,
            examples: vec![
                DemoExample::off_centre_base(),
                DemoExample::cumulative_drift(),
                DemoExample::centred(),
            ],
            oracle_episodes: 20_000,
            oracle_seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResult {
    pub name: String,
    pub input: Sample,
    pub input_intervals: IntervalAssignment,
    /// Per-cube success prediction of the model without history.
    pub one_stack: Vec<f64>,
    /// True when the per-cube model would correct some cube.
    pub one_stack_corrects: bool,
    /// Whole-tower success prediction before the first drop.
    pub three_stack: f64,
    pub three_stack_decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionResult>,
    pub corrected_input: Sample,
    /// Lowest cube touched by the whole-tower correction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub earliest_corrected_cube: Option<usize>,
    /// Simulated success rate of the plan as given.
    pub simulated_success: f64,
    /// Simulated success rate of the corrected plan.
    pub simulated_corrected_success: f64,
    /// Every per-cube prediction passes, the whole-tower prediction fails,
    /// and the correction moves a cube before the last one.
    pub timely_shifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub epsilon: f64,
    pub examples: Vec<DemoResult>,
}

impl DemoReport {
    pub fn example(&self, name: &str) -> Option<&DemoResult> {
        self.examples.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&format!("{}\n", e.name));
            let per_cube: Vec<String> = e.one_stack.iter().map(|p| format!("{p:.2}")).collect();
            out.push_str(&format!("  1-stack per cube: {}\n", per_cube.join(" / ")));
            out.push_str(&format!("  3-stack: {:.2}", e.three_stack));
            if let Some(c) = &e.correction {
                out.push_str(&format!(" -> {:.2} after correction\n  {}\n", c.probability, c.explanation));
            } else {
                out.push_str(" (proceed)\n");
            }
            out.push_str(&format!(
                "  simulated success: {:.1}% -> {:.1}%\n",
                100.0 * e.simulated_success,
                100.0 * e.simulated_corrected_success
            ));
            out.push_str(&format!("  timely shifted: {}\n", if e.timely_shifted { "yes" } else { "no" }));
        }
        out
    }
}

/// Empirical success rate of `actions` over `episodes` simulated landings.
pub fn simulated_success(actions: &[StackAction], sim: &SimConfig, episodes: usize) -> Result<f64> {
    let ok = (0..episodes as u64)
        .into_par_iter()
        .map(|e| Ok(execute(actions, &episode_draws(sim, e).noise, sim)?.success()))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&s| s)
        .count();
    Ok(ok as f64 / episodes.max(1) as f64)
}

fn examine(example: &DemoExample, models: &E2Models, config: &DemoConfig) -> Result<DemoResult> {
    let e2 = &config.e2;
    let cubes = example.actions.len();
    if cubes != 3 {
        return Err(Error::InvalidArgument(format!("`{}` must plan exactly three cubes", example.name)));
    }
    let one_goal = e2.one_stack_goal()?;
    let three_goal = e2.three_stack_goal()?;
    let one_options = SearchOptions {
        transitionable: None,
        inference: e2.inference.clone(),
    };
    let mut one_stack = Vec::with_capacity(cubes);
    let mut one_stack_corrects = false;
    for a in &example.actions {
        let outcome = prevent(&as_first_cube(a), &models.one_stack, &one_goal, &one_options)?;
        one_stack.push(outcome.probability);
        one_stack_corrects |= outcome.decision == Decision::Corrected;
    }

    let state = three_stack_state(&example.actions, 1);
    let options = three_stack_options(1, cubes, &e2.inference);
    let outcome = prevent(&state, &models.three_stack, &three_goal, &options)?;
    let earliest = outcome.correction.as_ref().and_then(|c| {
        c.changes
            .iter()
            .filter_map(|ch| ch.variable.chars().last().and_then(|d| d.to_digit(10)))
            .min()
            .map(|d| d as usize)
    });
    let corrected: Vec<StackAction> = (1..=cubes)
        .map(|i| StackAction::from_sample(&outcome.x_success, i))
        .collect::<Result<_>>()?;
    let input_intervals = discretize_sample(&state, models.three_stack.scheme())?;
    let mut sim = e2.test_sim();
    sim.seed = config.oracle_seed;
    let timely_shifted = !one_stack_corrects
        && outcome.decision == Decision::Corrected
        && earliest.is_some_and(|c| c < cubes);
    Ok(DemoResult {
        name: example.name.clone(),
        input: state,
        input_intervals,
        one_stack,
        one_stack_corrects,
        three_stack: outcome.probability,
        three_stack_decision: outcome.decision,
        correction: outcome.correction,
        corrected_input: outcome.x_success,
        earliest_corrected_cube: earliest,
        simulated_success: simulated_success(&example.actions, &sim, config.oracle_episodes)?,
        simulated_corrected_success: simulated_success(&corrected, &sim, config.oracle_episodes)?,
        timely_shifted,
    })
}

/// Loads or trains the models and examines every configured plan.
pub fn demo_timely_shifted(config: &DemoConfig) -> Result<DemoReport> {
    let models = match (&config.one_stack_model, &config.three_stack_model) {
        (Some(one), Some(three)) => E2Models {
            one_stack: CausalModel::load(one)?,
            three_stack: CausalModel::load(three)?,
            warnings: Vec::new(),
        },
        (None, None) => e2_models(&config.e2)?,
        _ => {
            return Err(Error::InvalidArgument(
                "give both model files or neither".into(),
            ))
        }
    };
    demo_with_models(config, &models)
}

/// Examines every configured plan with already available models.
pub fn demo_with_models(config: &DemoConfig, models: &E2Models) -> Result<DemoReport> {
    let examples = config
        .examples
        .iter()
        .map(|ex| examine(ex, models, config))
        .collect::<Result<_>>()?;
    Ok(DemoReport {
        epsilon: config.e2.epsilon,
        examples,
    })
}
