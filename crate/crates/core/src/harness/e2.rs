//! Three-stack experiment: a per-cube model without history against a model
//! over the whole tower, both applied before every drop.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_matrix, require_edges, stacking_bins, ArmReport, EvaluationReport, LearnSettings, ModelSummary};
use crate::data::{Sample, Value};
use crate::error::{Error, Result};
use crate::goal::{GoalSpec, DEFAULT_EPSILON};
use crate::inference::InferenceConfig;
use crate::model::CausalModel;
use crate::prevention::{precompute_corrections, prevent, CorrectionTable, Decision, DEFAULT_TABLE_CAP};
use crate::search::SearchOptions;
use crate::sim::{episode_draws, execute, run_episodes, Episode, SimConfig, StackAction, DEFAULT_MARGIN, DEFAULT_NOISE_K};

/// Below this many training episodes the three-stack structure is often
/// incomplete.
pub const MIN_RECOMMENDED_TRAIN: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2Config {
    pub train_episodes: usize,
    /// Leading training episodes used for the per-cube model.
    pub one_stack_episodes: usize,
    pub test_episodes: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub noise_k: f64,
    pub margin: f64,
    pub epsilon: f64,
    pub bins: BTreeMap<String, usize>,
    pub one_stack_bins: BTreeMap<String, usize>,
    #[serde(flatten)]
    pub learn: LearnSettings,
    pub inference: InferenceConfig,
}

impl Default for E2Config {
    fn default() -> Self {
        Self {
            train_episodes: 200_000,
            one_stack_episodes: 40_000,
            test_episodes: 20_000,
            train_seed: 3,
            test_seed: 4,
            noise_k: DEFAULT_NOISE_K,
            margin: DEFAULT_MARGIN,
            epsilon: DEFAULT_EPSILON,
            bins: stacking_bins(&[(5, 5, 3), (5, 5, 3), (3, 3, 3)]),
            one_stack_bins: stacking_bins(&[(5, 5, 3)]),
            learn: LearnSettings::default(),
            inference: InferenceConfig::default(),
        }
    }
}

impl E2Config {
    pub fn train_sim(&self) -> SimConfig {
        let mut c = SimConfig::e2(self.train_episodes, self.train_seed);
        c.noise_k = self.noise_k;
        c.margin = self.margin;
        c
    }

    pub fn test_sim(&self) -> SimConfig {
        let mut c = self.train_sim();
        c.episodes = self.test_episodes;
        c.seed = self.test_seed;
        c
    }

    pub fn one_stack_goal(&self) -> Result<GoalSpec> {
        GoalSpec::single_flag("onTop1", self.epsilon)
    }

    pub fn three_stack_goal(&self) -> Result<GoalSpec> {
        GoalSpec::single_flag("onTop3", self.epsilon)
    }
}

/// The two models of the three-stack experiment.
#[derive(Debug, Clone)]
pub struct E2Models {
    /// Cube-1 variables only, no history.
    pub one_stack: CausalModel,
    /// All twelve variables.
    pub three_stack: CausalModel,
    pub warnings: Vec<String>,
}

fn edge(a: String, b: String) -> (String, String) {
    (a, b)
}

fn three_stack_edges() -> Vec<(String, String)> {
    let mut e = Vec::new();
    for i in 1..=3 {
        e.push(edge(format!("xOff{i}"), format!("onTop{i}")));
        e.push(edge(format!("yOff{i}"), format!("onTop{i}")));
        if i < 3 {
            e.push(edge(format!("onTop{i}"), format!("onTop{}", i + 1)));
        }
    }
    e
}

/// Simulates the training episodes and learns both models.
pub fn e2_models(config: &E2Config) -> Result<E2Models> {
    let mut warnings = Vec::new();
    if config.train_episodes < MIN_RECOMMENDED_TRAIN {
        let msg = format!(
            "{} training episodes is below the recommended {MIN_RECOMMENDED_TRAIN}; structure recovery may degrade",
            config.train_episodes
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    if config.one_stack_episodes > config.train_episodes {
        return Err(Error::InvalidArgument(
            "per-cube model needs no more episodes than the training set".into(),
        ));
    }
    let t = Instant::now();
    let data = run_episodes(&config.train_sim())?;
    info!("e2: simulated {} training episodes in {:.2?}", data.len(), t.elapsed());

    let t = Instant::now();
    let cube1 = data.project(&["xOff1", "yOff1", "dropOff1", "onTop1"], None, config.one_stack_episodes)?;
    let one_stack = CausalModel::learn(&cube1, &config.learn.learn_config(config.one_stack_bins.clone()))?;
    let cube1_edges: Vec<_> = ["xOff1", "yOff1"]
        .iter()
        .map(|c| edge(c.to_string(), "onTop1".into()))
        .collect();
    require_edges("1-stack model", &one_stack, &cube1_edges)?;
    info!("e2: learned 1-stack model in {:.2?}", t.elapsed());

    let t = Instant::now();
    let three_stack = CausalModel::learn(&data, &config.learn.learn_config(config.bins.clone()))?;
    require_edges("3-stack model", &three_stack, &three_stack_edges())?;
    info!("e2: learned 3-stack model in {:.2?}", t.elapsed());
    Ok(E2Models {
        one_stack,
        three_stack,
        warnings,
    })
}

fn cube_causes(cube: usize) -> [String; 3] {
    [format!("xOff{cube}"), format!("yOff{cube}"), format!("dropOff{cube}")]
}

/// Evidence for the three-stack model before dropping `cube`: every
/// planned or executed action, plus the fact that the tower stood so far.
pub fn three_stack_state(plan: &[StackAction], cube: usize) -> Sample {
    let mut s = Sample::new();
    for a in plan {
        a.write_to(&mut s);
    }
    for j in 1..cube {
        s.insert(format!("onTop{j}"), Value::Bool(true));
    }
    s
}

/// One cube's action expressed in the per-cube model's cube-1 variables.
pub fn as_first_cube(action: &StackAction) -> Sample {
    let mut s = Sample::new();
    StackAction { cube: 1, ..*action }.write_to(&mut s);
    s
}

/// Options for correcting cubes `cube..=cubes` with the three-stack model.
pub fn three_stack_options(cube: usize, cubes: usize, inference: &InferenceConfig) -> SearchOptions {
    SearchOptions {
        transitionable: Some((cube..=cubes).flat_map(cube_causes).collect()),
        inference: inference.clone(),
    }
}

#[derive(Default)]
struct ArmEpisode {
    failed_at: Option<usize>,
    predicted_success: bool,
    applied: bool,
    unreachable: usize,
    violations: usize,
}

fn one_stack_arm(
    draws: &crate::sim::EpisodeDraws,
    sim: &SimConfig,
    model: &CausalModel,
    table: &CorrectionTable,
    eps: f64,
) -> Result<ArmEpisode> {
    let mut out = ArmEpisode {
        predicted_success: true,
        ..Default::default()
    };
    let mut episode = Episode::new(sim, &draws.noise);
    for action in &draws.actions {
        let mut action = *action;
        match table.prevent(&as_first_cube(&action), model) {
            Ok(outcome) => {
                out.predicted_success &= outcome.probability >= eps;
                if outcome.decision == Decision::Corrected {
                    out.applied = true;
                    if table.prevent(&outcome.x_success, model)?.decision != Decision::Proceed {
                        out.violations += 1;
                    }
                    let fixed = StackAction::from_sample(&outcome.x_success, 1)?;
                    action = StackAction { cube: action.cube, ..fixed };
                }
            }
            Err(Error::NoReachableSuccess { .. }) => {
                out.predicted_success = false;
                out.unreachable += 1;
            }
            Err(e) => return Err(e),
        }
        if !episode.step(&action)? {
            break;
        }
    }
    out.failed_at = episode.failed_at();
    Ok(out)
}

fn three_stack_arm(
    draws: &crate::sim::EpisodeDraws,
    sim: &SimConfig,
    model: &CausalModel,
    goal: &GoalSpec,
    inference: &InferenceConfig,
) -> Result<ArmEpisode> {
    let cubes = draws.actions.len();
    let mut out = ArmEpisode::default();
    let mut plan = draws.actions.clone();
    let mut episode = Episode::new(sim, &draws.noise);
    for cube in 1..=cubes {
        let state = three_stack_state(&plan, cube);
        let options = three_stack_options(cube, cubes, inference);
        match prevent(&state, model, goal, &options) {
            Ok(outcome) => {
                if cube == 1 {
                    out.predicted_success = outcome.probability >= goal.epsilon();
                }
                if outcome.decision == Decision::Corrected {
                    out.applied = true;
                    if prevent(&outcome.x_success, model, goal, &options)?.decision != Decision::Proceed {
                        out.violations += 1;
                    }
                    for a in plan.iter_mut().skip(cube - 1) {
                        *a = StackAction::from_sample(&outcome.x_success, a.cube)?;
                    }
                }
            }
            Err(Error::NoReachableSuccess { .. }) => out.unreachable += 1,
            Err(e) => return Err(e),
        }
        if !episode.step(&plan[cube - 1])? {
            break;
        }
    }
    out.failed_at = episode.failed_at();
    Ok(out)
}

fn arm_report(name: &str, eps: &[ArmEpisode], baseline: &ArmReport, actuals: &[bool], cubes: usize) -> Result<ArmReport> {
    let failed: Vec<_> = eps.iter().map(|e| e.failed_at).collect();
    let mut arm = ArmReport::new(name, &failed, cubes).against(baseline);
    arm.corrected_episodes = eps.iter().filter(|e| e.applied).count();
    arm.unreachable = eps.iter().map(|e| e.unreachable).sum();
    arm.idempotence_violations = eps.iter().map(|e| e.violations).sum();
    let predictions: Vec<bool> = eps.iter().map(|e| e.predicted_success).collect();
    arm.confusion = Some(confusion_matrix(&predictions, actuals)?);
    Ok(arm)
}

/// Evaluates both models on fresh episodes, reusing already learned models.
pub fn evaluate_e2(config: &E2Config, models: &E2Models) -> Result<EvaluationReport> {
    let sim = config.test_sim();
    sim.validate()?;
    let cubes = sim.cubes();
    let one_goal = config.one_stack_goal()?;
    let three_goal = config.three_stack_goal()?;
    let one_options = SearchOptions {
        transitionable: None,
        inference: config.inference.clone(),
    };
    let table = precompute_corrections(&models.one_stack, &one_goal, &one_options, DEFAULT_TABLE_CAP)?;

    let t = Instant::now();
    let results = (0..config.test_episodes as u64)
        .into_par_iter()
        .map(|e| {
            let draws = episode_draws(&sim, e);
            let base = execute(&draws.actions, &draws.noise, &sim)?.failed_at;
            let one = one_stack_arm(&draws, &sim, &models.one_stack, &table, config.epsilon)?;
            let three = three_stack_arm(&draws, &sim, &models.three_stack, &three_goal, &config.inference)?;
            Ok((base, one, three))
        })
        .collect::<Result<Vec<_>>>()?;
    info!("e2: replayed {} test episodes in {:.2?}", results.len(), t.elapsed());

    let base_failed: Vec<_> = results.iter().map(|r| r.0).collect();
    let actuals: Vec<bool> = base_failed.iter().map(Option::is_none).collect();
    let baseline = ArmReport::new("no correction", &base_failed, cubes);
    let (ones, threes): (Vec<_>, Vec<_>) = results.into_iter().map(|(_, a, b)| (a, b)).unzip();
    let one = arm_report("1-stack model", &ones, &baseline, &actuals, cubes)?;
    let three = arm_report("3-stack model", &threes, &baseline, &actuals, cubes)?;

    Ok(EvaluationReport {
        scenario: "e2".into(),
        train_seed: config.train_seed,
        test_seed: config.test_seed,
        train_episodes: config.train_episodes,
        test_episodes: config.test_episodes,
        epsilon: config.epsilon,
        noise_k: config.noise_k,
        margin: config.margin,
        models: vec![
            ModelSummary::of("1-stack", &models.one_stack),
            ModelSummary::of("3-stack", &models.three_stack),
        ],
        arms: vec![baseline, one, three],
        warnings: models.warnings.clone(),
    })
}

/// Runs the full three-stack pipeline: simulation, both models, and the
/// three evaluation arms on common random numbers.
pub fn run_e2(config: &E2Config) -> Result<(EvaluationReport, E2Models)> {
    let models = e2_models(config)?;
    let report = evaluate_e2(config, &models)?;
    Ok((report, models))
}
