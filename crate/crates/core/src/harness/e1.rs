//! Single-stack experiment: learn from uniform random stacking, then replay
//! fresh episodes with and without the precomputed corrections.

use std::collections::BTreeMap;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_matrix, require_edges, stacking_bins, ArmReport, EvaluationReport, LearnSettings, ModelSummary};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::goal::{GoalSpec, DEFAULT_EPSILON};
use crate::inference::InferenceConfig;
use crate::model::CausalModel;
use crate::prevention::{precompute_corrections, CorrectionTable, Decision, DEFAULT_TABLE_CAP};
use crate::search::SearchOptions;
use crate::sim::{episode_draws, execute, run_episodes, SimConfig, StackAction, DEFAULT_MARGIN, DEFAULT_NOISE_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E1Config {
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub noise_k: f64,
    pub margin: f64,
    pub epsilon: f64,
    pub bins: BTreeMap<String, usize>,
    #[serde(flatten)]
    pub learn: LearnSettings,
    pub inference: InferenceConfig,
}

impl Default for E1Config {
    fn default() -> Self {
        Self {
            train_episodes: 40_000,
            test_episodes: 40_000,
            train_seed: 1,
            test_seed: 2,
            noise_k: DEFAULT_NOISE_K,
            margin: DEFAULT_MARGIN,
            epsilon: DEFAULT_EPSILON,
            bins: stacking_bins(&[(5, 5, 3)]),
            learn: LearnSettings::default(),
            inference: InferenceConfig::default(),
        }
    }
}

impl E1Config {
    pub fn train_sim(&self) -> SimConfig {
        let mut c = SimConfig::e1(self.train_episodes, self.train_seed);
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

    pub fn goal(&self) -> Result<GoalSpec> {
        GoalSpec::single_flag("onTop1", self.epsilon)
    }
}

fn expected_edges() -> Vec<(String, String)> {
    ["xOff1", "yOff1", "dropOff1"]
        .iter()
        .map(|c| (c.to_string(), "onTop1".to_string()))
        .collect()
}

/// Simulates the training set and learns the single-stack model; fails with
/// diagnostics when a cause of `onTop1` was not recovered.
pub fn e1_model(config: &E1Config) -> Result<CausalModel> {
    let t = Instant::now();
    let data = run_episodes(&config.train_sim())?;
    let model = CausalModel::learn(&data, &config.learn.learn_config(config.bins.clone()))?;
    info!("e1: learned model from {} episodes in {:.2?}", data.len(), t.elapsed());
    require_edges("single-stack model", &model, &expected_edges())?;
    Ok(model)
}

struct Replay {
    baseline: Option<usize>,
    corrected: Option<usize>,
    predicted_success: bool,
    applied: bool,
    unreachable: bool,
    violation: bool,
}

fn replay(e: u64, sim: &SimConfig, model: &CausalModel, table: &CorrectionTable, eps: f64) -> Result<Replay> {
    let draws = episode_draws(sim, e);
    let baseline = execute(&draws.actions, &draws.noise, sim)?.failed_at;
    let mut sample = Sample::new();
    draws.actions[0].write_to(&mut sample);
    let mut r = Replay {
        baseline,
        corrected: baseline,
        predicted_success: false,
        applied: false,
        unreachable: false,
        violation: false,
    };
    match table.prevent(&sample, model) {
        Ok(outcome) => {
            r.predicted_success = outcome.probability >= eps;
            if outcome.decision == Decision::Corrected {
                r.applied = true;
                r.violation = table.prevent(&outcome.x_success, model)?.decision != Decision::Proceed;
                let action = StackAction::from_sample(&outcome.x_success, 1)?;
                r.corrected = execute(&[action], &draws.noise, sim)?.failed_at;
            }
        }
        Err(Error::NoReachableSuccess { .. }) => r.unreachable = true,
        Err(e) => return Err(e),
    }
    Ok(r)
}

/// Runs the full single-stack pipeline and evaluates the baseline and the
/// corrected arm on common random numbers.
pub fn run_e1(config: &E1Config) -> Result<EvaluationReport> {
    let model = e1_model(config)?;
    let goal = config.goal()?;
    let options = SearchOptions {
        transitionable: None,
        inference: config.inference.clone(),
    };
    let t = Instant::now();
    let table = precompute_corrections(&model, &goal, &options, DEFAULT_TABLE_CAP)?;
    info!("e1: correction table with {} entries in {:.2?}", table.len(), t.elapsed());

    let t = Instant::now();
    let sim = config.test_sim();
    sim.validate()?;
    let replays = (0..config.test_episodes as u64)
        .into_par_iter()
        .map(|e| replay(e, &sim, &model, &table, config.epsilon))
        .collect::<Result<Vec<_>>>()?;
    info!("e1: replayed {} test episodes in {:.2?}", replays.len(), t.elapsed());

    let base_failed: Vec<_> = replays.iter().map(|r| r.baseline).collect();
    let corr_failed: Vec<_> = replays.iter().map(|r| r.corrected).collect();
    let baseline = ArmReport::new("no correction", &base_failed, 1);
    let mut corrected = ArmReport::new("corrected", &corr_failed, 1).against(&baseline);
    corrected.corrected_episodes = replays.iter().filter(|r| r.applied).count();
    corrected.unreachable = replays.iter().filter(|r| r.unreachable).count();
    corrected.idempotence_violations = replays.iter().filter(|r| r.violation).count();
    let predictions: Vec<bool> = replays.iter().map(|r| r.predicted_success).collect();
    let actuals: Vec<bool> = replays.iter().map(|r| r.baseline.is_none()).collect();
    corrected.confusion = Some(confusion_matrix(&predictions, &actuals)?);

    Ok(EvaluationReport {
        scenario: "e1".into(),
        train_seed: config.train_seed,
        test_seed: config.test_seed,
        train_episodes: config.train_episodes,
        test_episodes: config.test_episodes,
        epsilon: config.epsilon,
        noise_k: config.noise_k,
        margin: config.margin,
        models: vec![ModelSummary::of("1-stack", &model)],
        arms: vec![baseline, corrected],
        warnings: Vec::new(),
    })
}
