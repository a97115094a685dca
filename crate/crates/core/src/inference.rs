//! Probability queries on a [`CausalModel`].
//!
//! Logic sampling draws complete samples in topological order and discards
//! the ones that disagree with the evidence. Exact inference enumerates the
//! unobserved ancestors of the query, which is cheap for the small networks
//! learned here and doubles as the reference for the sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{DiscreteDataset, IntervalAssignment};
use crate::error::{Error, Result};
use crate::goal::GoalSpec;
use crate::model::CausalModel;

/// Default logic-sampling budget.
pub const DEFAULT_BUDGET: usize = 100_000;
/// Default cap on the enumerated state space of exact inference.
pub const DEFAULT_EXACT_CAP: u128 = 10_000_000;
/// Fewer accepted samples than this is reported as evidence starvation.
pub const MIN_ACCEPTED: usize = 100;

const CHUNK: usize = 4096;

/// `P(target | evidence)` request.
/// Per-node state, `None` where unobserved.
type PartialState = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub target: IntervalAssignment,
    #[serde(default)]
    pub evidence: IntervalAssignment,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

impl Query {
    pub fn new(target: IntervalAssignment, evidence: IntervalAssignment, budget: usize) -> Result<Self> {
        if let Some((name, _)) = target.iter().find(|(n, _)| evidence.contains(n)) {
            return Err(Error::InvalidArgument(format!(
                "`{name}` appears in both target and evidence"
            )));
        }
        if target.is_empty() {
            return Err(Error::InvalidArgument("empty query target".into()));
        }
        Ok(Self {
            target,
            evidence,
            budget,
        })
    }

    fn indexed(&self, model: &CausalModel) -> Result<(Vec<(usize, usize)>, PartialState)> {
        let target = model.to_partial(&self.target)?;
        let target = target
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect();
        Ok((target, model.to_partial(&self.evidence)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub probability: f64,
    pub accepted: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    LogicSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub exact_cap: u128,
    pub budget: usize,
    pub seed: u64,
    /// Use logic sampling even when exact enumeration would fit.
    pub force_sampling: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
            budget: DEFAULT_BUDGET,
            seed: 0,
            force_sampling: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub method: Method,
    /// Sample budget when logic sampling was used.
    pub budget: Option<usize>,
}

/// Draws one complete sample into `states`. Returns `false` as soon as a
/// drawn state contradicts `evidence`.
fn forward_sample_into<R: Rng>(
    model: &CausalModel,
    rng: &mut R,
    evidence: &[Option<usize>],
    states: &mut [usize],
) -> bool {
    for &node in model.topological_order() {
        let row = model.cpt_row(node, states);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut state = row.len() - 1;
        for (k, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                state = k;
                break;
            }
        }
        states[node] = state;
        if evidence[node].is_some_and(|e| e != state) {
            return false;
        }
    }
    true
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Forward-samples `n` complete rows; deterministic given `seed`.
pub fn sample_dataset(model: &CausalModel, n: usize, seed: u64) -> Result<DiscreteDataset> {
    let nv = model.len();
    let none = vec![None; nv];
    let chunks: Vec<Vec<Vec<usize>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let mut states = vec![0; nv];
                    forward_sample_into(model, &mut rng, &none, &mut states);
                    states
                })
                .collect()
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); nv];
    for row in chunks.iter().flatten() {
        for (col, &s) in columns.iter_mut().zip(row) {
            col.push(s as u8);
        }
    }
    DiscreteDataset::new(
        model.variables().names().map(String::from).collect(),
        model.cardinalities().to_vec(),
        columns,
    )
}

/// Index-based logic sampling. The budget is split into fixed chunks with
/// independent seeded streams, so the estimate does not depend on the
/// number of worker threads.
pub fn logic_sample_indexed(
    model: &CausalModel,
    target: &[(usize, usize)],
    evidence: &[Option<usize>],
    budget: usize,
    seed: u64,
) -> Result<Estimate> {
    if budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    let nv = model.len();
    let (hits, accepted) = (0..budget.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut states = vec![0; nv];
            let (mut hits, mut accepted) = (0usize, 0usize);
            for _ in 0..CHUNK.min(budget - c * CHUNK) {
                if forward_sample_into(model, &mut rng, evidence, &mut states) {
                    accepted += 1;
                    if target.iter().all(|&(v, s)| states[v] == s) {
                        hits += 1;
                    }
                }
            }
            (hits, accepted)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if accepted < MIN_ACCEPTED.min(budget) || accepted == 0 {
        return Err(Error::EvidenceStarved { accepted, budget });
    }
    Ok(Estimate {
        probability: hits as f64 / accepted as f64,
        accepted,
        budget,
    })
}

/// Estimates `P(target | evidence)` by rejection (logic) sampling.
pub fn logic_sample(model: &CausalModel, query: &Query, seed: u64) -> Result<Estimate> {
    let (target, evidence) = query.indexed(model)?;
    logic_sample_indexed(model, &target, &evidence, query.budget, seed)
}

/// Ancestral closure of the given nodes.
fn ancestors_of(model: &CausalModel, seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut relevant = vec![false; model.len()];
    let mut stack: Vec<usize> = seeds.collect();
    while let Some(v) = stack.pop() {
        if !relevant[v] {
            relevant[v] = true;
            stack.extend_from_slice(model.parents_of(v));
        }
    }
    relevant
}

/// Exact `P(target | evidence)` by enumeration over the unobserved
/// ancestors of target and evidence.
///
/// Nodes outside that ancestral set sum out to one, and nodes whose whole
/// family is observed contribute the same factor to numerator and
/// denominator, so both are skipped.
pub fn exact_indexed(
    model: &CausalModel,
    target: &[(usize, usize)],
    evidence: &[Option<usize>],
    cap: u128,
) -> Result<f64> {
    let mut target_left = Vec::with_capacity(target.len());
    for &(v, s) in target {
        match evidence[v] {
            Some(e) if e != s => return Ok(0.0),
            Some(_) => {}
            None => target_left.push((v, s)),
        }
    }
    let relevant = ancestors_of(
        model,
        target_left
            .iter()
            .map(|&(v, _)| v)
            .chain((0..model.len()).filter(|&v| evidence[v].is_some())),
    );
    let free: Vec<usize> = (0..model.len())
        .filter(|&v| relevant[v] && evidence[v].is_none())
        .collect();
    let factors: Vec<usize> = (0..model.len())
        .filter(|&v| {
            relevant[v]
                && (evidence[v].is_none() || model.parents_of(v).iter().any(|&p| evidence[p].is_none()))
        })
        .collect();
    let cards = model.cardinalities();
    let space: u128 = free.iter().map(|&v| cards[v] as u128).product();
    if space > cap {
        return Err(Error::StateSpaceTooLarge { states: space, cap });
    }

    let mut states: Vec<usize> = evidence.iter().map(|e| e.unwrap_or(0)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    loop {
        let w: f64 = factors.iter().map(|&v| model.local_probability(v, &states)).product();
        den += w;
        if target_left.iter().all(|&(v, s)| states[v] == s) {
            num += w;
        }
        // Odometer over the free variables.
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(if den > 0.0 { num / den } else { 0.0 });
            }
            let v = free[k];
            states[v] += 1;
            if states[v] < cards[v] {
                break;
            }
            states[v] = 0;
            k += 1;
        }
    }
}

/// Exact `P(target | evidence)`.
pub fn exact_infer(model: &CausalModel, query: &Query) -> Result<f64> {
    let (target, evidence) = query.indexed(model)?;
    exact_indexed(model, &target, &evidence, DEFAULT_EXACT_CAP)
}

/// Goal parametrizations as index/state pairs.
pub fn goal_targets(model: &CausalModel, goal: &GoalSpec) -> Result<Vec<Vec<(usize, usize)>>> {
    goal.goals()
        .iter()
        .map(|g| {
            let partial = model.to_partial(g)?;
            Ok(partial
                .into_iter()
                .enumerate()
                .filter_map(|(i, s)| s.map(|s| (i, s)))
                .collect())
        })
        .collect()
}

/// `P(d_g ∈ X_goal | evidence)` summed over the (disjoint) goal
/// parametrizations, index-based.
pub fn predict_indexed(
    model: &CausalModel,
    evidence: &[Option<usize>],
    targets: &[Vec<(usize, usize)>],
    config: &InferenceConfig,
) -> Result<Prediction> {
    if !config.force_sampling {
        let exact: Result<f64> = targets
            .iter()
            .map(|t| exact_indexed(model, t, evidence, config.exact_cap))
            .sum();
        match exact {
            Ok(p) => {
                return Ok(Prediction {
                    probability: p.clamp(0.0, 1.0),
                    method: Method::Exact,
                    budget: None,
                })
            }
            Err(Error::StateSpaceTooLarge { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let mut p = 0.0;
    for t in targets {
        p += logic_sample_indexed(model, t, evidence, config.budget, config.seed)?.probability;
    }
    Ok(Prediction {
        probability: p.clamp(0.0, 1.0),
        method: Method::LogicSampling,
        budget: Some(config.budget),
    })
}

/// Predicted success probability of `evidence` under `goal`.
pub fn predict_success(
    model: &CausalModel,
    evidence: &IntervalAssignment,
    goal: &GoalSpec,
    config: &InferenceConfig,
) -> Result<Prediction> {
    goal.validate(model.variables())?;
    let evidence = model.to_partial(evidence)?;
    predict_indexed(model, &evidence, &goal_targets(model, goal)?, config)
}
