//! Predict-then-prevent: keep a state predicted to succeed, otherwise move
//! the responsible variables to the middle of their closest successful
//! intervals.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_value, Sample, Value};
use crate::discretize::{discretize_sample, midpoint_of, IntervalAssignment};
use crate::error::{Error, Result};
use crate::goal::GoalSpec;
use crate::inference::{goal_targets, predict_indexed};
use crate::model::CausalModel;
use crate::search::{closest_success, CorrectionResult, SearchOptions};
use crate::variables::Role;

/// Default cap on the number of lattice entries a correction table may hold.
pub const DEFAULT_TABLE_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Proceed,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreventionOutcome {
    pub decision: Decision,
    /// Predicted success of the input state.
    pub probability: f64,
    /// Concrete parametrization to execute.
    pub x_success: Sample,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionResult>,
}

/// Predicts success of `current`; below the threshold, searches the closest
/// successful intervals and materializes them as interval midpoints.
///
/// Variables the correction does not touch keep their exact input values.
pub fn prevent(
    current: &Sample,
    model: &CausalModel,
    goal: &GoalSpec,
    options: &SearchOptions,
) -> Result<PreventionOutcome> {
    goal.validate(model.variables())?;
    for (name, &value) in current {
        check_value(model.variables().by_name(name)?, value)?;
    }
    if let Some(names) = &options.transitionable {
        for n in names {
            if !current.contains_key(n) {
                return Err(Error::MissingValue(n.clone()));
            }
        }
    } else if let Some(missing) = model
        .variables()
        .iter()
        .find(|v| v.role == Role::Cause && !current.contains_key(&v.name))
    {
        return Err(Error::MissingValue(missing.name.clone()));
    }

    let assignment = discretize_sample(current, model.scheme())?;
    let evidence = model.to_partial(&assignment)?;
    let targets = goal_targets(model, goal)?;
    let p = predict_indexed(model, &evidence, &targets, &options.inference)?.probability;
    if p >= goal.epsilon() {
        return Ok(PreventionOutcome {
            decision: Decision::Proceed,
            probability: p,
            x_success: current.clone(),
            correction: None,
        });
    }
    let correction = closest_success(&assignment, model, goal, options)?;
    let x_success = materialize(current, &correction, model)?;
    Ok(PreventionOutcome {
        decision: Decision::Corrected,
        probability: p,
        x_success,
        correction: Some(correction),
    })
}

/// Replaces each changed variable by the midpoint of its solution interval.
pub fn materialize(current: &Sample, correction: &CorrectionResult, model: &CausalModel) -> Result<Sample> {
    let mut out = current.clone();
    for change in &correction.changes {
        let interval = model.scheme().interval(&change.variable, change.to)?;
        out.insert(change.variable.clone(), Value::Real(midpoint_of(&interval)));
    }
    Ok(out)
}

/// One lattice entry of a precomputed correction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub assignment: IntervalAssignment,
    pub decision: Decision,
    pub probability: f64,
    pub correction: Option<CorrectionResult>,
    /// Set when no assignment in the lattice clears the threshold.
    pub unreachable: bool,
}

/// Exhaustive map from cause-variable interval assignments to decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTable {
    variables: Vec<String>,
    entries: Vec<TableEntry>,
    index: HashMap<Vec<usize>, usize>,
}

impl CorrectionTable {
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, assignment: &IntervalAssignment) -> Option<&TableEntry> {
        let key = self
            .variables
            .iter()
            .map(|v| assignment.get(v))
            .collect::<Option<Vec<_>>>()?;
        self.index.get(&key).map(|&i| &self.entries[i])
    }

    /// Table-driven equivalent of [`prevent`].
    pub fn prevent(&self, current: &Sample, model: &CausalModel) -> Result<PreventionOutcome> {
        let assignment = discretize_sample(current, model.scheme())?;
        let entry = self
            .lookup(&assignment)
            .ok_or_else(|| Error::InvalidArgument("state not covered by the correction table".into()))?;
        match (&entry.decision, &entry.correction) {
            (Decision::Corrected, Some(c)) => Ok(PreventionOutcome {
                decision: Decision::Corrected,
                probability: entry.probability,
                x_success: materialize(current, c, model)?,
                correction: Some(c.clone()),
            }),
            (Decision::Corrected, None) => Err(Error::NoReachableSuccess { visited: 0 }),
            (Decision::Proceed, _) => Ok(PreventionOutcome {
                decision: Decision::Proceed,
                probability: entry.probability,
                x_success: current.clone(),
                correction: None,
            }),
        }
    }

    /// One row per lattice entry: the cause intervals, the decision, the
    /// predicted probability, and the corrected intervals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.variables.clone();
        header.extend(["decision".into(), "probability".into()]);
        header.extend(self.variables.iter().map(|v| format!("{v}_solution")));
        header.extend(["solution_probability".into(), "depth".into()]);
        w.write_record(&header)?;
        for e in &self.entries {
            let mut row: Vec<String> = self
                .variables
                .iter()
                .map(|v| e.assignment.get(v).unwrap_or(0).to_string())
                .collect();
            let decision = match (e.decision, e.unreachable) {
                (_, true) => "unreachable",
                (Decision::Proceed, _) => "proceed",
                (Decision::Corrected, _) => "corrected",
            };
            row.push(decision.into());
            row.push(format!("{:.6}", e.probability));
            match &e.correction {
                Some(c) => {
                    row.extend(self.variables.iter().map(|v| c.solution.get(v).unwrap_or(0).to_string()));
                    row.push(format!("{:.6}", c.probability));
                    row.push(c.depth.to_string());
                }
                None => {
                    row.extend(self.variables.iter().map(|v| e.assignment.get(v).unwrap_or(0).to_string()));
                    row.push(format!("{:.6}", e.probability));
                    row.push("0".into());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every assignment of the cause variables and stores its
/// decision and, where needed, its correction.
pub fn precompute_corrections(
    model: &CausalModel,
    goal: &GoalSpec,
    options: &SearchOptions,
    cap: u128,
) -> Result<CorrectionTable> {
    goal.validate(model.variables())?;
    let vars = model.variables();
    let causes: Vec<usize> = match &options.transitionable {
        Some(names) => names.iter().map(|n| vars.index_of(n)).collect::<Result<_>>()?,
        None => vars.causes(),
    };
    let cards: Vec<usize> = causes.iter().map(|&v| model.cardinalities()[v]).collect();
    let size: u128 = cards.iter().map(|&c| c as u128).product();
    if size > cap {
        return Err(Error::LatticeTooLarge { size, cap });
    }
    let names: Vec<String> = causes.iter().map(|&v| vars.get(v).name.clone()).collect();
    let targets = goal_targets(model, goal)?;
    let entries = (0..size as usize)
        .into_par_iter()
        .map(|code| {
            let mut rest = code;
            let mut states = vec![0; cards.len()];
            for k in (0..cards.len()).rev() {
                states[k] = rest % cards[k];
                rest /= cards[k];
            }
            let assignment: IntervalAssignment =
                names.iter().cloned().zip(states.iter().copied()).collect();
            let evidence = model.to_partial(&assignment)?;
            let p = predict_indexed(model, &evidence, &targets, &options.inference)?.probability;
            if p >= goal.epsilon() {
                return Ok(TableEntry {
                    assignment,
                    decision: Decision::Proceed,
                    probability: p,
                    correction: None,
                    unreachable: false,
                });
            }
            let (correction, unreachable) = match closest_success(&assignment, model, goal, options) {
                Ok(c) => (Some(c), false),
                Err(Error::NoReachableSuccess { .. }) => (None, true),
                Err(e) => return Err(e),
            };
            Ok(TableEntry {
                assignment,
                decision: Decision::Corrected,
                probability: p,
                correction,
                unreachable,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (names.iter().map(|v| e.assignment.get(v).unwrap()).collect(), i))
        .collect();
    Ok(CorrectionTable {
        variables: names,
        entries,
        index,
    })
}
