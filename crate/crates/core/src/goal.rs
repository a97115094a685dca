//! Goal variables, the parametrizations that count as success, and the
//! success threshold.

use serde::{Deserialize, Serialize};

use crate::data::{Sample, Value};
use crate::discretize::IntervalAssignment;
use crate::error::{Error, Result};
use crate::variables::{Role, VarKind, VariableSet};

/// Default success threshold.
pub const DEFAULT_EPSILON: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGoal", into = "RawGoal")]
pub struct GoalSpec {
    variables: Vec<String>,
    goals: Vec<IntervalAssignment>,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGoal {
    variables: Vec<String>,
    goals: Vec<IntervalAssignment>,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl TryFrom<RawGoal> for GoalSpec {
    type Error = Error;

    fn try_from(raw: RawGoal) -> Result<Self> {
        GoalSpec::new(raw.variables, raw.goals, raw.epsilon)
    }
}

impl From<GoalSpec> for RawGoal {
    fn from(g: GoalSpec) -> Self {
        RawGoal {
            variables: g.variables,
            goals: g.goals,
            epsilon: g.epsilon,
        }
    }
}

impl GoalSpec {
    pub fn new(variables: Vec<String>, goals: Vec<IntervalAssignment>, epsilon: f64) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidGoal("no goal variables".into()));
        }
        if goals.is_empty() {
            return Err(Error::InvalidGoal("no goal parametrizations".into()));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::InvalidGoal(format!("duplicate goal variable `{v}`")));
            }
        }
        for g in &goals {
            if g.len() != variables.len() || !variables.iter().all(|v| g.contains(v)) {
                return Err(Error::InvalidGoal(
                    "every goal parametrization must assign exactly the goal variables".into(),
                ));
            }
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidGoal(format!("threshold {epsilon} outside (0, 1)")));
        }
        Ok(Self {
            variables,
            goals,
            epsilon,
        })
    }

    /// Goal `{name = true}` for a single boolean outcome.
    pub fn single_flag(name: &str, epsilon: f64) -> Result<Self> {
        let goal: IntervalAssignment = [(name, 1usize)].into_iter().collect();
        Self::new(vec![name.to_string()], vec![goal], epsilon)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn goals(&self) -> &[IntervalAssignment] {
        &self.goals
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidGoal(format!("threshold {epsilon} outside (0, 1)")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Checks that the goal only mentions effect variables and valid states.
    pub fn validate(&self, vars: &VariableSet) -> Result<()> {
        for name in &self.variables {
            let spec = vars.by_name(name)?;
            if spec.role != Role::Effect {
                return Err(Error::InvalidGoal(format!("`{name}` is not an effect variable")));
            }
            if let VarKind::Boolean = spec.kind {
                if self.goals.iter().any(|g| g.get(name).unwrap_or(0) > 1) {
                    return Err(Error::InvalidGoal(format!("invalid boolean state for `{name}`")));
                }
            }
        }
        Ok(())
    }

    /// Whether the restriction of `assignment` to the goal variables is one
    /// of the goal parametrizations.
    pub fn is_success(&self, assignment: &IntervalAssignment) -> Result<bool> {
        let restricted = self
            .variables
            .iter()
            .map(|v| {
                assignment
                    .get(v)
                    .map(|s| (v.as_str(), s))
                    .ok_or_else(|| Error::MissingValue(v.clone()))
            })
            .collect::<Result<IntervalAssignment>>()?;
        Ok(self.goals.contains(&restricted))
    }

    /// [`is_success`](Self::is_success) on a raw sample; goal variables must be boolean.
    pub fn is_success_sample(&self, sample: &Sample) -> Result<bool> {
        let mut a = IntervalAssignment::new();
        for v in &self.variables {
            match sample.get(v) {
                Some(Value::Bool(b)) => {
                    a.insert(v.clone(), *b as usize);
                }
                Some(Value::Real(_)) => return Err(Error::TypeMismatch(v.clone())),
                None => return Err(Error::MissingValue(v.clone())),
            }
        }
        self.is_success(&a)
    }
}

/// Free-function form of [`GoalSpec::is_success`].
pub fn is_success(assignment: &IntervalAssignment, goal: &GoalSpec) -> Result<bool> {
    goal.is_success(assignment)
}
