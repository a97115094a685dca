//! Contrastive search for the closest interval assignment predicted to succeed.
//!
//! The search space is the lattice of interval indices of the transitionable
//! cause variables; one step moves one variable to an adjacent interval.
//! Breadth-first expansion visits variables in declaration order and tries
//! the lower neighbour before the upper one, so ties between equally close
//! solutions are broken reproducibly. As in the original formulation, the
//! start node itself is never tested; callers check it first.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::discretize::{IntervalAssignment, IntervalScheme};
use crate::error::{Error, Result};
use crate::goal::GoalSpec;
use crate::inference::{goal_targets, predict_indexed, InferenceConfig};
use crate::model::CausalModel;
use crate::variables::Role;

/// Lazy neighbour function over interval assignments of the cause variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionModel {
    /// Transitionable variables (indices into the scheme), declaration order.
    vars: Vec<usize>,
    cards: Vec<usize>,
}

impl TransitionModel {
    pub fn new(scheme: &IntervalScheme, vars: Vec<usize>) -> Self {
        let cards = vars.iter().map(|&v| scheme.cardinality(v)).collect();
        Self { vars, cards }
    }

    pub fn variables(&self) -> &[usize] {
        &self.vars
    }

    /// Number of lattice nodes.
    pub fn lattice_size(&self) -> u128 {
        self.cards.iter().map(|&c| c as u128).product()
    }

    /// Children of `node` (states of the transitionable variables, in
    /// order): each variable moved down, then up, by one interval.
    pub fn children(&self, node: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(2 * node.len());
        for (k, &s) in node.iter().enumerate() {
            if s > 0 {
                let mut c = node.to_vec();
                c[k] = s - 1;
                out.push(c);
            }
            if s + 1 < self.cards[k] {
                let mut c = node.to_vec();
                c[k] = s + 1;
                out.push(c);
            }
        }
        out
    }

    fn encode(&self, node: &[usize]) -> u64 {
        node.iter().zip(&self.cards).fold(0u64, |acc, (&s, &c)| acc * c as u64 + s as u64)
    }
}

/// Builds the transition model over the named cause variables.
pub fn generate_transitions(scheme: &IntervalScheme, cause_vars: &[&str]) -> Result<TransitionModel> {
    let mut idx = cause_vars
        .iter()
        .map(|n| scheme.index_of(n))
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(TransitionModel::new(scheme, idx))
}

/// One corrected variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub variable: String,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub solution: IntervalAssignment,
    pub probability: f64,
    pub depth: usize,
    pub changes: Vec<Change>,
    pub explanation: String,
    /// Lattice nodes evaluated before the solution was found.
    pub evaluated: usize,
}

/// Which variables the search may move.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Names of transitionable variables. `None` means every cause variable
    /// present in the failing assignment.
    pub transitionable: Option<Vec<String>>,
    #[serde(default)]
    pub inference: InferenceConfig,
}

/// Breadth-first search from `failure` to the closest assignment whose
/// predicted success exceeds the goal threshold.
///
/// Every variable in `failure` is evidence; only the transitionable cause
/// variables change.
pub fn closest_success(
    failure: &IntervalAssignment,
    model: &CausalModel,
    goal: &GoalSpec,
    options: &SearchOptions,
) -> Result<CorrectionResult> {
    goal.validate(model.variables())?;
    let scheme = model.scheme();
    let vars = model.variables();
    let mut base = model.to_partial(failure)?;
    let movable: Vec<usize> = match &options.transitionable {
        Some(names) => {
            let mut idx = names.iter().map(|n| vars.index_of(n)).collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            for &i in &idx {
                let spec = vars.get(i);
                if spec.role != Role::Cause {
                    return Err(Error::InvalidArgument(format!(
                        "`{}` is an effect and cannot be transitioned",
                        spec.name
                    )));
                }
                if base[i].is_none() {
                    return Err(Error::MissingValue(spec.name.clone()));
                }
            }
            idx
        }
        None => vars
            .causes()
            .into_iter()
            .filter(|&i| base[i].is_some())
            .collect(),
    };
    let transitions = TransitionModel::new(scheme, movable);
    let targets = goal_targets(model, goal)?;
    let eps = goal.epsilon();

    let start: Vec<usize> = transitions.vars.iter().map(|&v| base[v].unwrap()).collect();
    let mut seen: HashSet<u64> = HashSet::from([transitions.encode(&start)]);
    let mut queue: VecDeque<(Vec<usize>, usize)> = VecDeque::from([(start.clone(), 0)]);
    let mut evaluated = 0;

    while let Some((node, depth)) = queue.pop_front() {
        for child in transitions.children(&node) {
            if !seen.insert(transitions.encode(&child)) {
                continue;
            }
            for (&v, &s) in transitions.vars.iter().zip(&child) {
                base[v] = Some(s);
            }
            evaluated += 1;
            let p = predict_indexed(model, &base, &targets, &options.inference)?.probability;
            if p > eps {
                let mut solution = failure.clone();
                let mut changes = Vec::new();
                for (k, &v) in transitions.vars.iter().enumerate() {
                    let name = &vars.get(v).name;
                    solution.insert(name.clone(), child[k]);
                    if child[k] != start[k] {
                        changes.push(Change {
                            variable: name.clone(),
                            from: start[k],
                            to: child[k],
                        });
                    }
                }
                let mut result = CorrectionResult {
                    solution,
                    probability: p,
                    depth: depth + 1,
                    changes,
                    explanation: String::new(),
                    evaluated,
                };
                result.explanation = render_explanation(&result, scheme);
                return Ok(result);
            }
            queue.push_back((child, depth + 1));
        }
    }
    Err(Error::NoReachableSuccess { visited: seen.len() })
}

/// Renders the contrastive statement: one sentence per changed variable,
/// preceded by a plain-language summary for stacking variables
/// (`xOff<i>`, `yOff<i>`, `dropOff<i>`).
pub fn render_explanation(result: &CorrectionResult, scheme: &IntervalScheme) -> String {
    if result.changes.is_empty() {
        return "No correction required.".to_string();
    }
    let mut sentences = Vec::new();
    for c in &result.changes {
        if let Some(summary) = stacking_summary(c) {
            sentences.push(summary);
        }
    }
    for c in &result.changes {
        let label = |s: usize| {
            scheme
                .index_of(&c.variable)
                .map(|i| scheme.state_label(i, s))
                .unwrap_or_else(|_| s.to_string())
        };
        sentences.push(format!(
            "{} is in {} instead of {}.",
            c.variable,
            label(c.from),
            label(c.to)
        ));
    }
    sentences.join(" ")
}

fn ordinal(i: usize) -> String {
    match i {
        1 => "first".into(),
        2 => "second".into(),
        3 => "third".into(),
        4 => "fourth".into(),
        5 => "fifth".into(),
        n => format!("{n}th"),
    }
}

fn stacking_summary(change: &Change) -> Option<String> {
    let split = |prefix: &str| {
        change
            .variable
            .strip_prefix(prefix)
            .and_then(|rest| rest.parse::<usize>().ok())
    };
    // Higher interval index means a larger value of the variable.
    let too_high = change.from > change.to;
    if let Some(i) = split("xOff") {
        let side = if too_high { "right" } else { "left" };
        Some(format!("The {} cube was stacked too far to the {side}.", ordinal(i)))
    } else if let Some(i) = split("yOff") {
        let side = if too_high { "back" } else { "front" };
        Some(format!("The {} cube was stacked too far to the {side}.", ordinal(i)))
    } else if let Some(i) = split("dropOff") {
        let how = if too_high { "too high" } else { "too low" };
        Some(format!("The {} cube was dropped from {how}.", ordinal(i)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::Discretization;
    use crate::variables::{Role, VariableSet, VariableSpec};

    fn scheme(cards: &[usize]) -> IntervalScheme {
        let vars = VariableSet::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, _)| VariableSpec::continuous(format!("v{i}"), Role::Cause, 0.0, 1.0))
                .collect(),
        )
        .unwrap();
        let ds = cards
            .iter()
            .map(|&c| Discretization::Intervals {
                boundaries: (0..=c).map(|k| k as f64 / c as f64).collect(),
            })
            .collect();
        IntervalScheme::new(&vars, ds).unwrap()
    }

    #[test]
    fn two_by_two_children() {
        let t = generate_transitions(&scheme(&[2, 2]), &["v0", "v1"]).unwrap();
        let kids = t.children(&[0, 0]);
        assert_eq!(kids, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn single_interval_has_no_children() {
        let t = generate_transitions(&scheme(&[1]), &["v0"]).unwrap();
        assert!(t.children(&[0]).is_empty());
    }

    #[test]
    fn interior_and_corner_counts() {
        let t = generate_transitions(&scheme(&[5, 5, 5]), &["v0", "v1", "v2"]).unwrap();
        assert_eq!(t.children(&[2, 2, 2]).len(), 6);
        assert_eq!(t.children(&[0, 0, 0]).len(), 3);
        assert_eq!(t.children(&[4, 0, 2]).len(), 4);
        assert_eq!(t.lattice_size(), 125);
    }

    #[test]
    fn transitions_are_symmetric() {
        let t = generate_transitions(&scheme(&[3, 4]), &["v0", "v1"]).unwrap();
        for a in 0..3 {
            for b in 0..4 {
                for child in t.children(&[a, b]) {
                    assert!(t.children(&child).contains(&vec![a, b]));
                    let diff = child.iter().zip([a, b]).filter(|(x, y)| **x != *y).count();
                    assert_eq!(diff, 1);
                }
            }
        }
    }

    #[test]
    fn explanation_templates() {
        let sc = scheme(&[4]);
        let mut r = CorrectionResult {
            solution: IntervalAssignment::new(),
            probability: 0.9,
            depth: 0,
            changes: vec![],
            explanation: String::new(),
            evaluated: 0,
        };
        assert_eq!(render_explanation(&r, &sc), "No correction required.");
        r.changes.push(Change { variable: "v0".into(), from: 3, to: 2 });
        assert_eq!(render_explanation(&r, &sc), "v0 is in (0.75, 1] instead of (0.5, 0.75].");
    }

    #[test]
    fn stacking_summary_directions() {
        let c = Change { variable: "xOff1".into(), from: 4, to: 3 };
        assert_eq!(stacking_summary(&c).unwrap(), "The first cube was stacked too far to the right.");
        let c = Change { variable: "yOff2".into(), from: 0, to: 1 };
        assert_eq!(stacking_summary(&c).unwrap(), "The second cube was stacked too far to the front.");
        let c = Change { variable: "dropOff3".into(), from: 2, to: 0 };
        assert_eq!(stacking_summary(&c).unwrap(), "The third cube was dropped from too high.");
        assert!(stacking_summary(&Change { variable: "speed".into(), from: 1, to: 0 }).is_none());
    }
}
