mod common;

use causal_prevent::cpt::Cpt;
use causal_prevent::discretize::{Discretization, IntervalScheme};
use causal_prevent::error::Error;
use causal_prevent::goal::GoalSpec;
use causal_prevent::graph::Dag;
use causal_prevent::model::{CausalModel, ModelMetadata};
use causal_prevent::search::{closest_success, SearchOptions};
use causal_prevent::variables::{Role, VariableSet, VariableSpec};
use common::{assign, minimality_violations};

/// Two causes on a 4 x 4 grid and a flag that succeeds with probability
/// 0.95 where `ok(x, y)` holds and 0.05 elsewhere.
fn grid_model(x: &str, y: &str, ok: impl Fn(usize, usize) -> bool) -> CausalModel {
    let specs = vec![
        VariableSpec::continuous(x, Role::Cause, 0.0, 4.0),
        VariableSpec::continuous(y, Role::Cause, 0.0, 4.0),
        VariableSpec::boolean("success", Role::Effect),
    ];
    let vars = VariableSet::new(specs).unwrap();
    let grid = || Discretization::Intervals { boundaries: vec![0.0, 1.0, 2.0, 3.0, 4.0] };
    let scheme = IntervalScheme::new(&vars, vec![grid(), grid(), Discretization::Boolean]).unwrap();
    let dag = Dag::from_edges(
        vec![x.into(), y.into(), "success".into()],
        &[(x, "success"), (y, "success")],
    )
    .unwrap();
    let rows = (0..16)
        .map(|j| if ok(j / 4, j % 4) { vec![0.05, 0.95] } else { vec![0.95, 0.05] })
        .collect();
    let cpts = vec![
        Cpt { child: x.into(), parents: vec![], rows: vec![vec![0.25; 4]] },
        Cpt { child: y.into(), parents: vec![], rows: vec![vec![0.25; 4]] },
        Cpt { child: "success".into(), parents: vec![x.into(), y.into()], rows },
    ];
    CausalModel::from_parts(vars, scheme, dag, cpts, ModelMetadata::default()).unwrap()
}

fn flag_goal() -> GoalSpec {
    GoalSpec::single_flag("success", 0.8).unwrap()
}

#[test]
fn grid_example_moves_both_variables() {
    let model = grid_model("X", "Y", |x, y| x >= 1 && y <= 2);
    let r = closest_success(&assign(&[("X", 0), ("Y", 3)]), &model, &flag_goal(), &SearchOptions::default()).unwrap();
    assert_eq!(r.depth, 2);
    assert_eq!(r.solution, assign(&[("X", 1), ("Y", 2)]));
    assert_eq!(r.changes.len(), 2);
    assert_eq!(r.explanation, "X is in [0, 1] instead of (1, 2]. Y is in (3, 4] instead of (2, 3].");
}

#[test]
fn direct_neighbour_gives_depth_one() {
    let model = grid_model("X", "Y", |x, _| x == 3);
    let r = closest_success(&assign(&[("X", 2), ("Y", 1)]), &model, &flag_goal(), &SearchOptions::default()).unwrap();
    assert_eq!(r.depth, 1);
    assert_eq!(r.changes.len(), 1);
    assert_eq!(r.solution, assign(&[("X", 3), ("Y", 1)]));
}

#[test]
fn ties_follow_declaration_order_then_direction() {
    // X up and Y down both succeed after one step; X comes first.
    let model = grid_model("X", "Y", |x, y| (x, y) == (2, 1) || (x, y) == (1, 0));
    let r = closest_success(&assign(&[("X", 1), ("Y", 1)]), &model, &flag_goal(), &SearchOptions::default()).unwrap();
    assert_eq!(r.solution, assign(&[("X", 2), ("Y", 1)]));
    // Both directions of X succeed; the decrement wins.
    let model = grid_model("X", "Y", |x, _| x != 1);
    let r = closest_success(&assign(&[("X", 1), ("Y", 1)]), &model, &flag_goal(), &SearchOptions::default()).unwrap();
    assert_eq!(r.solution, assign(&[("X", 0), ("Y", 1)]));
}

#[test]
fn unreachable_goal_is_an_error() {
    let model = grid_model("X", "Y", |_, _| false);
    let err = closest_success(&assign(&[("X", 0), ("Y", 0)]), &model, &flag_goal(), &SearchOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NoReachableSuccess { visited: 16 }), "{err}");
}

#[test]
fn effects_cannot_be_transitioned() {
    let model = grid_model("X", "Y", |x, _| x == 3);
    let options = SearchOptions { transitionable: Some(vec!["success".into()]), ..Default::default() };
    let err = closest_success(&assign(&[("X", 0), ("Y", 0)]), &model, &flag_goal(), &options).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn depth_is_the_exhaustive_minimum_distance() {
    let violations = minimality_violations(2024, 200);
    assert!(violations.is_empty(), "{violations:?}");
}
