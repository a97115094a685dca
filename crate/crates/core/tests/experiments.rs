use causal_prevent::discretize::IntervalAssignment;
use causal_prevent::goal::GoalSpec;
use causal_prevent::harness::{confusion_matrix, e1_model, export_heatmap, run_e1, write_heatmap_csv, E1Config};
use causal_prevent::inference::{predict_success, InferenceConfig};
use causal_prevent::model::CausalModel;

fn p_success(model: &CausalModel, x: usize, y: usize, z: usize) -> f64 {
    let a: IntervalAssignment = [("xOff1", x), ("yOff1", y), ("dropOff1", z)].into_iter().collect();
    let goal = GoalSpec::single_flag("onTop1", 0.8).unwrap();
    predict_success(model, &a, &goal, &InferenceConfig::default()).unwrap().probability
}

#[test]
fn hand_counted_confusion_matrix() {
    let predicted = [true, true, false, false, true, false, true, true, false, true];
    let actual = [true, false, false, true, true, false, true, false, false, true];
    // success/success 4, success/failure 1, failure/success 2, failure/failure 3
    let cm = confusion_matrix(&predicted, &actual).unwrap();
    assert_eq!(
        (cm.success_predicted_success, cm.success_predicted_failure, cm.failure_predicted_success, cm.failure_predicted_failure),
        (40.0, 10.0, 20.0, 30.0)
    );
    assert_eq!(cm.total(), 100.0);
    assert_eq!(confusion_matrix(&[true; 3], &[true; 3]).unwrap().success_predicted_success, 100.0);
    assert!(confusion_matrix(&[], &[]).is_err());
    assert!(confusion_matrix(&[true], &[true, false]).is_err());
}

#[test]
fn single_stack_model_matches_the_physics() {
    let model = e1_model(&E1Config::default()).unwrap();
    assert!(p_success(&model, 2, 2, 0) > 0.8);
    assert!(p_success(&model, 0, 0, 2) < 0.2);
    assert!(p_success(&model, 4, 2, 0) < p_success(&model, 2, 2, 0));
    // Higher drops never help at the centre or one step off it.
    for x in 1..=3 {
        assert!(p_success(&model, x, 2, 2) <= p_success(&model, x, 2, 0));
    }
}

#[test]
fn heatmap_covers_the_grid() {
    let model = e1_model(&E1Config::default()).unwrap();
    let goal = GoalSpec::single_flag("onTop1", 0.8).unwrap();
    let rows = export_heatmap(&model, &goal, "xOff1", "yOff1", &["dropOff1"], &InferenceConfig::default()).unwrap();
    assert_eq!(rows.len(), 75);
    for r in &rows {
        let (x, y, z) = (
            r.assignment.get("xOff1").unwrap(),
            r.assignment.get("yOff1").unwrap(),
            r.assignment.get("dropOff1").unwrap(),
        );
        assert_eq!(r.probability, p_success(&model, x, y, z));
    }
    let mut csv = Vec::new();
    write_heatmap_csv(&rows, &["dropOff1"], "xOff1", "yOff1", &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 76);
    assert!(text.starts_with("dropOff1,xOff1,yOff1,xOff1_interval,yOff1_interval,xOff1_mid,yOff1_mid,probability\n"));
    assert!(export_heatmap(&model, &goal, "xOff1", "xOff1", &[], &InferenceConfig::default()).is_err());
}

#[test]
fn single_stack_report_is_reproducible() {
    let config = E1Config { test_episodes: 10_000, ..E1Config::default() };
    let a = run_e1(&config).unwrap();
    let b = run_e1(&config).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let base = a.baseline();
    assert!((50.0..=85.0).contains(&base.failure_rate), "{}", base.failure_rate);
    let corrected = &a.arms[1];
    assert!(corrected.failure_rate < base.failure_rate);
    assert_eq!(corrected.idempotence_violations, 0);
    let cm = corrected.confusion.unwrap();
    assert!((cm.total() - 100.0).abs() < 0.1);
    assert!(a.render_text().contains("failures"));
}
