//! Success probability over a grid of two interval variables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::discretize::{midpoint_of, IntervalAssignment};
use crate::error::{Error, Result};
use crate::goal::GoalSpec;
use crate::inference::{predict_success, InferenceConfig};
use crate::model::CausalModel;

/// One grid cell: the facet states, the two axis states, and the predicted
/// success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub assignment: IntervalAssignment,
    pub x_label: String,
    pub y_label: String,
    pub x_mid: f64,
    pub y_mid: f64,
    pub probability: f64,
}

/// Evaluates the goal probability for every state pair of `x` and `y`,
/// once per combination of the `facets` states. Variables outside the grid
/// are marginalized.
pub fn export_heatmap(
    model: &CausalModel,
    goal: &GoalSpec,
    x: &str,
    y: &str,
    facets: &[&str],
    inference: &InferenceConfig,
) -> Result<Vec<HeatmapRow>> {
    let scheme = model.scheme();
    let mut axes: Vec<&str> = facets.to_vec();
    axes.extend([x, y]);
    let idx = axes.iter().map(|n| scheme.index_of(n)).collect::<Result<Vec<_>>>()?;
    for (k, &i) in idx.iter().enumerate() {
        if idx[..k].contains(&i) {
            return Err(Error::InvalidArgument(format!("`{}` appears twice in the grid", axes[k])));
        }
    }
    let cards: Vec<usize> = idx.iter().map(|&i| scheme.cardinality(i)).collect();
    let total: usize = cards.iter().product();
    let (ix, iy) = (idx[idx.len() - 2], idx[idx.len() - 1]);
    let mid = |name: &str, i: usize, s: usize| -> Result<f64> {
        if model.variables().get(i).is_continuous() {
            Ok(midpoint_of(&scheme.interval(name, s)?))
        } else {
            Ok(s as f64)
        }
    };
    let mut rows = Vec::with_capacity(total);
    for code in 0..total {
        let mut rest = code;
        let mut states = vec![0; cards.len()];
        for k in (0..cards.len()).rev() {
            states[k] = rest % cards[k];
            rest /= cards[k];
        }
        let assignment: IntervalAssignment = axes.iter().copied().zip(states.iter().copied()).collect();
        let p = predict_success(model, &assignment, goal, inference)?.probability;
        let (sx, sy) = (states[states.len() - 2], states[states.len() - 1]);
        rows.push(HeatmapRow {
            x_label: scheme.state_label(ix, sx),
            y_label: scheme.state_label(iy, sy),
            x_mid: mid(x, ix, sx)?,
            y_mid: mid(y, iy, sy)?,
            probability: p,
            assignment,
        });
    }
    Ok(rows)
}

/// Writes heatmap rows as CSV: facet and axis states, axis interval labels
/// and midpoints, and the probability.
pub fn write_heatmap_csv<W: Write>(rows: &[HeatmapRow], facets: &[&str], x: &str, y: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = facets.iter().map(|f| f.to_string()).collect();
    header.extend([
        x.to_string(),
        y.to_string(),
        format!("{x}_interval"),
        format!("{y}_interval"),
        format!("{x}_mid"),
        format!("{y}_mid"),
        "probability".into(),
    ]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = facets
            .iter()
            .chain([&x, &y])
            .map(|n| r.assignment.get(n).unwrap_or(0).to_string())
            .collect();
        rec.extend([
            r.x_label.clone(),
            r.y_label.clone(),
            format!("{:.6}", r.x_mid),
            format!("{:.6}", r.y_mid),
            format!("{:.6}", r.probability),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
