//! Quantile discretization of continuous variables into interval states.
//!
//! Every continuous variable is split into contiguous intervals. The first
//! interval is closed on both ends, every later one is half-open on the left:
//!
//! ```text
//! [b0, b1], (b1, b2], ..., (b(k-1), bk]
//! ```
//!
//! where `b0` and `bk` are the declared range limits and the interior
//! boundaries are empirical quantiles of the training column. Boolean
//! variables keep their two states, `0 = false` and `1 = true`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{check_value, Dataset, Sample, Value};
use crate::error::{Error, Result};
use crate::variables::{VarKind, VariableSet};

/// A bounded interval of one continuous variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Whether `lower` itself belongs to the interval (only for the first one).
    pub closed_lower: bool,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        let above = if self.closed_lower {
            value >= self.lower
        } else {
            value > self.lower
        };
        above && value <= self.upper
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.closed_lower { '[' } else { '(' };
        write!(f, "{open}{}, {}]", fmt_meters(self.lower), fmt_meters(self.upper))
    }
}

/// Compact decimal rendering used in explanations (at most four decimals).
fn fmt_meters(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Midpoint `(lo + hi) / 2` of a bounded interval.
pub fn midpoint_of(interval: &Interval) -> f64 {
    (interval.lower + interval.upper) / 2.0
}

/// How one variable maps to discrete states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Discretization {
    /// `boundaries` has `bins + 1` strictly increasing entries, the outer two
    /// being the declared range limits.
    Intervals { boundaries: Vec<f64> },
    Boolean,
}

impl Discretization {
    pub fn cardinality(&self) -> usize {
        match self {
            Discretization::Intervals { boundaries } => boundaries.len() - 1,
            Discretization::Boolean => 2,
        }
    }

    pub fn interval(&self, state: usize) -> Option<Interval> {
        match self {
            Discretization::Intervals { boundaries } if state + 1 < boundaries.len() => Some(Interval {
                lower: boundaries[state],
                upper: boundaries[state + 1],
                closed_lower: state == 0,
            }),
            _ => None,
        }
    }

    /// Index of the interval containing `value`, or `None` when out of range.
    pub fn locate(&self, value: f64) -> Option<usize> {
        let Discretization::Intervals { boundaries } = self else {
            return None;
        };
        let (lower, upper) = (boundaries[0], *boundaries.last().unwrap());
        if value.is_nan() || value < lower || value > upper {
            return None;
        }
        // First interior boundary that is >= value; values on a boundary
        // belong to the interval below it.
        let interior = &boundaries[1..boundaries.len() - 1];
        Some(interior.partition_point(|&b| b < value))
    }
}

/// Computes `bins` equal-frequency intervals for one continuous column.
///
/// Interior boundaries are the empirical `q / bins` quantiles (linear
/// interpolation between order statistics); the outer boundaries are the
/// declared range of the variable.
pub fn quantile_discretize(data: &Dataset, variable: &str, bins: usize) -> Result<Discretization> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let spec = data.variables().by_name(variable)?;
    let (lower, upper) = spec.range().ok_or_else(|| Error::TypeMismatch(variable.to_string()))?;
    let mut column = data.real_column(variable)?;
    column.sort_by(f64::total_cmp);

    let mut distinct = 1;
    for w in column.windows(2) {
        if w[1] > w[0] {
            distinct += 1;
        }
    }
    let degenerate = || Error::DegenerateColumn {
        name: variable.to_string(),
        distinct,
        bins,
    };
    if distinct < bins {
        return Err(degenerate());
    }

    let mut boundaries = Vec::with_capacity(bins + 1);
    boundaries.push(lower);
    for q in 1..bins {
        boundaries.push(empirical_quantile(&column, q as f64 / bins as f64));
    }
    boundaries.push(upper);
    if boundaries.windows(2).any(|w| w[1] <= w[0]) {
        return Err(degenerate());
    }
    Ok(Discretization::Intervals { boundaries })
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Discretization of every variable of a [`VariableSet`], in its order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScheme {
    variables: Vec<VariableIntervals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VariableIntervals {
    name: String,
    #[serde(flatten)]
    discretization: Discretization,
}

impl IntervalScheme {
    /// Assembles a scheme from per-variable discretizations, checking them
    /// against the declared ranges.
    pub fn new(vars: &VariableSet, discretizations: Vec<Discretization>) -> Result<Self> {
        if discretizations.len() != vars.len() {
            return Err(Error::InvalidArgument("one discretization per variable required".into()));
        }
        for (spec, d) in vars.iter().zip(&discretizations) {
            let bad = |reason: &str| Error::InvalidVariable {
                name: spec.name.clone(),
                reason: reason.to_string(),
            };
            match (spec.kind, d) {
                (VarKind::Boolean, Discretization::Boolean) => {}
                (VarKind::Continuous { lower, upper }, Discretization::Intervals { boundaries }) => {
                    if boundaries.len() < 2 {
                        return Err(bad("needs at least one interval"));
                    }
                    if boundaries[0] != lower || *boundaries.last().unwrap() != upper {
                        return Err(bad("intervals must cover the declared range"));
                    }
                    if boundaries.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(bad("boundaries must be strictly increasing"));
                    }
                }
                _ => return Err(bad("discretization does not match variable kind")),
            }
        }
        Ok(Self {
            variables: vars
                .iter()
                .zip(discretizations)
                .map(|(v, d)| VariableIntervals {
                    name: v.name.clone(),
                    discretization: d,
                })
                .collect(),
        })
    }

    /// Quantile-discretizes every continuous variable of `data` with the
    /// given bin counts; variables missing from `bins` get one interval.
    pub fn fit(data: &Dataset, bins: &BTreeMap<String, usize>) -> Result<Self> {
        for name in bins.keys() {
            data.variables().index_of(name)?;
        }
        let discretizations = data
            .variables()
            .iter()
            .map(|v| {
                if v.is_continuous() {
                    quantile_discretize(data, &v.name, bins.get(&v.name).copied().unwrap_or(1))
                } else {
                    Ok(Discretization::Boolean)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(data.variables(), discretizations)
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn discretization(&self, index: usize) -> &Discretization {
        &self.variables[index].discretization
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.variables[index].discretization.cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.discretization.cardinality()).collect()
    }

    pub fn interval(&self, name: &str, state: usize) -> Result<Interval> {
        let idx = self.index_of(name)?;
        let d = &self.variables[idx].discretization;
        d.interval(state).ok_or_else(|| Error::InvalidState {
            name: name.to_string(),
            state,
            cardinality: d.cardinality(),
        })
    }

    /// Discrete state of one value of the variable at `index`.
    pub fn state_of(&self, index: usize, value: Value) -> Result<usize> {
        let v = &self.variables[index];
        match (&v.discretization, value) {
            (Discretization::Boolean, Value::Bool(b)) => Ok(b as usize),
            (d @ Discretization::Intervals { boundaries }, Value::Real(x)) => {
                d.locate(x).ok_or_else(|| Error::OutOfRange {
                    name: v.name.clone(),
                    value: x,
                    lower: boundaries[0],
                    upper: *boundaries.last().unwrap(),
                })
            }
            _ => Err(Error::TypeMismatch(v.name.clone())),
        }
    }

    /// Human-readable label of a state: an interval for continuous
    /// variables, `true`/`false` for booleans.
    pub fn state_label(&self, index: usize, state: usize) -> String {
        match self.variables[index].discretization.interval(state) {
            Some(iv) => iv.to_string(),
            None => (state == 1).to_string(),
        }
    }

    /// Discretizes every row of a dataset.
    pub fn discretize_dataset(&self, data: &Dataset) -> Result<DiscreteDataset> {
        let names: Vec<&str> = data.variables().names().collect();
        if names != self.names().collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(
                "dataset and interval scheme declare different variables".into(),
            ));
        }
        let mut columns = vec![Vec::with_capacity(data.len()); self.len()];
        for row in data.rows() {
            for (i, &value) in row.iter().enumerate() {
                columns[i].push(self.state_of(i, value)? as u8);
            }
        }
        Ok(DiscreteDataset {
            names: names.into_iter().map(String::from).collect(),
            cardinalities: self.cardinalities(),
            columns,
        })
    }
}

/// Maps every variable present in `sample` to its interval index (or
/// boolean state).
///
/// Values outside the declared range are an error; callers clamp or reject
/// upstream.
pub fn discretize_sample(sample: &Sample, scheme: &IntervalScheme) -> Result<IntervalAssignment> {
    let mut out = IntervalAssignment::default();
    for (name, &value) in sample {
        let idx = scheme.index_of(name)?;
        out.insert(name.clone(), scheme.state_of(idx, value)?);
    }
    Ok(out)
}

/// Like [`discretize_sample`] but also validates values against the
/// variable declarations first.
pub fn discretize_checked(sample: &Sample, vars: &VariableSet, scheme: &IntervalScheme) -> Result<IntervalAssignment> {
    for (name, &value) in sample {
        check_value(vars.by_name(name)?, value)?;
    }
    discretize_sample(sample, scheme)
}

/// A discrete state per variable: interval index, or 0/1 for booleans.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalAssignment(BTreeMap<String, usize>);

impl IntervalAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, state: usize) -> Option<usize> {
        self.0.insert(name.into(), state)
    }

    pub fn remove(&mut self, name: &str) -> Option<usize> {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Checks that every state is valid for `scheme`.
    pub fn validate(&self, scheme: &IntervalScheme) -> Result<()> {
        for (name, state) in self.iter() {
            let card = scheme.cardinality(scheme.index_of(name)?);
            if state >= card {
                return Err(Error::InvalidState {
                    name: name.to_string(),
                    state,
                    cardinality: card,
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, usize)> for IntervalAssignment {
    fn from_iter<I: IntoIterator<Item = (String, usize)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> FromIterator<(&'a str, usize)> for IntervalAssignment {
    fn from_iter<I: IntoIterator<Item = (&'a str, usize)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

/// Column-major table of discrete states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDataset {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    columns: Vec<Vec<u8>>,
}

impl DiscreteDataset {
    pub fn new(names: Vec<String>, cardinalities: Vec<usize>, columns: Vec<Vec<u8>>) -> Result<Self> {
        if names.len() != cardinalities.len() || names.len() != columns.len() {
            return Err(Error::InvalidArgument("column metadata length mismatch".into()));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (i, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidArgument("ragged columns".into()));
            }
            if cardinalities[i] == 0 || cardinalities[i] > u8::MAX as usize {
                return Err(Error::InvalidArgument(format!("bad cardinality for `{}`", names[i])));
            }
            if let Some(&s) = col.iter().find(|&&s| s as usize >= cardinalities[i]) {
                return Err(Error::InvalidState {
                    name: names[i].clone(),
                    state: s as usize,
                    cardinality: cardinalities[i],
                });
            }
        }
        Ok(Self {
            names,
            cardinalities,
            columns,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn column(&self, index: usize) -> &[u8] {
        &self.columns[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Same data with columns reordered by `order` (a permutation of indices).
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            cardinalities: order.iter().map(|&i| self.cardinalities[i]).collect(),
            columns: order.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }
}
