//! Complete-data samples, datasets and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variables::{VarKind, VariableSet, VariableSpec};

/// A single observed value: meters for offsets, a flag for outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Real(f64),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            Value::Real(_) => None,
        }
    }
}

/// One parametrization of (some of) the variables, keyed by name.
pub type Sample = BTreeMap<String, Value>;

/// Checks a single value against its declaration.
pub(crate) fn check_value(spec: &VariableSpec, value: Value) -> Result<()> {
    match (spec.kind, value) {
        (VarKind::Boolean, Value::Bool(_)) => Ok(()),
        (VarKind::Continuous { lower, upper }, Value::Real(v)) => {
            if v.is_nan() || v < lower || v > upper {
                Err(Error::OutOfRange {
                    name: spec.name.clone(),
                    value: v,
                    lower,
                    upper,
                })
            } else {
                Ok(())
            }
        }
        _ => Err(Error::TypeMismatch(spec.name.clone())),
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: String,
    pub samples: usize,
}

/// Row-major table of complete samples over a fixed [`VariableSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vars: VariableSet,
    rows: Vec<Vec<Value>>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Builds a dataset, checking every row for completeness, type and range.
    pub fn new(vars: VariableSet, rows: Vec<Vec<Value>>, mut provenance: Provenance) -> Result<Self> {
        for row in &rows {
            if row.len() != vars.len() {
                return Err(Error::InvalidArgument(format!(
                    "row has {} values for {} variables",
                    row.len(),
                    vars.len()
                )));
            }
            for (spec, &value) in vars.iter().zip(row) {
                check_value(spec, value)?;
            }
        }
        provenance.samples = rows.len();
        Ok(Self {
            vars,
            rows,
            provenance,
        })
    }

    pub fn from_samples(vars: VariableSet, samples: &[Sample], provenance: Provenance) -> Result<Self> {
        let rows = samples
            .iter()
            .map(|s| {
                vars.iter()
                    .map(|v| s.get(&v.name).copied().ok_or_else(|| Error::MissingValue(v.name.clone())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vars, rows, provenance)
    }

    pub fn variables(&self) -> &VariableSet {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn sample(&self, index: usize) -> Sample {
        self.vars
            .iter()
            .zip(&self.rows[index])
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }

    /// Real-valued column of a continuous variable.
    pub fn real_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.vars.index_of(name)?;
        self.rows
            .iter()
            .map(|r| r[idx].as_real().ok_or_else(|| Error::TypeMismatch(name.to_string())))
            .collect()
    }

    /// First `n` rows projected onto the named variables, renamed pairwise
    /// to `renamed` when given.
    pub fn project(&self, names: &[&str], renamed: Option<VariableSet>, n: usize) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.vars.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        let vars = match renamed {
            Some(v) => v,
            None => self.vars.subset(names)?,
        };
        if vars.len() != idx.len() {
            return Err(Error::InvalidArgument("projection arity mismatch".into()));
        }
        let rows = self
            .rows
            .iter()
            .take(n)
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect();
        let provenance = Provenance {
            generator: format!("{} (projection)", self.provenance.generator),
            ..self.provenance.clone()
        };
        Self::new(vars, rows, provenance)
    }

    /// Writes the header row of names and one line per sample. Booleans are
    /// written as 0/1, reals with nine decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.vars.names())?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match *v {
                Value::Bool(b) => if b { "1" } else { "0" }.to_string(),
                Value::Real(x) => format!("{x:.9}"),
            }))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV whose header names every variable of `vars` (in any order).
    pub fn read_csv<R: Read>(vars: VariableSet, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let columns = vars
            .iter()
            .map(|v| {
                header
                    .iter()
                    .position(|h| h.trim() == v.name)
                    .ok_or_else(|| Error::MissingValue(v.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let row = vars
                .iter()
                .zip(&columns)
                .map(|(v, &c)| parse_cell(v, record.get(c).unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(
            vars,
            rows,
            Provenance {
                generator: "csv".into(),
                ..Default::default()
            },
        )
    }
}

fn parse_cell(spec: &VariableSpec, cell: &str) -> Result<Value> {
    let cell = cell.trim();
    match spec.kind {
        VarKind::Boolean => match cell {
            "1" | "true" | "True" => Ok(Value::Bool(true)),
            "0" | "false" | "False" => Ok(Value::Bool(false)),
            _ => Err(Error::TypeMismatch(spec.name.clone())),
        },
        VarKind::Continuous { .. } => cell
            .parse::<f64>()
            .map(Value::Real)
            .map_err(|_| Error::TypeMismatch(spec.name.clone())),
    }
}
