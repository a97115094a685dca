//! Random-variable vocabulary: names, cause/effect roles and value domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a variable is set by the experimenter or measured as an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Cause,
    Effect,
}

/// Value domain of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VarKind {
    /// Real-valued variable limited to `[lower, upper]` (meters for the stacking task).
    Continuous { lower: f64, upper: f64 },
    /// Two-state variable; state 0 is `false`, state 1 is `true`.
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: Role,
    pub kind: VarKind,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, role: Role, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            role,
            kind: VarKind::Continuous { lower, upper },
        }
    }

    pub fn boolean(name: impl Into<String>, role: Role) -> Self {
        Self {
            name: name.into(),
            role,
            kind: VarKind::Boolean,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, VarKind::Continuous { .. })
    }

    /// `(lower, upper)` for continuous variables.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self.kind {
            VarKind::Continuous { lower, upper } => Some((lower, upper)),
            VarKind::Boolean => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidVariable {
                name: self.name.clone(),
                reason: "empty name".into(),
            });
        }
        if let VarKind::Continuous { lower, upper } = self.kind {
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(Error::InvalidVariable {
                    name: self.name.clone(),
                    reason: format!("range [{lower}, {upper}] is empty or not finite"),
                });
            }
        }
        Ok(())
    }
}

/// Ordered collection of uniquely named variables.
///
/// The declaration order is significant: it fixes column order in datasets,
/// the node order of learned graphs, and the expansion order of the
/// contrastive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VariableSpec>", into = "Vec<VariableSpec>")]
pub struct VariableSet {
    vars: Vec<VariableSpec>,
}

impl VariableSet {
    pub fn new(vars: Vec<VariableSpec>) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            v.validate()?;
            if vars[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
        }
        Ok(Self { vars })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VariableSpec> {
        self.vars.iter()
    }

    pub fn get(&self, index: usize) -> &VariableSpec {
        &self.vars[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Result<&VariableSpec> {
        self.index_of(name).map(|i| &self.vars[i])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }

    /// Indices of the cause variables, in declaration order.
    pub fn causes(&self) -> Vec<usize> {
        self.indices_with_role(Role::Cause)
    }

    pub fn effects(&self) -> Vec<usize> {
        self.indices_with_role(Role::Effect)
    }

    fn indices_with_role(&self, role: Role) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-set containing only the named variables, in the given order.
    pub fn subset(&self, names: &[&str]) -> Result<Self> {
        let vars = names
            .iter()
            .map(|n| self.by_name(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Self::new(vars)
    }
}

impl TryFrom<Vec<VariableSpec>> for VariableSet {
    type Error = Error;

    fn try_from(vars: Vec<VariableSpec>) -> Result<Self> {
        Self::new(vars)
    }
}

impl From<VariableSet> for Vec<VariableSpec> {
    fn from(set: VariableSet) -> Self {
        set.vars
    }
}

impl<'a> IntoIterator for &'a VariableSet {
    type Item = &'a VariableSpec;
    type IntoIter = std::slice::Iter<'a, VariableSpec>;

    fn into_iter(self) -> Self::IntoIter {
        self.vars.iter()
    }
}
