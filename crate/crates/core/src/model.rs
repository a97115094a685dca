//! The learned causal Bayesian network and the end-to-end learning pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cpt::{fit_cpts, Cpt, DEFAULT_ISS};
use crate::data::Dataset;
use crate::discretize::{IntervalAssignment, IntervalScheme};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::pc::{consistent_extension, pc_stable, PcConfig};
use crate::variables::VariableSet;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub samples: usize,
    pub seed: Option<u64>,
    pub generator: String,
    pub alpha: f64,
    pub max_cond: usize,
    pub iss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Settings for [`CausalModel::learn`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Interval count per continuous variable; unlisted variables get one.
    pub bins: BTreeMap<String, usize>,
    #[serde(default)]
    pub pc: PcConfig,
    #[serde(default = "default_iss")]
    pub iss: f64,
}

fn default_iss() -> f64 {
    DEFAULT_ISS
}

/// DAG plus one CPT per node over a discretized [`VariableSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct CausalModel {
    vars: VariableSet,
    scheme: IntervalScheme,
    dag: Dag,
    cpts: Vec<Cpt>,
    metadata: ModelMetadata,
    // Derived, index-based views used by inference.
    cards: Vec<usize>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
    topo: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    variables: VariableSet,
    intervals: IntervalScheme,
    edges: Vec<(String, String)>,
    cpts: Vec<Cpt>,
    metadata: ModelMetadata,
}

impl TryFrom<RawModel> for CausalModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let names: Vec<String> = raw.variables.names().map(String::from).collect();
        let edges: Vec<(&str, &str)> = raw.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let dag = Dag::from_edges(names, &edges)?;
        CausalModel::from_parts(raw.variables, raw.intervals, dag, raw.cpts, raw.metadata)
    }
}

impl From<CausalModel> for RawModel {
    fn from(m: CausalModel) -> Self {
        let edges = m
            .dag
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (m.dag.name(a).to_string(), m.dag.name(b).to_string()))
            .collect();
        RawModel {
            variables: m.vars,
            intervals: m.scheme,
            edges,
            cpts: m.cpts,
            metadata: m.metadata,
        }
    }
}

impl CausalModel {
    /// Assembles and validates a model. `cpts` may be in any order; they are
    /// stored in variable order.
    pub fn from_parts(
        vars: VariableSet,
        scheme: IntervalScheme,
        dag: Dag,
        cpts: Vec<Cpt>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let names: Vec<String> = vars.names().map(String::from).collect();
        if scheme.names().collect::<Vec<_>>() != vars.names().collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("interval scheme does not match variables".into()));
        }
        let dag = dag.reordered(&names)?;
        if !dag.is_fully_directed() || !dag.is_acyclic() {
            return Err(Error::Graph("model graph must be a fully directed acyclic graph".into()));
        }
        let cards = scheme.cardinalities();
        let mut by_child: BTreeMap<String, Cpt> = BTreeMap::new();
        for cpt in cpts {
            if by_child.insert(cpt.child.clone(), cpt).is_some() {
                return Err(Error::InvalidArgument("duplicate CPT".into()));
            }
        }
        let mut ordered = Vec::with_capacity(names.len());
        let mut parents = Vec::with_capacity(names.len());
        let mut tables = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let cpt = by_child
                .remove(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing CPT for `{name}`")))?;
            let pa = dag.parents(i);
            let pa_names: Vec<String> = pa.iter().map(|&p| names[p].clone()).collect();
            if cpt.parents != pa_names {
                return Err(Error::InvalidArgument(format!(
                    "CPT parents of `{name}` disagree with the graph"
                )));
            }
            let pa_cards: Vec<usize> = pa.iter().map(|&p| cards[p]).collect();
            cpt.validate(cards[i], &pa_cards)?;
            tables.push(cpt.rows.iter().flatten().copied().collect());
            parents.push(pa);
            ordered.push(cpt);
        }
        if let Some(extra) = by_child.keys().next() {
            return Err(Error::UnknownVariable(extra.clone()));
        }
        let topo = dag.topological_order().expect("checked acyclic");
        Ok(Self {
            vars,
            scheme,
            dag,
            cpts: ordered,
            metadata,
            cards,
            parents,
            tables,
            topo,
        })
    }

    /// Full pipeline: quantile discretization, PC-stable, and CPT fitting.
    ///
    /// Edges left undirected by structure learning are oriented by a
    /// consistent extension and reported in the metadata warnings.
    pub fn learn(data: &Dataset, config: &LearnConfig) -> Result<Self> {
        let scheme = IntervalScheme::fit(data, &config.bins)?;
        let discrete = scheme.discretize_dataset(data)?;
        let pc = pc_stable(&discrete, Some(data.variables()), &config.pc)?;
        let mut warnings = pc.warnings.clone();
        let dag = if pc.graph.is_fully_directed() {
            pc.graph
        } else {
            warnings.push("remaining undirected edges oriented by consistent extension".into());
            consistent_extension(&pc.graph)?
        };
        let cpts = fit_cpts(&discrete, &dag, config.iss)?;
        let metadata = ModelMetadata {
            samples: data.len(),
            seed: data.provenance.seed,
            generator: data.provenance.generator.clone(),
            alpha: config.pc.alpha,
            max_cond: config.pc.max_cond,
            iss: config.iss,
            warnings,
        };
        Self::from_parts(data.variables().clone(), scheme, dag, cpts, metadata)
    }

    pub fn variables(&self) -> &VariableSet {
        &self.vars
    }

    pub fn scheme(&self) -> &IntervalScheme {
        &self.scheme
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn parents_of(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars.index_of(name)
    }

    /// Directed edges as `(from, to)` names.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.dag
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (self.dag.name(a).to_string(), self.dag.name(b).to_string()))
            .collect()
    }

    /// Row of `P(node | parents)` for a full state vector.
    #[inline]
    pub fn cpt_row(&self, node: usize, states: &[usize]) -> &[f64] {
        let r = self.cards[node];
        let j = self.parents[node]
            .iter()
            .fold(0, |acc, &p| acc * self.cards[p] + states[p]);
        &self.tables[node][j * r..(j + 1) * r]
    }

    /// `P(node = states[node] | parents)` for a full state vector.
    #[inline]
    pub fn local_probability(&self, node: usize, states: &[usize]) -> f64 {
        self.cpt_row(node, states)[states[node]]
    }

    /// Converts a by-name assignment into an index-aligned partial state vector.
    pub fn to_partial(&self, assignment: &IntervalAssignment) -> Result<Vec<Option<usize>>> {
        assignment.validate(&self.scheme)?;
        let mut out = vec![None; self.len()];
        for (name, state) in assignment.iter() {
            out[self.index_of(name)?] = Some(state);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
