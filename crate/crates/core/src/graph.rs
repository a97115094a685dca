//! Partially directed graphs over named variables.
//!
//! Edges are stored in an adjacency matrix using the usual PDAG encoding:
//! `a -> b` is `m[a][b] && !m[b][a]`, `a -- b` is `m[a][b] && m[b][a]`.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    adj: Vec<Vec<bool>>,
}

/// Serialized form: node list plus directed and undirected edge lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeList {
    pub nodes: Vec<String>,
    pub directed: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undirected: Vec<(String, String)>,
}

impl Dag {
    /// Graph with the given nodes and no edges.
    pub fn empty(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            adj: vec![vec![false; n]; n],
        }
    }

    /// Complete undirected graph, the starting point of skeleton search.
    pub fn complete(names: Vec<String>) -> Self {
        let n = names.len();
        let mut adj = vec![vec![true; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            row[i] = false;
        }
        Self { names, adj }
    }

    /// Directed graph from `(from, to)` name pairs; rejects cycles and unknown names.
    pub fn from_edges(names: Vec<String>, edges: &[(&str, &str)]) -> Result<Self> {
        let mut g = Self::empty(names);
        for &(a, b) in edges {
            let (a, b) = (g.index_of(a)?, g.index_of(b)?);
            g.add_directed(a, b)?;
        }
        if !g.is_acyclic() {
            return Err(Error::Graph("edge list contains a directed cycle".into()));
        }
        Ok(g)
    }

    pub fn from_edge_list(list: &EdgeList) -> Result<Self> {
        let mut g = Self::empty(list.nodes.clone());
        for (a, b) in &list.directed {
            let (a, b) = (g.index_of(a)?, g.index_of(b)?);
            g.add_directed(a, b)?;
        }
        for (a, b) in &list.undirected {
            let (a, b) = (g.index_of(a)?, g.index_of(b)?);
            g.add_undirected(a, b)?;
        }
        if !g.is_acyclic() {
            return Err(Error::Graph("edge list contains a directed cycle".into()));
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> EdgeList {
        let name = |i: usize| self.names[i].clone();
        EdgeList {
            nodes: self.names.clone(),
            directed: self.directed_edges().into_iter().map(|(a, b)| (name(a), name(b))).collect(),
            undirected: self.undirected_edges().into_iter().map(|(a, b)| (name(a), name(b))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::Graph(format!("self-loop on `{}`", self.names[a])));
        }
        if self.is_adjacent(a, b) {
            return Err(Error::Graph(format!(
                "duplicate edge between `{}` and `{}`",
                self.names[a], self.names[b]
            )));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        self.adj[a][b] = true;
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        self.adj[a][b] = true;
        self.adj[b][a] = true;
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.adj[a][b] = false;
        self.adj[b][a] = false;
    }

    /// Turns an existing edge between `a` and `b` into `a -> b`.
    pub(crate) fn orient(&mut self, a: usize, b: usize) {
        debug_assert!(self.is_adjacent(a, b));
        self.adj[a][b] = true;
        self.adj[b][a] = false;
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] || self.adj[b][a]
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && !self.adj[b][a]
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && self.adj[b][a]
    }

    pub fn adjacent(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&b| self.is_adjacent(a, b)).collect()
    }

    pub fn parents(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.has_directed(p, a)).collect()
    }

    pub fn children(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.has_directed(a, c)).collect()
    }

    pub fn undirected_neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&b| self.has_undirected(a, b)).collect()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.has_directed(a, b))
            .collect()
    }

    /// Undirected edges as `(a, b)` with `a < b`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.has_undirected(a, b))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.directed_edges().len() + self.undirected_edges().len()
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected_edges().is_empty()
    }

    /// Whether a directed path `from -> ... -> to` exists.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(a) = queue.pop_front() {
            if a == to {
                return true;
            }
            for c in self.children(a) {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    /// Acyclicity of the directed part.
    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Kahn ordering of the directed part (undirected edges ignored); ties
    /// broken by node index.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = (0..n).map(|a| self.parents(a).len()).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&a| indegree[a] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(a) = ready.pop_first() {
            order.push(a);
            for c in self.children(a) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Structural Hamming distance: number of node pairs whose edge mark
    /// (absent, `->`, `<-`, `--`) differs.
    pub fn shd(&self, other: &Dag) -> Result<usize> {
        if self.names != other.names {
            return Err(Error::Graph("graphs have different node sets".into()));
        }
        let n = self.len();
        let mut d = 0;
        for a in 0..n {
            for b in a + 1..n {
                if (self.adj[a][b], self.adj[b][a]) != (other.adj[a][b], other.adj[b][a]) {
                    d += 1;
                }
            }
        }
        Ok(d)
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph causal_model {\n");
        for name in &self.names {
            let _ = writeln!(s, "  \"{name}\";");
        }
        for (a, b) in self.directed_edges() {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", self.names[a], self.names[b]);
        }
        for (a, b) in self.undirected_edges() {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [dir=none];", self.names[a], self.names[b]);
        }
        s.push_str("}\n");
        s
    }

    /// Same graph with nodes listed in `order` (a permutation of indices).
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            adj: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.adj[i][j]).collect())
                .collect(),
        }
    }

    /// Same graph with nodes reordered to match `names`.
    pub fn reordered(&self, names: &[String]) -> Result<Self> {
        let order = names.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        if order.len() != self.len() {
            return Err(Error::Graph("node sets differ".into()));
        }
        Ok(self.permuted(&order))
    }
}
