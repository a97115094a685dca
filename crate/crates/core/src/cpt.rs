//! Conditional probability tables fitted with a uniform Dirichlet prior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::DiscreteDataset;
use crate::error::{Error, Result};
use crate::graph::Dag;

/// Default equivalent sample size of the prior.
pub const DEFAULT_ISS: f64 = 1.0;

/// `P(child | parents)` as a dense table, one row per parent configuration.
///
/// Parent configurations are indexed in mixed radix with the last parent
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn child_cardinality(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Row index of a parent configuration given parent cardinalities.
    pub fn row_index(parent_states: &[usize], parent_cards: &[usize]) -> usize {
        parent_states
            .iter()
            .zip(parent_cards)
            .fold(0, |acc, (&s, &c)| acc * c + s)
    }

    /// Checks shape, positivity and row-stochasticity.
    pub fn validate(&self, child_card: usize, parent_cards: &[usize]) -> Result<()> {
        let q: usize = parent_cards.iter().product();
        let bad = |why: String| Error::InvalidArgument(format!("CPT of `{}`: {why}", self.child));
        if self.rows.len() != q {
            return Err(bad(format!("{} rows, expected {q}", self.rows.len())));
        }
        for row in &self.rows {
            if row.len() != child_card {
                return Err(bad(format!("row of width {}, expected {child_card}", row.len())));
            }
            if row.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(bad("entries must lie in (0, 1]".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(bad(format!("row sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Posterior-mean CPT of one node:
/// `p(k | j) = (n_jk + iss / (r q)) / (n_j + iss / q)`.
///
/// Unobserved parent configurations get the uniform prior row.
pub fn fit_node(data: &DiscreteDataset, child: usize, parents: &[usize], iss: f64) -> Result<Cpt> {
    if !(iss > 0.0 && iss.is_finite()) {
        return Err(Error::InvalidArgument(format!("equivalent sample size {iss} must be positive")));
    }
    let cards = data.cardinalities();
    let r = cards[child];
    let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
    let q: usize = parent_cards.iter().product();
    let mut counts = vec![0u32; q * r];
    let child_col = data.column(child);
    let parent_cols: Vec<&[u8]> = parents.iter().map(|&p| data.column(p)).collect();
    for row in 0..data.n_rows() {
        let mut j = 0usize;
        for (k, col) in parent_cols.iter().enumerate() {
            j = j * parent_cards[k] + col[row] as usize;
        }
        counts[j * r + child_col[row] as usize] += 1;
    }
    let alpha_jk = iss / (r as f64 * q as f64);
    let alpha_j = iss / q as f64;
    let rows = counts
        .chunks_exact(r)
        .map(|c| {
            let n_j: u32 = c.iter().sum();
            let denom = n_j as f64 + alpha_j;
            c.iter().map(|&n| (n as f64 + alpha_jk) / denom).collect()
        })
        .collect();
    Ok(Cpt {
        child: data.names()[child].clone(),
        parents: parents.iter().map(|&p| data.names()[p].clone()).collect(),
        rows,
    })
}

/// Fits one CPT per node of a fully directed graph; nodes are fitted in
/// parallel and returned in graph order.
pub fn fit_cpts(data: &DiscreteDataset, dag: &Dag, iss: f64) -> Result<Vec<Cpt>> {
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if !dag.is_fully_directed() {
        return Err(Error::Graph("parameter learning needs a fully directed graph".into()));
    }
    let cols = dag
        .names()
        .iter()
        .map(|n| data.index_of(n))
        .collect::<Result<Vec<_>>>()?;
    (0..dag.len())
        .into_par_iter()
        .map(|node| {
            let parents: Vec<usize> = dag.parents(node).into_iter().map(|p| cols[p]).collect();
            fit_node(data, cols[node], &parents, iss)
        })
        .collect()
}
