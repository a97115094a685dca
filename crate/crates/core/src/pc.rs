//! Order-independent ("stable") PC structure learning.
//!
//! 1. Skeleton: starting from the complete graph, for each level `l` every
//!    remaining edge `x -- y` is tested against all conditioning sets of size
//!    `l` drawn from the adjacency of `x` (then `y`) as it stood at the start
//!    of the level. Removals are applied once the level is finished, so the
//!    result does not depend on the order in which edges are visited.
//! 2. Colliders: `x -> z <- y` for every unshielded triple whose separating
//!    set does not contain `z`.
//! 3. Meek rules R1-R3 until nothing changes.
//! 4. Edges still undirected between a cause and an effect variable are
//!    oriented cause -> effect.
//!
//! With [`PcConfig::randomized_causes`] the cause variables are known to be
//! drawn independently of each other and of everything upstream: no edge is
//! allowed between two causes, and every cause-effect edge points out of the
//! cause before the orientation phase starts.
//!
//! Variables are processed in name order internally, so permuting the
//! columns of the input produces the same graph.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citest::{ci_test, DEFAULT_MAX_COND};
use crate::discretize::DiscreteDataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::variables::{Role, VariableSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcConfig {
    pub alpha: f64,
    pub max_cond: usize,
    /// Background knowledge that cause variables were independently
    /// randomized. Only used when roles are passed to [`pc_stable`].
    #[serde(default)]
    pub randomized_causes: bool,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond: DEFAULT_MAX_COND,
            randomized_causes: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcResult {
    /// Learned graph, nodes in the input column order.
    pub graph: Dag,
    /// Separating set of every removed edge, keyed by the name pair (sorted).
    pub sepsets: BTreeMap<(String, String), Vec<String>>,
    /// Undirected skeleton before orientation.
    pub skeleton: Dag,
    pub tests_run: usize,
    pub warnings: Vec<String>,
}

/// Runs PC-stable on discrete data. `roles`, when given, resolves edges the
/// orientation rules leave undirected.
pub fn pc_stable(data: &DiscreteDataset, roles: Option<&VariableSet>, config: &PcConfig) -> Result<PcResult> {
    let n = data.n_vars();
    if n < 2 {
        return Err(Error::InvalidArgument("structure learning needs at least two variables".into()));
    }
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }

    // Canonical (name-sorted) order makes every tie-break order independent.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.names()[a].cmp(&data.names()[b]));
    let data = data.permuted(&order);
    let names = data.names().to_vec();

    let role_of = |i: usize| roles.and_then(|vars| vars.by_name(&names[i]).map(|v| v.role).ok());
    let randomized = config.randomized_causes && roles.is_some();
    let mut start = Dag::complete(names.clone());
    let mut sepsets = SepSets::new();
    if randomized {
        for (a, b) in start.undirected_edges() {
            if role_of(a) == Some(Role::Cause) && role_of(b) == Some(Role::Cause) {
                start.remove_edge(a, b);
                sepsets.insert((a, b), Vec::new());
            }
        }
    }
    let (skeleton, tests_run) = learn_skeleton(&data, start, &mut sepsets, config)?;
    let mut graph = skeleton.clone();
    let mut warnings = Vec::new();

    if randomized {
        for (a, b) in graph.undirected_edges() {
            match (role_of(a), role_of(b)) {
                (Some(Role::Cause), Some(Role::Effect)) => graph.orient(a, b),
                (Some(Role::Effect), Some(Role::Cause)) => graph.orient(b, a),
                _ => {}
            }
        }
    }
    // Randomized causes have no parents, so they never sit at a collider.
    let root = |z: usize| randomized && role_of(z) == Some(Role::Cause);
    orient_colliders(&mut graph, &sepsets, root, &mut warnings);
    apply_meek_rules(&mut graph);

    if roles.is_some() {
        let mut changed = false;
        for (a, b) in graph.undirected_edges() {
            let (from, to) = match (role_of(a), role_of(b)) {
                (Some(Role::Cause), Some(Role::Effect)) => (a, b),
                (Some(Role::Effect), Some(Role::Cause)) => (b, a),
                _ => continue,
            };
            if !graph.has_directed_path(to, from) {
                graph.orient(from, to);
                changed = true;
            }
        }
        if changed {
            apply_meek_rules(&mut graph);
        }
    }
    for (a, b) in graph.undirected_edges() {
        warnings.push(format!(
            "edge {} -- {} could not be oriented; more samples or other discretization may help",
            names[a], names[b]
        ));
    }
    for w in &warnings {
        warn!("{w}");
    }

    let sepsets = sepsets
        .into_iter()
        .map(|((a, b), s)| {
            let key = (names[a].clone(), names[b].clone());
            (key, s.into_iter().map(|i| names[i].clone()).collect())
        })
        .collect();

    // Back to the caller's column order.
    let mut inverse = vec![0; n];
    for (canon, &orig) in order.iter().enumerate() {
        inverse[orig] = canon;
    }
    Ok(PcResult {
        graph: graph.permuted(&inverse),
        skeleton: skeleton.permuted(&inverse),
        sepsets,
        tests_run,
        warnings,
    })
}

type SepSets = BTreeMap<(usize, usize), Vec<usize>>;

fn learn_skeleton(
    data: &DiscreteDataset,
    mut graph: Dag,
    sepsets: &mut SepSets,
    config: &PcConfig,
) -> Result<(Dag, usize)> {
    let n = data.n_vars();
    let mut tests_run = 0;

    for level in 0..=config.max_cond {
        let snapshot: Vec<Vec<usize>> = (0..n).map(|a| graph.adjacent(a)).collect();
        if !snapshot.iter().any(|adj| adj.len() > level) {
            break;
        }
        let edges: Vec<(usize, usize)> = graph.undirected_edges();
        let outcomes = edges
            .par_iter()
            .map(|&(x, y)| -> Result<(Option<Vec<usize>>, usize)> {
                let mut tests = 0;
                for (a, b) in [(x, y), (y, x)] {
                    let candidates: Vec<usize> = snapshot[a].iter().copied().filter(|&c| c != b).collect();
                    if candidates.len() < level {
                        continue;
                    }
                    for subset in Combinations::new(candidates.len(), level) {
                        let cond: Vec<usize> = subset.iter().map(|&i| candidates[i]).collect();
                        tests += 1;
                        let r = ci_test(data, x, y, &cond, config.alpha, config.max_cond)?;
                        if r.independent {
                            return Ok((Some(cond), tests));
                        }
                    }
                }
                Ok((None, tests))
            })
            .collect::<Result<Vec<_>>>()?;
        for (&(x, y), (sep, tests)) in edges.iter().zip(outcomes) {
            tests_run += tests;
            if let Some(mut s) = sep {
                s.sort_unstable();
                graph.remove_edge(x, y);
                sepsets.insert((x, y), s);
            }
        }
    }
    Ok((graph, tests_run))
}

fn orient_colliders(graph: &mut Dag, sepsets: &SepSets, root: impl Fn(usize) -> bool, warnings: &mut Vec<String>) {
    let n = graph.len();
    for z in (0..n).filter(|&z| !root(z)) {
        let adj = graph.adjacent(z);
        for (i, &x) in adj.iter().enumerate() {
            for &y in &adj[i + 1..] {
                if graph.is_adjacent(x, y) {
                    continue;
                }
                let key = (x.min(y), x.max(y));
                let separated_by_z = sepsets.get(&key).is_some_and(|s| s.contains(&z));
                if separated_by_z {
                    continue;
                }
                // Only orient edges that are still undirected or already
                // point into z; conflicting colliders are skipped.
                let ok = |p: usize| graph.has_undirected(p, z) || graph.has_directed(p, z);
                if ok(x) && ok(y) && !graph.has_directed_path(z, x) && !graph.has_directed_path(z, y) {
                    graph.orient(x, z);
                    graph.orient(y, z);
                } else {
                    warnings.push(format!(
                        "conflicting collider {} -> {} <- {} skipped",
                        graph.name(x),
                        graph.name(z),
                        graph.name(y)
                    ));
                }
            }
        }
    }
}

/// Orients `a -> b` unless that would close a directed cycle.
fn try_orient(graph: &mut Dag, a: usize, b: usize) -> bool {
    if graph.has_undirected(a, b) && !graph.has_directed_path(b, a) {
        graph.orient(a, b);
        true
    } else {
        false
    }
}

/// Meek orientation rules R1-R3, applied to a fixed point.
pub fn apply_meek_rules(graph: &mut Dag) {
    let n = graph.len();
    loop {
        let mut changed = false;
        for (a, b) in graph.undirected_edges() {
            for (x, y) in [(a, b), (b, a)] {
                if !graph.has_undirected(x, y) {
                    continue;
                }
                // R1: p -> x -- y, p and y non-adjacent => x -> y.
                let r1 = (0..n).any(|p| graph.has_directed(p, x) && p != y && !graph.is_adjacent(p, y));
                // R2: x -> m -> y and x -- y => x -> y.
                let r2 = (0..n).any(|m| graph.has_directed(x, m) && graph.has_directed(m, y));
                // R3: x -- c -> y, x -- d -> y, c and d non-adjacent => x -> y.
                let r3 = {
                    let cs: Vec<usize> = (0..n)
                        .filter(|&c| graph.has_undirected(x, c) && graph.has_directed(c, y))
                        .collect();
                    cs.iter()
                        .enumerate()
                        .any(|(i, &c)| cs[i + 1..].iter().any(|&d| !graph.is_adjacent(c, d)))
                };
                if (r1 || r2 || r3) && try_orient(graph, x, y) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// Orients every remaining undirected edge without creating new colliders
/// or cycles (Dor-Tarsi consistent extension). Fails when no extension exists.
pub fn consistent_extension(graph: &Dag) -> Result<Dag> {
    let n = graph.len();
    let mut out = graph.clone();
    let mut work = graph.clone();
    let mut alive = vec![true; n];
    for _ in 0..n {
        let sink = (0..n).filter(|&x| alive[x]).find(|&x| {
            let no_children = (0..n).all(|c| !alive[c] || !work.has_directed(x, c));
            let undirected: Vec<usize> = (0..n).filter(|&y| alive[y] && work.has_undirected(x, y)).collect();
            let adjacent: Vec<usize> = (0..n).filter(|&y| alive[y] && work.is_adjacent(x, y)).collect();
            no_children
                && undirected
                    .iter()
                    .all(|&y| adjacent.iter().all(|&z| z == y || work.is_adjacent(y, z)))
        });
        let Some(x) = sink else {
            return Err(Error::Graph("graph admits no consistent DAG extension".into()));
        };
        for y in (0..n).filter(|&y| alive[y]) {
            if work.has_undirected(x, y) {
                out.orient(y, x);
            }
        }
        alive[x] = false;
        for y in 0..n {
            work.remove_edge(x, y);
        }
    }
    if !out.is_acyclic() {
        return Err(Error::Graph("extension produced a cycle".into()));
    }
    Ok(out)
}

/// Completed PDAG (essential graph) of a DAG: skeleton, unshielded
/// colliders, then the Meek closure.
pub fn cpdag_of(dag: &Dag) -> Dag {
    let n = dag.len();
    let mut g = Dag::empty(dag.names().to_vec());
    for a in 0..n {
        for b in a + 1..n {
            if dag.is_adjacent(a, b) {
                let _ = g.add_undirected(a, b);
            }
        }
    }
    for z in 0..n {
        let parents = dag.parents(z);
        for (i, &x) in parents.iter().enumerate() {
            for &y in &parents[i + 1..] {
                if !dag.is_adjacent(x, y) {
                    g.orient(x, z);
                    g.orient(y, z);
                }
            }
        }
    }
    apply_meek_rules(&mut g);
    g
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
