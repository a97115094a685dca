#![allow(dead_code)]

use causal_prevent::cpt::Cpt;
use causal_prevent::discretize::{Discretization, IntervalAssignment, IntervalScheme};
use causal_prevent::error::Error;
use causal_prevent::goal::GoalSpec;
use causal_prevent::graph::Dag;
use causal_prevent::inference::{predict_success, InferenceConfig};
use causal_prevent::model::{CausalModel, ModelMetadata};
use causal_prevent::search::{closest_success, SearchOptions};
use causal_prevent::variables::{Role, VariableSet, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Variables `c0..` are continuous causes on [0, 1] with evenly spaced
/// intervals; `e0..` are boolean effects.
pub fn variables(cause_cards: &[usize], effects: usize) -> (VariableSet, IntervalScheme) {
    let mut specs = Vec::new();
    let mut discs = Vec::new();
    for (i, &c) in cause_cards.iter().enumerate() {
        specs.push(VariableSpec::continuous(format!("c{i}"), Role::Cause, 0.0, 1.0));
        discs.push(Discretization::Intervals {
            boundaries: (0..=c).map(|k| k as f64 / c as f64).collect(),
        });
    }
    for j in 0..effects {
        specs.push(VariableSpec::boolean(format!("e{j}"), Role::Effect));
        discs.push(Discretization::Boolean);
    }
    let vars = VariableSet::new(specs).unwrap();
    let scheme = IntervalScheme::new(&vars, discs).unwrap();
    (vars, scheme)
}

/// Random CPT rows for `dag` with every entry at least `floor`.
pub fn random_cpts<R: Rng>(rng: &mut R, dag: &Dag, cards: &[usize], floor: f64) -> Vec<Cpt> {
    (0..dag.len())
        .map(|i| {
            let parents = dag.parents(i);
            let rows_n: usize = parents.iter().map(|&p| cards[p]).product();
            let rows = (0..rows_n)
                .map(|_| {
                    let w: Vec<f64> = (0..cards[i]).map(|_| floor + rng.random::<f64>()).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / s).collect()
                })
                .collect();
            Cpt {
                child: dag.name(i).to_string(),
                parents: parents.iter().map(|&p| dag.name(p).to_string()).collect(),
                rows,
            }
        })
        .collect()
}

/// Random model over the declared variables; edges only go from lower to
/// higher declaration index, each present with probability `density`.
/// Causes never receive parents.
pub fn random_model<R: Rng>(rng: &mut R, cause_cards: &[usize], effects: usize, density: f64) -> CausalModel {
    let (vars, scheme) = variables(cause_cards, effects);
    let names: Vec<String> = vars.names().map(String::from).collect();
    let n = names.len();
    let causes = cause_cards.len();
    let mut dag = Dag::empty(names);
    for b in causes..n {
        for a in 0..b {
            if rng.random::<f64>() < density {
                dag.add_directed(a, b).unwrap();
            }
        }
    }
    let cpts = random_cpts(rng, &dag, &scheme.cardinalities(), 0.05);
    CausalModel::from_parts(vars, scheme, dag, cpts, ModelMetadata::default()).unwrap()
}

/// Random model whose nodes are all boolean or small categorical causes
/// with arbitrary forward edges, for inference checks.
pub fn random_general_model<R: Rng>(rng: &mut R, nodes: usize, density: f64) -> CausalModel {
    let cards: Vec<usize> = (0..nodes).map(|_| rng.random_range(2..=3)).collect();
    let (vars, scheme) = variables(&cards, 0);
    let names: Vec<String> = vars.names().map(String::from).collect();
    let mut dag = Dag::empty(names);
    for b in 0..nodes {
        for a in 0..b {
            if rng.random::<f64>() < density {
                dag.add_directed(a, b).unwrap();
            }
        }
    }
    let cpts = random_cpts(rng, &dag, &cards, 0.05);
    CausalModel::from_parts(vars, scheme, dag, cpts, ModelMetadata::default()).unwrap()
}

/// Joint probability of one complete state, straight from the CPT tables.
pub fn joint(model: &CausalModel, states: &[usize]) -> f64 {
    let names: Vec<&str> = model.variables().names().collect();
    let cards = model.cardinalities();
    model
        .cpts()
        .iter()
        .map(|cpt| {
            let child = names.iter().position(|n| *n == cpt.child).unwrap();
            let pa: Vec<usize> = cpt
                .parents
                .iter()
                .map(|p| names.iter().position(|n| n == p).unwrap())
                .collect();
            let mut row = 0;
            for &p in &pa {
                row = row * cards[p] + states[p];
            }
            cpt.rows[row][states[child]]
        })
        .product()
}

/// Every complete state of the model, first variable most significant.
pub fn all_states(cards: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut code| {
            let mut s = vec![0; cards.len()];
            for k in (0..cards.len()).rev() {
                s[k] = code % cards[k];
                code /= cards[k];
            }
            s
        })
        .collect()
}

/// `P(target | evidence)` by summing the full joint table.
pub fn brute_force(model: &CausalModel, target: &IntervalAssignment, evidence: &IntervalAssignment) -> f64 {
    let names: Vec<&str> = model.variables().names().collect();
    let matches = |s: &[usize], a: &IntervalAssignment| a.iter().all(|(n, v)| s[names.iter().position(|x| *x == n).unwrap()] == v);
    let (mut num, mut den) = (0.0, 0.0);
    for s in all_states(model.cardinalities()) {
        if matches(&s, evidence) {
            let p = joint(model, &s);
            den += p;
            if matches(&s, target) {
                num += p;
            }
        }
    }
    num / den
}

pub fn assign(pairs: &[(&str, usize)]) -> IntervalAssignment {
    pairs.iter().copied().collect()
}

/// Like [`random_general_model`], but every row puts 0.8 on a dominant
/// state that grows with the normalized sum of the parent states. Effects
/// are monotone, so every edge carries a clear dependence.
pub fn monotone_model<R: Rng>(rng: &mut R, nodes: usize, density: f64) -> CausalModel {
    let base = random_general_model(rng, nodes, density);
    let cards = base.cardinalities().to_vec();
    let cpts = (0..base.len())
        .map(|i| {
            let parents = base.parents_of(i).to_vec();
            let r = cards[i];
            let rows_n: usize = parents.iter().map(|&p| cards[p]).product();
            let root_state = rng.random_range(0..r);
            let rows = (0..rows_n)
                .map(|j| {
                    let (mut rest, mut frac) = (j, 0.0);
                    for &p in parents.iter().rev() {
                        frac += (rest % cards[p]) as f64 / (cards[p] - 1) as f64;
                        rest /= cards[p];
                    }
                    let k = if parents.is_empty() {
                        root_state
                    } else {
                        ((frac / parents.len() as f64) * r as f64).floor().min(r as f64 - 1.0) as usize
                    };
                    (0..r).map(|s| if s == k { 0.8 } else { 0.2 / (r - 1) as f64 }).collect()
                })
                .collect();
            Cpt {
                child: base.dag().name(i).to_string(),
                parents: parents.iter().map(|&p| base.dag().name(p).to_string()).collect(),
                rows,
            }
        })
        .collect();
    CausalModel::from_parts(
        base.variables().clone(),
        base.scheme().clone(),
        base.dag().clone(),
        cpts,
        ModelMetadata::default(),
    )
    .unwrap()
}

/// `P(e0 = 1 | causes)` for every cause assignment, summed from the joint
/// table. Keys use the first cause as the most significant digit.
pub fn success_table(model: &CausalModel, causes: usize) -> Vec<f64> {
    let cards = model.cardinalities();
    let size: usize = cards[..causes].iter().product();
    let (mut num, mut den) = (vec![0.0; size], vec![0.0; size]);
    for s in all_states(cards) {
        let code = s[..causes].iter().zip(cards).fold(0, |acc, (&v, &c)| acc * c + v);
        let p = joint(model, &s);
        den[code] += p;
        if s[causes] == 1 {
            num[code] += p;
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

pub fn decode(mut code: usize, cards: &[usize]) -> Vec<usize> {
    let mut s = vec![0; cards.len()];
    for k in (0..cards.len()).rev() {
        s[k] = code % cards[k];
        code /= cards[k];
    }
    s
}

/// Runs `trials` random searches against the exhaustive lattice oracle and
/// returns every disagreement. Also checks soundness against the joint
/// table and the frame condition.
pub fn minimality_violations(seed: u64, trials: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut violations = Vec::new();
    while checked < trials {
        let causes = rng.random_range(1..=4);
        let cards: Vec<usize> = (0..causes).map(|_| rng.random_range(2..=5)).collect();
        let model = random_model(&mut rng, &cards, 2, 0.7);
        let table = success_table(&model, causes);

        // Threshold halfway between two distinct values, so no node sits on it.
        let mut sorted = table.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        if sorted.len() < 2 {
            continue;
        }
        let k = rng.random_range(0..sorted.len() - 1);
        let eps = (sorted[k] + sorted[k + 1]) / 2.0;
        let failing: Vec<usize> = (0..table.len()).filter(|&i| table[i] < eps).collect();
        let start = decode(failing[rng.random_range(0..failing.len())], &cards);

        // Half the trials restrict the search to a random subset of causes.
        let movable: Vec<usize> = if rng.random_bool(0.5) {
            let m: Vec<usize> = (0..causes).filter(|_| rng.random_bool(0.6)).collect();
            if m.is_empty() { vec![0] } else { m }
        } else {
            (0..causes).collect()
        };
        let names: Vec<String> = (0..causes).map(|i| format!("c{i}")).collect();
        let failure: IntervalAssignment = names.iter().cloned().zip(start.iter().copied()).collect();
        let goal = GoalSpec::single_flag("e0", eps).unwrap();
        let options = SearchOptions {
            transitionable: Some(movable.iter().map(|&i| names[i].clone()).collect()),
            ..Default::default()
        };

        let oracle = (0..table.len())
            .filter(|&i| table[i] > eps)
            .map(|i| decode(i, &cards))
            .filter(|a| (0..causes).all(|v| movable.contains(&v) || a[v] == start[v]))
            .map(|a| a.iter().zip(&start).map(|(x, y)| x.abs_diff(*y)).sum::<usize>())
            .min();
        let result = closest_success(&failure, &model, &goal, &options);
        checked += 1;
        match (oracle, result) {
            (None, Err(Error::NoReachableSuccess { .. })) => {}
            (Some(d), Ok(r)) => {
                let mut check = |ok: bool, what: &str| {
                    if !ok {
                        violations.push(format!("trial {checked}: {what}"));
                    }
                };
                check(r.depth == d, &format!("depth {} vs oracle {d}", r.depth));
                let sol: Vec<usize> = names.iter().map(|n| r.solution.get(n).unwrap()).collect();
                let dist: usize = sol.iter().zip(&start).map(|(x, y)| x.abs_diff(*y)).sum();
                check(dist == r.depth, "solution distance differs from depth");
                // Soundness against the joint table and the inference module.
                let code = sol.iter().zip(&cards).fold(0, |acc, (&v, &c)| acc * c + v);
                check(table[code] > eps, "solution below threshold");
                check((r.probability - table[code]).abs() < 1e-9, "probability differs from the joint table");
                let again = predict_success(&model, &r.solution, &goal, &InferenceConfig::default()).unwrap();
                check(again.probability == r.probability, "probability differs from inference");
                // Frame condition and the change list.
                for (v, name) in names.iter().enumerate() {
                    let changed = r.changes.iter().find(|c| &c.variable == name);
                    match changed {
                        Some(c) => check((c.from, c.to) == (start[v], sol[v]), "change list mismatch"),
                        None => check(sol[v] == start[v], "unlisted variable moved"),
                    }
                    check(movable.contains(&v) || changed.is_none(), "frozen variable moved");
                }
                check(r.changes.len() <= r.depth, "more changes than steps");
                check(r.evaluated < table.len(), "evaluated more nodes than the lattice holds");
            }
            (o, r) => violations.push(format!("oracle {o:?} vs {r:?}")),
        }
    }
    violations
}
