//! Test-side oracles, written without the engine's composition or
//! inference code.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ugfbn::bayesnet::Cpt;
use ugfbn::model::{ComponentModel, HierarchicalSystem, ParentRef, Relation, StructureTree};
use ugfbn::StructureFunction;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Sorted (value, probability) pairs with keys within 1e-9 merged.
pub fn merge(mut pairs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (g, p) in pairs {
        match out.last_mut() {
            Some(last) if g - last.0 <= 1e-9 => last.1 += p,
            _ => out.push((g, p)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Largest probability gap between two merged distributions.
pub fn dist_diff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut keys: Vec<f64> = a.iter().chain(b).map(|t| t.0).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup_by(|x, y| (*x - *y).abs() <= 1e-9);
    let at = |d: &[(f64, f64)], k: f64| {
        d.iter()
            .filter(|t| (t.0 - k).abs() <= 1e-9)
            .map(|t| t.1)
            .sum::<f64>()
    };
    keys.iter()
        .map(|&k| (at(a, k) - at(b, k)).abs())
        .fold(0.0, f64::max)
}

pub fn series(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn parallel(xs: &[f64]) -> f64 {
    xs.iter().sum()
}

/// Exactly-one-working rule folded from the left.
pub fn xor(xs: &[f64]) -> f64 {
    let mut acc = xs[0];
    for &x in &xs[1..] {
        acc = if acc.abs() <= 1e-9 || x.abs() <= 1e-9 {
            acc + x
        } else {
            0.0
        };
    }
    acc
}

pub fn gate(w: &StructureFunction, xs: &[f64]) -> f64 {
    match w {
        StructureFunction::Series => series(xs),
        StructureFunction::Parallel => parallel(xs),
        StructureFunction::Xor => xor(xs),
        StructureFunction::Custom(t) => {
            t.rows()
                .iter()
                .find(|(k, _)| k.iter().zip(xs).all(|(a, b)| (a - b).abs() <= 1e-9))
                .expect("total table")
                .1
        }
    }
}

/// Distribution of `f` over the product of independent inputs, by walking
/// every tuple.
pub fn enumerate(inputs: &[Vec<(f64, f64)>], f: impl Fn(&[f64]) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; inputs.len()];
    loop {
        let xs: Vec<f64> = idx.iter().zip(inputs).map(|(&i, u)| u[i].0).collect();
        let p: f64 = idx.iter().zip(inputs).map(|(&i, u)| u[i].1).product();
        out.push((f(&xs), p));
        let mut k = inputs.len();
        loop {
            if k == 0 {
                return merge(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < inputs[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn eval_tree(tree: &StructureTree, xs: &[f64]) -> f64 {
    match tree {
        StructureTree::Input(i) => xs[*i],
        StructureTree::Gate(w, children) => {
            let vals: Vec<f64> = children.iter().map(|c| eval_tree(c, xs)).collect();
            gate(w, &vals)
        }
    }
}

pub fn component_dist(model: &ComponentModel, t: f64) -> Vec<(f64, f64)> {
    match model {
        ComponentModel::Explicit {
            performances,
            probabilities,
        } => merge(
            performances
                .iter()
                .cloned()
                .zip(probabilities.iter().cloned())
                .collect(),
        ),
        ComponentModel::Lifetime {
            lambda_e6,
            working_performance,
        } => {
            let r = (-lambda_e6 * 1e-6 * t).exp();
            merge(vec![(0.0, 1.0 - r), (*working_performance, r)])
        }
    }
}

/// Top-node distribution by walking every component tuple and branching on
/// stochastic CPT outcomes.
pub fn system_oracle(system: &HierarchicalSystem, t: f64) -> Vec<(f64, f64)> {
    let comps: Vec<Vec<(f64, f64)>> = system
        .components
        .iter()
        .map(|c| component_dist(&c.model, t))
        .collect();
    let mut order: Vec<usize> = (0..system.nodes.len()).collect();
    order.sort_by_key(|&i| system.nodes[i].level);
    let top = order[order.len() - 1];
    let mut out = Vec::new();
    let mut idx = vec![0usize; comps.len()];
    loop {
        let cv: Vec<f64> = idx.iter().zip(&comps).map(|(&i, u)| u[i].0).collect();
        let p: f64 = idx.iter().zip(&comps).map(|(&i, u)| u[i].1).product();
        if p > 0.0 {
            let mut nodes = vec![0.0; system.nodes.len()];
            branch(system, &order, 0, &cv, &mut nodes, p, top, &mut out);
        }
        let mut k = comps.len();
        loop {
            if k == 0 {
                return merge(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < comps[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn branch(
    system: &HierarchicalSystem,
    order: &[usize],
    pos: usize,
    comps: &[f64],
    nodes: &mut Vec<f64>,
    p: f64,
    top: usize,
    out: &mut Vec<(f64, f64)>,
) {
    if pos == order.len() {
        out.push((nodes[top], p));
        return;
    }
    let i = order[pos];
    let node = &system.nodes[i];
    let xs: Vec<f64> = node
        .parents
        .iter()
        .map(|r| match *r {
            ParentRef::Component(c) => comps[c],
            ParentRef::Node(j) => nodes[j],
        })
        .collect();
    match &node.relation {
        Relation::Structure(tree) => {
            nodes[i] = eval_tree(tree, &xs);
            branch(system, order, pos + 1, comps, nodes, p, top, out);
        }
        Relation::Cpt(cpt) => {
            let row = cpt
                .rows
                .iter()
                .find(|r| r.given.iter().zip(&xs).all(|(a, b)| (a - b).abs() <= 1e-9))
                .expect("covered");
            for (&s, &q) in cpt.states.iter().zip(&row.probabilities) {
                if q > 0.0 {
                    nodes[i] = s;
                    branch(system, order, pos + 1, comps, nodes, p * q, top, out);
                }
            }
        }
    }
}

pub fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = xs.iter().sum();
    xs.into_iter().map(|x| x / s).collect()
}

/// Random network with `n` nodes, up to 3 states each and up to 3 parents
/// drawn from earlier nodes. CPTs are returned in creation order.
pub fn random_network(seed: u64, n: usize) -> Vec<Cpt> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cards = Vec::new();
    let mut cpts: Vec<Cpt> = Vec::new();
    for i in 0..n {
        let card = rng.random_range(1..=3usize);
        cards.push(card);
        let mut parents: Vec<usize> = Vec::new();
        if i > 0 {
            let k = rng.random_range(0..=i.min(3));
            while parents.len() < k {
                let p = rng.random_range(0..i);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        cpts.push(Cpt {
            child: format!("v{i}"),
            child_states: (0..card).map(|s| s as f64).collect(),
            parents: parents.iter().map(|p| format!("v{p}")).collect(),
            parent_states: parents
                .iter()
                .map(|&p| (0..cards[p]).map(|s| s as f64).collect())
                .collect(),
            rows: (0..rows).map(|_| dirichlet(&mut rng, card)).collect(),
        });
    }
    cpts
}

/// Marginal of `target` by summing the product of all CPT entries over
/// every joint assignment.
pub fn brute_marginal(cpts: &[Cpt], target: &str) -> Vec<f64> {
    let names: Vec<&str> = cpts.iter().map(|c| c.child.as_str()).collect();
    let cards: Vec<usize> = cpts.iter().map(|c| c.child_states.len()).collect();
    let pos = |name: &str| names.iter().position(|n| *n == name).unwrap();
    let ti = pos(target);
    let parent_pos: Vec<Vec<usize>> = cpts
        .iter()
        .map(|c| c.parents.iter().map(|p| pos(p)).collect())
        .collect();
    let mut out = vec![0.0; cards[ti]];
    let mut a = vec![0usize; cpts.len()];
    loop {
        let mut p = 1.0;
        for (k, c) in cpts.iter().enumerate() {
            let mut row = 0;
            for &q in &parent_pos[k] {
                row = row * cards[q] + a[q];
            }
            p *= c.rows[row][a[k]];
        }
        out[a[ti]] += p;
        let mut k = a.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            a[k] += 1;
            if a[k] < cards[k] {
                break;
            }
            a[k] = 0;
        }
    }
}
