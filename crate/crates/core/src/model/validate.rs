use std::fmt;

use crate::short;
use crate::ugf::{UFunction, KEY_TOLERANCE, NORMALIZATION_TOLERANCE};

use super::{distinct_sorted, HierarchicalSystem, ParentRef, StructureTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    LevelCount,
    LevelRange,
    LevelAdjacency,
    Cycle,
    TopNode,
    Dangling,
    ComponentUsage,
    Relation,
    Distribution,
    CustomTable,
    CptCoverage,
    CptDimension,
    CptNormalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn push(out: &mut Vec<Violation>, kind: ViolationKind, message: String) {
    out.push(Violation { kind, message });
}

/// Checks the structural and probabilistic invariants of a parsed system.
/// An empty report means the system is valid.
pub fn validate_model(system: &HierarchicalSystem) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let n = system.level_count;
    if n < 2 {
        push(
            &mut out,
            LevelCount,
            format!("system has {n} levels, needs at least 2"),
        );
    }

    for node in &system.nodes {
        if node.level < 2 || node.level > n {
            push(
                &mut out,
                LevelRange,
                format!(
                    "node {} is at level {} outside [2, {n}]",
                    node.id, node.level
                ),
            );
        }
        if node.parents.is_empty() {
            push(
                &mut out,
                Relation,
                format!("node {} has no parents", node.id),
            );
        }
        for &p in &node.parents {
            match p {
                ParentRef::Component(_) if node.level != 2 => push(
                    &mut out,
                    LevelAdjacency,
                    format!(
                        "node {} at level {} depends on component {}",
                        node.id,
                        node.level,
                        system.parent_id(p)
                    ),
                ),
                ParentRef::Node(j) if system.nodes[j].level + 1 != node.level => push(
                    &mut out,
                    LevelAdjacency,
                    format!(
                        "node {} at level {} depends on node {} at level {}",
                        node.id, node.level, system.nodes[j].id, system.nodes[j].level
                    ),
                ),
                _ => {}
            }
        }
        match &node.relation {
            super::Relation::Cpt(_) if node.level == 2 => push(
                &mut out,
                Relation,
                format!(
                    "level-2 node {} needs a structure function over its components",
                    node.id
                ),
            ),
            super::Relation::Structure(tree) => {
                let mut inputs = tree.inputs();
                inputs.sort_unstable();
                if inputs != (0..node.parents.len()).collect::<Vec<_>>() {
                    push(
                        &mut out,
                        Relation,
                        format!(
                            "structure of node {} must use each parent exactly once",
                            node.id
                        ),
                    );
                }
            }
            _ => {}
        }
    }

    let acyclic = match system.topological_order() {
        Ok(_) => true,
        Err(e) => {
            push(&mut out, Cycle, e.to_string());
            false
        }
    };

    let top_count = system.nodes_at_level(n).count();
    if top_count != 1 {
        push(
            &mut out,
            TopNode,
            format!("level {n} has {top_count} nodes, expected exactly one top node"),
        );
    }

    let children = system.child_counts();
    for (i, node) in system.nodes.iter().enumerate() {
        if node.level < n && children[i] == 0 {
            push(
                &mut out,
                Dangling,
                format!(
                    "node {} at level {} feeds no node above it",
                    node.id, node.level
                ),
            );
        }
    }

    let mut users = vec![0usize; system.components.len()];
    for node in &system.nodes {
        for p in &node.parents {
            if let ParentRef::Component(c) = p {
                users[*c] += 1;
            }
        }
    }
    for (c, count) in users.iter().enumerate() {
        if *count != 1 {
            push(
                &mut out,
                ComponentUsage,
                format!(
                    "component {} feeds {count} level-2 nodes, expected exactly one",
                    system.components[c].id
                ),
            );
        }
    }

    let mut distributions_ok = true;
    for c in &system.components {
        let problem = match c.model.lifetime() {
            Some(Err(e)) => Some(e.to_string()),
            Some(Ok(_)) => None,
            None => {
                let super::ComponentModel::Explicit {
                    performances,
                    probabilities,
                } = &c.model
                else {
                    unreachable!()
                };
                UFunction::new(performances, probabilities)
                    .err()
                    .map(|e| e.to_string())
            }
        };
        if let Some(msg) = problem {
            distributions_ok = false;
            push(&mut out, Distribution, format!("component {}: {msg}", c.id));
        }
    }

    if acyclic && distributions_ok {
        check_relations(system, &mut out);
    }
    out
}

fn check_relations(system: &HierarchicalSystem, out: &mut Vec<Violation>) {
    use ViolationKind::*;
    let component_supports: Vec<Vec<f64>> = system
        .components
        .iter()
        .map(|c| c.model.support())
        .collect();
    let order = system.topological_order().expect("checked acyclic");
    let mut supports: Vec<Vec<f64>> = vec![Vec::new(); system.nodes.len()];
    for i in order {
        let node = &system.nodes[i];
        let parent_supports: Vec<Vec<f64>> = node
            .parents
            .iter()
            .map(|p| match *p {
                ParentRef::Component(c) => component_supports[c].clone(),
                ParentRef::Node(j) => supports[j].clone(),
            })
            .collect();
        let parent_names: Vec<&str> = node.parents.iter().map(|&p| system.parent_id(p)).collect();
        match &node.relation {
            super::Relation::Structure(tree) => {
                if !tree_is_well_formed(tree, node.parents.len()) {
                    continue;
                }
                match tree.support(&parent_supports) {
                    Ok(s) => supports[i] = s,
                    Err(e) => push(out, CustomTable, format!("node {}: {e}", node.id)),
                }
            }
            super::Relation::Cpt(cpt) => {
                let states = distinct_sorted(cpt.states.clone());
                if states.is_empty() || states.len() != cpt.states.len() {
                    push(
                        out,
                        CptDimension,
                        format!(
                            "node {}: CPT states must be non-empty and distinct",
                            node.id
                        ),
                    );
                }
                supports[i] = states;
                check_cpt_rows(node.id.as_str(), &parent_names, &parent_supports, cpt, out);
            }
        }
    }
}

fn tree_is_well_formed(tree: &StructureTree, arity: usize) -> bool {
    let mut inputs = tree.inputs();
    inputs.sort_unstable();
    inputs == (0..arity).collect::<Vec<_>>()
}

fn describe(names: &[&str], given: &[f64]) -> String {
    names
        .iter()
        .zip(given)
        .map(|(n, g)| format!("{n}={}", short(*g)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_cpt_rows(
    id: &str,
    names: &[&str],
    parent_supports: &[Vec<f64>],
    cpt: &super::UserCpt,
    out: &mut Vec<Violation>,
) {
    use ViolationKind::*;
    let matches = |given: &[f64], tuple: &[f64]| {
        given.len() == tuple.len()
            && given
                .iter()
                .zip(tuple)
                .all(|(a, b)| (a - b).abs() <= KEY_TOLERANCE)
    };

    for row in &cpt.rows {
        if row.given.len() != names.len() {
            push(
                out,
                CptDimension,
                format!(
                    "node {id}: CPT row keys {} parent values, node has {} parents",
                    row.given.len(),
                    names.len()
                ),
            );
            continue;
        }
        let known = row
            .given
            .iter()
            .zip(parent_supports)
            .all(|(g, s)| super::state_index(s, *g).is_some());
        if !known {
            push(
                out,
                CptCoverage,
                format!(
                    "node {id}: CPT row for {} names an impossible parent state",
                    describe(names, &row.given)
                ),
            );
        }
        if row.probabilities.len() != cpt.states.len() {
            push(
                out,
                CptDimension,
                format!(
                    "node {id}: CPT column for {} has {} entries, node has {} states",
                    describe(names, &row.given),
                    row.probabilities.len(),
                    cpt.states.len()
                ),
            );
            continue;
        }
        if let Some(p) = row.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            push(
                out,
                CptNormalization,
                format!(
                    "node {id}: CPT column for {} holds probability {} outside [0, 1]",
                    describe(names, &row.given),
                    short(*p)
                ),
            );
        }
        let sum: f64 = row.probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            push(
                out,
                CptNormalization,
                format!(
                    "node {id}: CPT column for {} sums to {}",
                    describe(names, &row.given),
                    short(sum)
                ),
            );
        }
    }

    if parent_supports.iter().any(Vec::is_empty) {
        return;
    }
    let mut index = vec![0usize; parent_supports.len()];
    let mut tuple = vec![0.0; parent_supports.len()];
    loop {
        for (k, s) in parent_supports.iter().enumerate() {
            tuple[k] = s[index[k]];
        }
        let hits = cpt
            .rows
            .iter()
            .filter(|r| matches(&r.given, &tuple))
            .count();
        if hits == 0 {
            push(
                out,
                CptCoverage,
                format!(
                    "node {id}: CPT has no column for {}",
                    describe(names, &tuple)
                ),
            );
        } else if hits > 1 {
            push(
                out,
                CptCoverage,
                format!(
                    "node {id}: CPT has {hits} columns for {}",
                    describe(names, &tuple)
                ),
            );
        }
        if !crate::ugf::advance(&mut index, |k| parent_supports[k].len()) {
            break;
        }
    }
}
