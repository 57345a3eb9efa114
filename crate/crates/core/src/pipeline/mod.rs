//! End-to-end system reliability: u-functions up to level 2, exact network
//! inference above, and the pure-network reference that treats every bottom
//! component as a root.

mod bench;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bayesnet::{deterministic_cpt, BayesianNetwork, BnError, Cpt, DiscreteNode};
use crate::model::{
    state_index, validate_model, HierarchicalSystem, ModelError, ParentRef, Relation, UserCpt,
    Violation,
};
use crate::ugf::{advance, UFunction, KEY_TOLERANCE};

pub use bench::{benchmark_scaling, grow_system, write_csv, BenchRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("model is invalid: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Network(#[from] BnError),
    #[error("node `{node}`: {message}")]
    StateMismatch { node: String, message: String },
    #[error("no distribution supplied for level-2 node `{0}`")]
    MissingLevel2(String),
    #[error("accepted state {0} is not a top-node state")]
    UnknownState(f64),
    #[error("benchmark needs at least one step")]
    NoSteps,
    #[error("methods disagree by {diff:e} at benchmark step {step}")]
    MethodsDisagree { step: usize, diff: f64 },
}

/// Which top-node states count as working.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Acceptance {
    /// Performance at least the demand.
    Demand(f64),
    /// Exactly these performance values.
    States(Vec<f64>),
    /// Only the highest top state.
    #[default]
    HighestState,
}

impl Acceptance {
    pub fn accepts(&self, states: &[f64]) -> Result<Vec<bool>, PipelineError> {
        Ok(match self {
            Acceptance::Demand(d) => states.iter().map(|&g| g >= d - KEY_TOLERANCE).collect(),
            Acceptance::States(wanted) => {
                let mut mask = vec![false; states.len()];
                for &w in wanted {
                    let i = state_index(states, w).ok_or(PipelineError::UnknownState(w))?;
                    mask[i] = true;
                }
                mask
            }
            Acceptance::HighestState => {
                let mut mask = vec![false; states.len()];
                if let Some(last) = mask.last_mut() {
                    *last = true;
                }
                mask
            }
        })
    }

    pub fn reliability(&self, states: &[f64], probabilities: &[f64]) -> Result<f64, PipelineError> {
        let mask = self.accepts(states)?;
        let r: f64 = mask
            .iter()
            .zip(probabilities)
            .filter(|(m, _)| **m)
            .map(|(_, p)| p)
            .sum();
        Ok(r.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Structure-function levels collapsed with u-functions before the
    /// network takes over. 2 applies u-functions to level-2 nodes only.
    pub ugf_levels: usize,
    /// Largest CPT (in rows) either method may build.
    pub row_cap: u128,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ugf_levels: 2,
            row_cap: 1 << 22,
        }
    }
}

/// Top-node distribution and the reliability it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub states: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub r_system: f64,
}

impl Analysis {
    /// Largest probability difference, treating missing states as 0.
    pub fn max_abs_diff(&self, other: &Analysis) -> f64 {
        let a = UFunction::canonical_pairs(&self.states, &self.probabilities);
        let b = UFunction::canonical_pairs(&other.states, &other.probabilities);
        a.max_abs_diff(&b)
    }
}

fn ensure_valid(system: &HierarchicalSystem) -> Result<(), PipelineError> {
    let report = validate_model(system);
    if report.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Invalid(report))
    }
}

fn component_ufunctions(system: &HierarchicalSystem, t: f64) -> Result<Vec<UFunction>, ModelError> {
    system
        .components
        .iter()
        .map(|c| c.ufunction_at(t))
        .collect()
}

fn compose_node(
    system: &HierarchicalSystem,
    node: usize,
    components: &[UFunction],
    nodes: &[Option<UFunction>],
) -> Result<UFunction, ModelError> {
    let n = &system.nodes[node];
    let Relation::Structure(tree) = &n.relation else {
        unreachable!("only structure nodes are composed")
    };
    let inputs: Vec<&UFunction> = n
        .parents
        .iter()
        .map(|p| match *p {
            ParentRef::Component(c) => &components[c],
            ParentRef::Node(j) => nodes[j].as_ref().expect("parents composed first"),
        })
        .collect();
    tree.compose(&inputs)
        .map_err(|source| ModelError::Structure {
            id: n.id.clone(),
            source,
        })
}

/// Distribution of every level-2 node at time `t` (hours), keyed by node id.
pub fn level2_ufunctions(
    system: &HierarchicalSystem,
    t: f64,
) -> Result<BTreeMap<String, UFunction>, PipelineError> {
    ensure_valid(system)?;
    let components = component_ufunctions(system, t)?;
    let mut out = BTreeMap::new();
    for i in system.nodes_at_level(2) {
        let u = compose_node(system, i, &components, &[])?;
        out.insert(system.nodes[i].id.clone(), u);
    }
    Ok(out)
}

/// Network over levels 2..n whose roots are the level-2 nodes with the given
/// distributions.
pub fn build_bn(
    system: &HierarchicalSystem,
    level2: &BTreeMap<String, UFunction>,
) -> Result<BayesianNetwork, PipelineError> {
    ensure_valid(system)?;
    let supports = system.node_supports()?;
    let roots: Vec<(usize, UFunction)> = system
        .nodes_at_level(2)
        .map(|i| {
            let id = &system.nodes[i].id;
            level2
                .get(id)
                .cloned()
                .map(|u| (i, u))
                .ok_or_else(|| PipelineError::MissingLevel2(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut is_root = vec![false; system.nodes.len()];
    for (i, _) in &roots {
        is_root[*i] = true;
    }
    let mut cpts = Vec::new();
    for (i, u) in roots {
        cpts.push(root_cpt(&system.nodes[i].id, &supports[i], &u)?);
    }
    interior_cpts(
        system,
        &supports,
        &is_root,
        &PipelineConfig::default(),
        &mut cpts,
    )?;
    Ok(BayesianNetwork::new(cpts)?)
}

fn root_cpt(id: &str, support: &[f64], u: &UFunction) -> Result<Cpt, PipelineError> {
    if let Some(term) = u
        .terms()
        .iter()
        .find(|t| state_index(support, t.performance).is_none())
    {
        return Err(PipelineError::StateMismatch {
            node: id.to_string(),
            message: format!(
                "distribution has performance {} outside the node's states",
                term.performance
            ),
        });
    }
    // Merged sums can overshoot 1 by an ulp or two.
    let probabilities = support
        .iter()
        .map(|&s| u.probability_of(s).min(1.0))
        .collect();
    Ok(Cpt::root(id, support.to_vec(), probabilities))
}

fn check_cap(parent_cards: impl Iterator<Item = usize>, cap: u128) -> Result<(), PipelineError> {
    let rows: u128 = parent_cards.map(|c| c as u128).product();
    if rows > cap {
        return Err(BnError::StateSpaceTooLarge { size: rows, cap }.into());
    }
    Ok(())
}

/// CPTs of every non-root node, in topological order.
fn interior_cpts(
    system: &HierarchicalSystem,
    supports: &[Vec<f64>],
    is_root: &[bool],
    config: &PipelineConfig,
    cpts: &mut Vec<Cpt>,
) -> Result<(), PipelineError> {
    for i in system.topological_order()? {
        if is_root[i] || !is_needed(system, i, is_root) {
            continue;
        }
        let node = &system.nodes[i];
        let parents: Vec<DiscreteNode> = node
            .parents
            .iter()
            .map(|p| match *p {
                ParentRef::Node(j) => {
                    DiscreteNode::new(system.nodes[j].id.clone(), supports[j].clone())
                }
                ParentRef::Component(_) => unreachable!("level-2 nodes are roots here"),
            })
            .collect();
        check_cap(parents.iter().map(DiscreteNode::card), config.row_cap)?;
        let refs: Vec<&DiscreteNode> = parents.iter().collect();
        let cpt = match &node.relation {
            Relation::Structure(tree) => deterministic_cpt(node.id.clone(), tree, &refs)?,
            Relation::Cpt(user) => user_cpt(&node.id, user, &refs)?,
        };
        cpts.push(cpt);
    }
    Ok(())
}

/// Nodes absorbed into a collapsed root are not network nodes.
fn is_needed(system: &HierarchicalSystem, i: usize, is_root: &[bool]) -> bool {
    // A node below a root (ancestor side) is absorbed; interior nodes have
    // at least one parent that is a root or another needed node.
    system.nodes[i].parents.iter().all(|p| match *p {
        ParentRef::Node(j) => is_root[j] || is_needed(system, j, is_root),
        ParentRef::Component(_) => false,
    })
}

fn user_cpt(id: &str, user: &UserCpt, parents: &[&DiscreteNode]) -> Result<Cpt, PipelineError> {
    let mismatch = |message: String| PipelineError::StateMismatch {
        node: id.to_string(),
        message,
    };
    for (k, p) in parents.iter().enumerate() {
        let mut declared: Vec<f64> = user
            .rows
            .iter()
            .filter_map(|r| r.given.get(k).copied())
            .collect();
        declared = crate::model::distinct_sorted(declared);
        if declared.len() != p.card() {
            return Err(mismatch(format!(
                "CPT lists {} states for parent {}, which has {}",
                declared.len(),
                p.id,
                p.card()
            )));
        }
    }
    let mut order: Vec<usize> = (0..user.states.len()).collect();
    order.sort_by(|&a, &b| user.states[a].total_cmp(&user.states[b]));
    let child_states: Vec<f64> = order.iter().map(|&k| user.states[k]).collect();

    let mut rows = Vec::new();
    let mut index = vec![0usize; parents.len()];
    loop {
        let tuple: Vec<f64> = index
            .iter()
            .zip(parents)
            .map(|(&i, p)| p.states[i])
            .collect();
        let row = user
            .rows
            .iter()
            .find(|r| {
                r.given.len() == tuple.len()
                    && r.given
                        .iter()
                        .zip(&tuple)
                        .all(|(a, b)| (a - b).abs() <= KEY_TOLERANCE)
            })
            .ok_or_else(|| mismatch(format!("CPT has no row for parent states {tuple:?}")))?;
        rows.push(order.iter().map(|&k| row.probabilities[k]).collect());
        if !advance(&mut index, |k| parents[k].card()) {
            break;
        }
    }
    Ok(Cpt {
        child: id.to_string(),
        child_states,
        parents: parents.iter().map(|p| p.id.clone()).collect(),
        parent_states: parents.iter().map(|p| p.states.clone()).collect(),
        rows,
    })
}

fn top_analysis(
    system: &HierarchicalSystem,
    net: &BayesianNetwork,
    acceptance: &Acceptance,
) -> Result<Analysis, PipelineError> {
    let top = system.top_node().expect("valid systems have one top node");
    let id = &system.nodes[top].id;
    let probabilities = net.marginal(id)?;
    let states = net.nodes()[net.node_index(id).unwrap()].states.clone();
    let r_system = acceptance.reliability(&states, &probabilities)?;
    Ok(Analysis {
        states,
        probabilities,
        r_system,
    })
}

pub fn system_reliability_ugfbn(
    system: &HierarchicalSystem,
    t: f64,
    acceptance: &Acceptance,
) -> Result<Analysis, PipelineError> {
    system_reliability_ugfbn_with(system, t, acceptance, &PipelineConfig::default())
}

/// Hybrid method: u-functions for the collapsed lower levels, exact
/// inference above.
pub fn system_reliability_ugfbn_with(
    system: &HierarchicalSystem,
    t: f64,
    acceptance: &Acceptance,
    config: &PipelineConfig,
) -> Result<Analysis, PipelineError> {
    ensure_valid(system)?;
    let supports = system.node_supports()?;
    let components = component_ufunctions(system, t)?;
    let collapsed = collapsed_nodes(system, config.ugf_levels);

    let mut composed: Vec<Option<UFunction>> = vec![None; system.nodes.len()];
    for i in system.topological_order()? {
        if collapsed[i] {
            composed[i] = Some(compose_node(system, i, &components, &composed)?);
        }
    }
    let child_collapsed = {
        let mut flags = vec![false; system.nodes.len()];
        for (c, node) in system.nodes.iter().enumerate() {
            for p in &node.parents {
                if let ParentRef::Node(j) = *p {
                    flags[j] |= collapsed[c];
                }
            }
        }
        flags
    };
    let is_root: Vec<bool> = (0..system.nodes.len())
        .map(|i| collapsed[i] && !child_collapsed[i])
        .collect();

    let mut cpts = Vec::new();
    for i in (0..system.nodes.len()).filter(|&i| is_root[i]) {
        let u = composed[i].as_ref().unwrap();
        cpts.push(root_cpt(&system.nodes[i].id, &supports[i], u)?);
    }
    interior_cpts(system, &supports, &is_root, config, &mut cpts)?;
    let net = BayesianNetwork::new(cpts)?;
    top_analysis(system, &net, acceptance)
}

/// Level-2 nodes, plus structure nodes up to `ugf_levels` whose parents are
/// all collapsed and feed no other node. The second condition keeps the
/// collapsed inputs independent.
fn collapsed_nodes(system: &HierarchicalSystem, ugf_levels: usize) -> Vec<bool> {
    let children = system.child_counts();
    let mut collapsed = vec![false; system.nodes.len()];
    let order = system.topological_order().unwrap_or_default();
    for i in order {
        let node = &system.nodes[i];
        collapsed[i] = node.level == 2
            || (node.level <= ugf_levels
                && matches!(node.relation, Relation::Structure(_))
                && node.parents.iter().all(|p| match *p {
                    ParentRef::Node(j) => collapsed[j] && children[j] == 1,
                    ParentRef::Component(_) => false,
                }));
    }
    collapsed
}

pub fn system_reliability_purebn(
    system: &HierarchicalSystem,
    t: f64,
    acceptance: &Acceptance,
) -> Result<Analysis, PipelineError> {
    system_reliability_purebn_with(system, t, acceptance, &PipelineConfig::default())
}

/// Reference method: every bottom component is a root and every level-2
/// node gets one deterministic CPT over all of its components.
pub fn system_reliability_purebn_with(
    system: &HierarchicalSystem,
    t: f64,
    acceptance: &Acceptance,
    config: &PipelineConfig,
) -> Result<Analysis, PipelineError> {
    ensure_valid(system)?;
    let supports = system.node_supports()?;
    let components = component_ufunctions(system, t)?;

    let mut cpts = Vec::new();
    let mut component_nodes = Vec::with_capacity(system.components.len());
    for (c, u) in system.components.iter().zip(&components) {
        let support = c.model.support();
        let cpt = root_cpt(&c.id, &support, u)?;
        component_nodes.push(cpt.node());
        cpts.push(cpt);
    }
    let mut is_root = vec![false; system.nodes.len()];
    for i in system.nodes_at_level(2) {
        let node = &system.nodes[i];
        let parents: Vec<&DiscreteNode> = node
            .parents
            .iter()
            .map(|p| match *p {
                ParentRef::Component(c) => &component_nodes[c],
                ParentRef::Node(_) => unreachable!("level-2 parents are components"),
            })
            .collect();
        check_cap(parents.iter().map(|p| p.card()), config.row_cap)?;
        let Relation::Structure(tree) = &node.relation else {
            unreachable!("validated level-2 nodes have structure trees")
        };
        let cpt = deterministic_cpt(node.id.clone(), tree, &parents)?;
        debug_assert_eq!(cpt.child_states, supports[i]);
        cpts.push(cpt);
        is_root[i] = true;
    }
    interior_cpts(system, &supports, &is_root, config, &mut cpts)?;
    let net = BayesianNetwork::new(cpts)?;
    top_analysis(system, &net, acceptance)
}
