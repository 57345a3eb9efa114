//! Hierarchical multi-state system model.
//!
//! Level 1 holds the bottom components. Every node at level 2 combines a set
//! of components through a structure tree; nodes at level 3 and above depend
//! on nodes one level below through either a structure function or an
//! explicit conditional probability table. Exactly one node sits at the top
//! level.

mod design;
mod document;
mod expr;
mod generate;
mod validate;

use thiserror::Error;

use crate::lifetime::{ExponentialLifetime, LifetimeError};
use crate::ugf::{compose_refs, StructureFunction, Term, UFunction, UgfError, KEY_TOLERANCE};

pub(crate) use design::instantiate_unchecked;
pub use design::{instantiate_design, Budgets, DesignSpec, DesignVector, UnitSpec};
pub use document::{
    parse_document, parse_model, serialize_document, serialize_model, ModelDocument,
};
pub use generate::{random_system, GeneratorConfig};
pub use validate::{validate_model, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("node `{node}` references unknown {expected} `{reference}`")]
    UnknownReference {
        node: String,
        reference: String,
        expected: &'static str,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("{context}: {message}")]
    Schema { context: String, message: String },
    #[error("component `{id}`: {source}")]
    Component { id: String, source: UgfError },
    #[error("component `{id}`: {source}")]
    Lifetime { id: String, source: LifetimeError },
    #[error("node `{id}`: {source}")]
    Structure { id: String, source: UgfError },
    #[error("unit `{unit}` count {count} outside [{min}, {max}]")]
    BoundViolation {
        unit: String,
        count: u32,
        min: u32,
        max: u32,
    },
    #[error("design vector has {actual} counts, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dependency cycle through node `{0}`")]
    Cycle(String),
}

/// State model of one bottom component.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentModel {
    Explicit {
        performances: Vec<f64>,
        probabilities: Vec<f64>,
    },
    /// Binary component: performance 0 when failed, `working_performance`
    /// otherwise. The rate is kept in units of 1e-6 per hour.
    Lifetime {
        lambda_e6: f64,
        working_performance: f64,
    },
}

impl ComponentModel {
    pub fn lifetime(&self) -> Option<Result<ExponentialLifetime, LifetimeError>> {
        match *self {
            ComponentModel::Lifetime {
                lambda_e6,
                working_performance,
            } => Some(ExponentialLifetime::from_rate_e6(
                lambda_e6,
                working_performance,
            )),
            ComponentModel::Explicit { .. } => None,
        }
    }

    /// All performance levels the component can take, ascending, regardless
    /// of their probability at any particular time.
    pub fn support(&self) -> Vec<f64> {
        match self {
            ComponentModel::Explicit { performances, .. } => distinct_sorted(performances.clone()),
            ComponentModel::Lifetime {
                working_performance,
                ..
            } => distinct_sorted(vec![0.0, *working_performance]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub id: String,
    pub model: ComponentModel,
}

impl ComponentSpec {
    /// State distribution at mission time `t` (hours).
    pub fn ufunction_at(&self, t: f64) -> Result<UFunction, ModelError> {
        match &self.model {
            ComponentModel::Explicit {
                performances,
                probabilities,
            } => UFunction::new(performances, probabilities).map_err(|source| {
                ModelError::Component {
                    id: self.id.clone(),
                    source,
                }
            }),
            ComponentModel::Lifetime { .. } => {
                let lifetime = self.model.lifetime().unwrap();
                lifetime
                    .and_then(|m| m.binary_ufunction_at(t))
                    .map_err(|source| ModelError::Lifetime {
                        id: self.id.clone(),
                        source,
                    })
            }
        }
    }
}

/// Structure function applied to a tree of gates. Leaves index into the
/// owning node's parent list.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureTree {
    Input(usize),
    Gate(StructureFunction, Vec<StructureTree>),
}

impl StructureTree {
    /// A single gate over all `arity` inputs in order.
    pub fn flat(w: StructureFunction, arity: usize) -> Self {
        StructureTree::Gate(w, (0..arity).map(StructureTree::Input).collect())
    }

    /// The gate function when the tree is a single gate over inputs
    /// `0..n` in order.
    pub fn as_flat(&self) -> Option<&StructureFunction> {
        match self {
            StructureTree::Gate(w, children) => children
                .iter()
                .enumerate()
                .all(|(i, c)| *c == StructureTree::Input(i))
                .then_some(w),
            StructureTree::Input(_) => None,
        }
    }

    /// Leaf indices in left-to-right order.
    pub fn inputs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_inputs(&mut out);
        out
    }

    fn collect_inputs(&self, out: &mut Vec<usize>) {
        match self {
            StructureTree::Input(i) => out.push(*i),
            StructureTree::Gate(_, children) => {
                for c in children {
                    c.collect_inputs(out);
                }
            }
        }
    }

    pub fn evaluate(&self, inputs: &[f64]) -> Result<f64, UgfError> {
        match self {
            StructureTree::Input(i) => Ok(inputs[*i]),
            StructureTree::Gate(w, children) => {
                let values = children
                    .iter()
                    .map(|c| c.evaluate(inputs))
                    .collect::<Result<Vec<_>, _>>()?;
                w.apply(&values)
            }
        }
    }

    /// Composes input u-functions through the tree.
    pub fn compose(&self, inputs: &[&UFunction]) -> Result<UFunction, UgfError> {
        match self {
            StructureTree::Input(i) => Ok(inputs[*i].clone()),
            StructureTree::Gate(w, children) => {
                let parts = children
                    .iter()
                    .map(|c| c.compose(inputs))
                    .collect::<Result<Vec<_>, _>>()?;
                compose_refs(&parts.iter().collect::<Vec<_>>(), w)
            }
        }
    }

    /// Output support given each input's support.
    pub fn support(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, UgfError> {
        let uniform: Vec<UFunction> = inputs.iter().map(|s| uniform_over(s)).collect();
        let refs: Vec<&UFunction> = uniform.iter().collect();
        Ok(self.compose(&refs)?.performances())
    }

    pub(crate) fn map_inputs(&self, f: &mut impl FnMut(usize) -> StructureTree) -> StructureTree {
        match self {
            StructureTree::Input(i) => f(*i),
            StructureTree::Gate(w, children) => StructureTree::Gate(
                w.clone(),
                children.iter().map(|c| c.map_inputs(f)).collect(),
            ),
        }
    }
}

impl crate::bayesnet::Structure for StructureTree {
    fn evaluate(&self, inputs: &[f64]) -> Result<f64, UgfError> {
        StructureTree::evaluate(self, inputs)
    }
}

fn uniform_over(support: &[f64]) -> UFunction {
    let p = 1.0 / support.len().max(1) as f64;
    UFunction::canonical(
        support
            .iter()
            .map(|&performance| Term {
                performance,
                probability: p,
            })
            .collect(),
    )
}

pub(crate) fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        match out.last() {
            Some(last) if v - last <= KEY_TOLERANCE => {}
            _ => out.push(v),
        }
    }
    out
}

/// Index of `value` in an ascending support, within [`KEY_TOLERANCE`].
pub(crate) fn state_index(support: &[f64], value: f64) -> Option<usize> {
    let i = support.partition_point(|s| *s < value - KEY_TOLERANCE);
    (i < support.len() && (support[i] - value).abs() <= KEY_TOLERANCE).then_some(i)
}

/// One row of a user-supplied CPT, keyed by parent performance values.
#[derive(Debug, Clone, PartialEq)]
pub struct CptRow {
    pub given: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Explicit conditional distribution of a node given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCpt {
    /// Performance value of each child state.
    pub states: Vec<f64>,
    pub rows: Vec<CptRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Relation {
    Structure(StructureTree),
    Cpt(UserCpt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParentRef {
    Component(usize),
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemNode {
    pub id: String,
    pub level: usize,
    pub parents: Vec<ParentRef>,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalSystem {
    pub level_count: usize,
    pub components: Vec<ComponentSpec>,
    pub nodes: Vec<SubsystemNode>,
}

impl HierarchicalSystem {
    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn parent_id(&self, parent: ParentRef) -> &str {
        match parent {
            ParentRef::Component(i) => &self.components[i].id,
            ParentRef::Node(i) => &self.nodes[i].id,
        }
    }

    /// The unique node at the top level, if there is exactly one.
    pub fn top_node(&self) -> Option<usize> {
        let mut top = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.level == self.level_count)
            .map(|(i, _)| i);
        match (top.next(), top.next()) {
            (Some(i), None) => Some(i),
            _ => None,
        }
    }

    pub fn nodes_at_level(&self, level: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.level == level)
            .map(|(i, _)| i)
    }

    /// Number of child nodes of every node.
    pub fn child_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        for n in &self.nodes {
            for p in &n.parents {
                if let ParentRef::Node(i) = p {
                    counts[*i] += 1;
                }
            }
        }
        counts
    }

    /// Nodes ordered so that every node follows its node parents.
    pub fn topological_order(&self) -> Result<Vec<usize>, ModelError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                if let ParentRef::Node(j) = p {
                    indegree[i] += 1;
                    children[*j].push(i);
                }
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(ModelError::Cycle(self.nodes[stuck].id.clone()));
        }
        Ok(order)
    }

    /// Support of every node (indexed like `nodes`), derived from component
    /// supports through structure functions, or the declared states of an
    /// explicit CPT.
    pub fn node_supports(&self) -> Result<Vec<Vec<f64>>, ModelError> {
        let component_supports: Vec<Vec<f64>> =
            self.components.iter().map(|c| c.model.support()).collect();
        self.node_supports_with(&component_supports)
    }

    pub(crate) fn node_supports_with(
        &self,
        component_supports: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let order = self.topological_order()?;
        let mut supports: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for i in order {
            let node = &self.nodes[i];
            let support = match &node.relation {
                Relation::Cpt(cpt) => distinct_sorted(cpt.states.clone()),
                Relation::Structure(tree) => {
                    let inputs: Vec<Vec<f64>> = node
                        .parents
                        .iter()
                        .map(|p| match *p {
                            ParentRef::Component(c) => component_supports[c].clone(),
                            ParentRef::Node(j) => supports[j].clone().unwrap_or_default(),
                        })
                        .collect();
                    tree.support(&inputs)
                        .map_err(|source| ModelError::Structure {
                            id: node.id.clone(),
                            source,
                        })?
                }
            };
            supports[i] = Some(support);
        }
        Ok(supports
            .into_iter()
            .map(Option::unwrap_or_default)
            .collect())
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}
