//! Discrete Bayesian networks with exact inference by variable elimination.

mod factor;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{distinct_sorted, state_index};
use crate::ugf::{advance, StructureFunction, UgfError, NORMALIZATION_TOLERANCE};

pub use factor::Factor;

/// Largest joint state space [`BayesianNetwork::joint_enumeration`] accepts.
pub const JOINT_ENUMERATION_LIMIT: u128 = 1 << 24;

/// Deterministic relation between parent performances and a child
/// performance.
pub trait Structure {
    fn evaluate(&self, inputs: &[f64]) -> Result<f64, UgfError>;
}

impl Structure for StructureFunction {
    fn evaluate(&self, inputs: &[f64]) -> Result<f64, UgfError> {
        self.apply(inputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CptViolationKind {
    Coverage,
    Dimension,
    Range,
    Normalization,
    States,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CptViolation {
    pub kind: CptViolationKind,
    pub message: String,
}

impl fmt::Display for CptViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BnError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` has more than one CPT")]
    DuplicateNode(String),
    #[error("cycle through node `{0}`")]
    CycleDetected(String),
    #[error("invalid CPT for `{node}`: {}", .violations.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    InvalidCpt {
        node: String,
        violations: Vec<CptViolation>,
    },
    #[error("state space of {size} exceeds the limit of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error(transparent)]
    Structure(#[from] UgfError),
    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),
}

/// A random variable whose states are labelled by performance values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNode {
    pub id: String,
    /// Ascending, distinct.
    pub states: Vec<f64>,
}

impl DiscreteNode {
    pub fn new(id: impl Into<String>, states: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            states,
        }
    }

    pub fn card(&self) -> usize {
        self.states.len()
    }
}

/// Conditional distribution of `child` given `parents`. Row `r` belongs to
/// the `r`-th parent state tuple in odometer order (last parent fastest);
/// entry `s` of a row is the probability of child state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: String,
    pub child_states: Vec<f64>,
    pub parents: Vec<String>,
    pub parent_states: Vec<Vec<f64>>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    /// Root marginal.
    pub fn root(child: impl Into<String>, states: Vec<f64>, probabilities: Vec<f64>) -> Self {
        Self {
            child: child.into(),
            child_states: states,
            parents: Vec::new(),
            parent_states: Vec::new(),
            rows: vec![probabilities],
        }
    }

    pub fn node(&self) -> DiscreteNode {
        DiscreteNode::new(self.child.clone(), self.child_states.clone())
    }

    fn row_count(&self) -> u128 {
        self.parent_states.iter().map(|s| s.len() as u128).product()
    }

    fn describe_row(&self, r: usize) -> String {
        let mut rest = r;
        let mut parts = Vec::with_capacity(self.parents.len());
        for (name, states) in self.parents.iter().zip(&self.parent_states).rev() {
            let k = states.len().max(1);
            parts.push(format!("{}={}", name, crate::short(states[rest % k])));
            rest /= k;
        }
        parts.reverse();
        parts.join(", ")
    }
}

/// Checks coverage, row dimensions, entry ranges and row normalization.
pub fn validate_cpt(cpt: &Cpt) -> Vec<CptViolation> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(CptViolation { kind, message });
    if cpt.child_states.is_empty() {
        push(
            CptViolationKind::States,
            format!("node {} has no states", cpt.child),
        );
    }
    if distinct_sorted(cpt.child_states.clone()).len() != cpt.child_states.len()
        || cpt.child_states.windows(2).any(|w| w[0] >= w[1])
    {
        push(
            CptViolationKind::States,
            format!("node {}: states must be distinct and ascending", cpt.child),
        );
    }
    if cpt.parents.len() != cpt.parent_states.len() {
        push(
            CptViolationKind::Dimension,
            format!(
                "node {}: {} parents but {} parent state lists",
                cpt.child,
                cpt.parents.len(),
                cpt.parent_states.len()
            ),
        );
        return out;
    }
    let expected = cpt.row_count();
    if cpt.rows.len() as u128 != expected {
        push(
            CptViolationKind::Coverage,
            format!(
                "node {}: CPT has {} rows, parent states need {}",
                cpt.child,
                cpt.rows.len(),
                expected
            ),
        );
        return out;
    }
    for (r, row) in cpt.rows.iter().enumerate() {
        let at = if cpt.parents.is_empty() {
            String::from("marginal")
        } else {
            format!("column for {}", cpt.describe_row(r))
        };
        if row.len() != cpt.child_states.len() {
            push(
                CptViolationKind::Dimension,
                format!(
                    "node {}: CPT {} has {} entries, expected {}",
                    cpt.child,
                    at,
                    row.len(),
                    cpt.child_states.len()
                ),
            );
            continue;
        }
        if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            push(
                CptViolationKind::Range,
                format!(
                    "node {}: CPT {} has probability {} outside [0, 1]",
                    cpt.child, at, p
                ),
            );
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            push(
                CptViolationKind::Normalization,
                format!(
                    "node {}: CPT {} sums to {}",
                    cpt.child,
                    at,
                    crate::short(sum)
                ),
            );
        }
    }
    out
}

/// CPT of a child fully determined by `w` over the parents' states. The
/// child's states are the distinct outputs of `w`, ascending, and each row is
/// one-hot.
pub fn deterministic_cpt(
    child: impl Into<String>,
    w: &dyn Structure,
    parents: &[&DiscreteNode],
) -> Result<Cpt, BnError> {
    let mut outputs = Vec::new();
    let mut index = vec![0usize; parents.len()];
    let mut tuple = vec![0.0; parents.len()];
    if parents.iter().all(|p| p.card() > 0) {
        loop {
            for (k, p) in parents.iter().enumerate() {
                tuple[k] = p.states[index[k]];
            }
            outputs.push(w.evaluate(&tuple)?);
            if !advance(&mut index, |k| parents[k].card()) {
                break;
            }
        }
    }
    let states = distinct_sorted(outputs.clone());
    let rows = outputs
        .iter()
        .map(|&g| {
            let mut row = vec![0.0; states.len()];
            row[state_index(&states, g).expect("output is in the derived states")] = 1.0;
            row
        })
        .collect();
    Ok(Cpt {
        child: child.into(),
        child_states: states,
        parents: parents.iter().map(|p| p.id.clone()).collect(),
        parent_states: parents.iter().map(|p| p.states.clone()).collect(),
        rows,
    })
}

/// Validated, immutable network.
#[derive(Debug, Clone)]
pub struct BayesianNetwork {
    nodes: Vec<DiscreteNode>,
    cpts: Vec<Cpt>,
    parents: Vec<Vec<usize>>,
}

impl BayesianNetwork {
    /// One CPT per node; nodes are declared by the CPTs' children.
    pub fn new(cpts: Vec<Cpt>) -> Result<Self, BnError> {
        let nodes: Vec<DiscreteNode> = cpts.iter().map(Cpt::node).collect();
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|m| m.id == n.id) {
                return Err(BnError::DuplicateNode(n.id.clone()));
            }
        }
        let index_of = |id: &str| nodes.iter().position(|n| n.id == id);
        let mut parents = Vec::with_capacity(cpts.len());
        for cpt in &cpts {
            let mut ps = Vec::with_capacity(cpt.parents.len());
            for p in &cpt.parents {
                ps.push(index_of(p).ok_or_else(|| BnError::UnknownNode(p.clone()))?);
            }
            parents.push(ps);
        }
        for (cpt, ps) in cpts.iter().zip(&parents) {
            let mut violations = validate_cpt(cpt);
            for (k, &p) in ps.iter().enumerate() {
                let declared = cpt.parent_states.get(k);
                if declared != Some(&nodes[p].states) {
                    violations.push(CptViolation {
                        kind: CptViolationKind::States,
                        message: format!(
                            "node {}: parent {} states differ from that node's states",
                            cpt.child, nodes[p].id
                        ),
                    });
                }
            }
            if ps.iter().enumerate().any(|(k, p)| ps[..k].contains(p)) {
                violations.push(CptViolation {
                    kind: CptViolationKind::Dimension,
                    message: format!("node {}: repeated parent", cpt.child),
                });
            }
            if !violations.is_empty() {
                return Err(BnError::InvalidCpt {
                    node: cpt.child.clone(),
                    violations,
                });
            }
        }
        let net = Self {
            nodes,
            cpts,
            parents,
        };
        net.topological_order()?;
        Ok(net)
    }

    pub fn nodes(&self) -> &[DiscreteNode] {
        &self.nodes
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn parents_of(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    fn topological_order(&self) -> Result<Vec<usize>, BnError> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(BnError::CycleDetected(self.nodes[stuck].id.clone()));
        }
        Ok(order)
    }

    fn target(&self, id: &str) -> Result<usize, BnError> {
        self.node_index(id)
            .ok_or_else(|| BnError::UnknownNode(id.to_string()))
    }

    /// Target and its ancestors; everything else is barren for this query.
    fn relevant(&self, target: usize) -> Vec<bool> {
        let mut keep = vec![false; self.nodes.len()];
        let mut stack = vec![target];
        while let Some(i) = stack.pop() {
            if !keep[i] {
                keep[i] = true;
                stack.extend(&self.parents[i]);
            }
        }
        keep
    }

    fn factor(&self, node: usize) -> Factor {
        let cpt = &self.cpts[node];
        let mut vars: Vec<usize> = self.parents[node].clone();
        vars.push(node);
        let mut scope = vars.clone();
        scope.sort_unstable();
        let cards: Vec<usize> = scope.iter().map(|&v| self.nodes[v].card()).collect();
        let mut strides = vec![1usize; scope.len()];
        for k in (0..scope.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * cards[k + 1];
        }
        let stride_of = |v: usize| strides[scope.binary_search(&v).unwrap()];
        let parent_strides: Vec<usize> = self.parents[node].iter().map(|&p| stride_of(p)).collect();
        let child_stride = stride_of(node);

        let mut values = vec![0.0; cards.iter().product()];
        let mut index = vec![0usize; parent_strides.len()];
        for row in &cpt.rows {
            let base: usize = index.iter().zip(&parent_strides).map(|(i, s)| i * s).sum();
            for (s, p) in row.iter().enumerate() {
                values[base + s * child_stride] = *p;
            }
            advance(&mut index, |k| self.nodes[self.parents[node][k]].card());
        }
        Factor::new(scope, cards, values)
    }

    /// Min-degree elimination order on the moral graph of the relevant
    /// nodes, ties broken by node index.
    pub fn elimination_order(&self, target: &str) -> Result<Vec<usize>, BnError> {
        let target = self.target(target)?;
        let keep = self.relevant(target);
        let n = self.nodes.len();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for c in (0..n).filter(|&c| keep[c]) {
            let ps = &self.parents[c];
            for (k, &p) in ps.iter().enumerate() {
                adj[c].insert(p);
                adj[p].insert(c);
                for &q in &ps[k + 1..] {
                    adj[p].insert(q);
                    adj[q].insert(p);
                }
            }
        }
        let mut alive: BTreeSet<usize> = (0..n).filter(|&i| keep[i] && i != target).collect();
        let mut order = Vec::with_capacity(alive.len());
        while let Some(&v) = alive.iter().min_by_key(|&&v| (adj[v].len(), v)) {
            alive.remove(&v);
            let neighbours: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &a in &neighbours {
                adj[a].remove(&v);
                for &b in &neighbours {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
            order.push(v);
        }
        Ok(order)
    }

    /// Exact marginal of `target`, aligned with its states.
    pub fn marginal(&self, target: &str) -> Result<Vec<f64>, BnError> {
        let order = self.elimination_order(target)?;
        self.marginal_with_order(target, &order)
    }

    /// Exact marginal using the given elimination order. Nodes that are not
    /// ancestors of the target are ignored; every ancestor must appear once.
    pub fn marginal_with_order(&self, target: &str, order: &[usize]) -> Result<Vec<f64>, BnError> {
        let t = self.target(target)?;
        let keep = self.relevant(t);
        let mut seen = vec![false; self.nodes.len()];
        let mut steps = Vec::new();
        for &v in order {
            if v >= self.nodes.len() {
                return Err(BnError::InvalidOrder(format!(
                    "node index {v} out of range"
                )));
            }
            if v == t || !keep[v] {
                continue;
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(BnError::InvalidOrder(format!(
                    "`{}` listed twice",
                    self.nodes[v].id
                )));
            }
            steps.push(v);
        }
        if let Some(missing) = (0..self.nodes.len()).find(|&v| keep[v] && v != t && !seen[v]) {
            return Err(BnError::InvalidOrder(format!(
                "`{}` is never eliminated",
                self.nodes[missing].id
            )));
        }

        let mut factors: Vec<Factor> = (0..self.nodes.len())
            .filter(|&i| keep[i])
            .map(|i| self.factor(i))
            .collect();
        for v in steps {
            let (touching, rest): (Vec<Factor>, Vec<Factor>) =
                factors.into_iter().partition(|f| f.contains(v));
            factors = rest;
            let joined = touching
                .iter()
                .skip(1)
                .fold(touching[0].clone(), |acc, f| acc.product(f));
            factors.push(joined.sum_out(v));
        }
        let result = factors.iter().fold(Factor::unit(), |acc, f| acc.product(f));
        debug_assert_eq!(result.scope, vec![t]);
        Ok(result.values)
    }

    /// Marginal of `target` by summing the full joint distribution. Guarded
    /// by [`JOINT_ENUMERATION_LIMIT`].
    pub fn joint_enumeration(&self, target: &str) -> Result<Vec<f64>, BnError> {
        let t = self.target(target)?;
        let size: u128 = self.nodes.iter().map(|n| n.card() as u128).product();
        if size > JOINT_ENUMERATION_LIMIT {
            return Err(BnError::StateSpaceTooLarge {
                size,
                cap: JOINT_ENUMERATION_LIMIT,
            });
        }
        let mut out = vec![0.0; self.nodes[t].card()];
        let mut assignment = vec![0usize; self.nodes.len()];
        loop {
            let mut p = 1.0;
            for (i, cpt) in self.cpts.iter().enumerate() {
                let row = self.parents[i]
                    .iter()
                    .fold(0usize, |r, &q| r * self.nodes[q].card() + assignment[q]);
                p *= cpt.rows[row][assignment[i]];
                if p == 0.0 {
                    break;
                }
            }
            out[assignment[t]] += p;
            if !advance(&mut assignment, |i| self.nodes[i].card()) {
                break;
            }
        }
        Ok(out)
    }
}
