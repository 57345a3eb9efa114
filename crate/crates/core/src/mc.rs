//! Monte Carlo estimate of the top-node distribution.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! once from the 64-bit seed and trial `i` uses stream `i`. Results therefore
//! do not depend on how trials are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{state_index, HierarchicalSystem, ParentRef, Relation};
use crate::pipeline::{Acceptance, PipelineError};
use crate::ugf::{advance, KEY_TOLERANCE};

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub trials: u64,
    pub r_estimate: f64,
    pub standard_error: f64,
    /// Top-node states, ascending.
    pub states: Vec<f64>,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
}

/// Inverse-CDF sampler over a finite distribution.
struct Sampler {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(values: Vec<f64>, probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { values, cumulative }
    }

    fn draw_index(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap();
        let i = self.cumulative.partition_point(|&c| c <= u * total);
        i.min(self.cumulative.len() - 1)
    }
}

enum NodeRule {
    Structure,
    /// One sampler per parent tuple in odometer order over `cards`.
    Table {
        cards: Vec<usize>,
        rows: Vec<Sampler>,
    },
}

struct Plan {
    components: Vec<Sampler>,
    order: Vec<usize>,
    rules: Vec<NodeRule>,
    supports: Vec<Vec<f64>>,
    top: usize,
}

fn plan(system: &HierarchicalSystem, t: f64) -> Result<Plan, PipelineError> {
    let report = crate::model::validate_model(system);
    if !report.is_empty() {
        return Err(PipelineError::Invalid(report));
    }
    let supports = system.node_supports()?;
    let components = system
        .components
        .iter()
        .map(|c| {
            let u = c.ufunction_at(t)?;
            Ok(Sampler::new(u.performances(), &u.probabilities()))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let mut rules = Vec::with_capacity(system.nodes.len());
    for node in &system.nodes {
        rules.push(match &node.relation {
            Relation::Structure(_) => NodeRule::Structure,
            Relation::Cpt(cpt) => {
                let parent_supports: Vec<&Vec<f64>> = node
                    .parents
                    .iter()
                    .map(|p| match *p {
                        ParentRef::Node(j) => &supports[j],
                        ParentRef::Component(_) => unreachable!("CPT nodes sit above level 2"),
                    })
                    .collect();
                let cards: Vec<usize> = parent_supports.iter().map(|s| s.len()).collect();
                let mut rows = Vec::new();
                let mut index = vec![0usize; cards.len()];
                loop {
                    let row = cpt
                        .rows
                        .iter()
                        .find(|r| {
                            r.given
                                .iter()
                                .zip(&index)
                                .zip(&parent_supports)
                                .all(|((g, &i), s)| (g - s[i]).abs() <= KEY_TOLERANCE)
                        })
                        .expect("validated CPTs cover every parent tuple");
                    rows.push(Sampler::new(cpt.states.clone(), &row.probabilities));
                    if !advance(&mut index, |k| cards[k]) {
                        break;
                    }
                }
                NodeRule::Table { cards, rows }
            }
        });
    }
    Ok(Plan {
        components,
        order: system.topological_order()?,
        rules,
        supports,
        top: system.top_node().expect("valid systems have one top node"),
    })
}

fn run_trial(
    system: &HierarchicalSystem,
    plan: &Plan,
    rng: &mut ChaCha8Rng,
    components: &mut [f64],
    nodes: &mut [f64],
    inputs: &mut Vec<f64>,
) -> usize {
    for (value, sampler) in components.iter_mut().zip(&plan.components) {
        *value = sampler.values[sampler.draw_index(rng.random::<f64>())];
    }
    for &i in &plan.order {
        let node = &system.nodes[i];
        inputs.clear();
        inputs.extend(node.parents.iter().map(|p| match *p {
            ParentRef::Component(c) => components[c],
            ParentRef::Node(j) => nodes[j],
        }));
        nodes[i] = match (&node.relation, &plan.rules[i]) {
            (Relation::Structure(tree), _) => tree
                .evaluate(inputs)
                .expect("validated structures are total"),
            (_, NodeRule::Table { cards, rows }) => {
                let mut row = 0usize;
                for (k, p) in node.parents.iter().enumerate() {
                    let ParentRef::Node(j) = *p else {
                        unreachable!()
                    };
                    let s = state_index(&plan.supports[j], inputs[k]).expect("value in support");
                    row = row * cards[k] + s;
                }
                let sampler = &rows[row];
                sampler.values[sampler.draw_index(rng.random::<f64>())]
            }
            (Relation::Cpt(_), NodeRule::Structure) => unreachable!(),
        };
    }
    state_index(&plan.supports[plan.top], nodes[plan.top]).expect("top value in support")
}

/// Samples the whole system `trials` times at time `t` (hours).
pub fn simulate(
    system: &HierarchicalSystem,
    t: f64,
    trials: u64,
    seed: u64,
    acceptance: &Acceptance,
) -> Result<McEstimate, PipelineError> {
    if trials == 0 {
        return Err(PipelineError::Model(crate::model::ModelError::Schema {
            context: "simulate".into(),
            message: "trials must be at least 1".into(),
        }));
    }
    let plan = plan(system, t)?;
    let states = plan.supports[plan.top].clone();
    let accepted = acceptance.accepts(&states)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = trials.div_ceil(CHUNK);

    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut counts = vec![0u64; states.len()];
            let mut components = vec![0.0; system.components.len()];
            let mut nodes = vec![0.0; system.nodes.len()];
            let mut inputs = Vec::new();
            let end = ((chunk + 1) * CHUNK).min(trials);
            for trial in chunk * CHUNK..end {
                let mut rng = base.clone();
                rng.set_stream(trial);
                let s = run_trial(
                    system,
                    &plan,
                    &mut rng,
                    &mut components,
                    &mut nodes,
                    &mut inputs,
                );
                counts[s] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; states.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let n = trials as f64;
    let hits: u64 = counts
        .iter()
        .zip(&accepted)
        .filter(|(_, a)| **a)
        .map(|(c, _)| c)
        .sum();
    let r_estimate = hits as f64 / n;
    Ok(McEstimate {
        trials,
        r_estimate,
        standard_error: (r_estimate * (1.0 - r_estimate) / n).sqrt(),
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
        counts,
        states,
    })
}
