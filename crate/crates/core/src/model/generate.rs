//! Seeded random hierarchical systems for property and equivalence tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::ugf::StructureFunction;

use super::{
    ComponentModel, ComponentSpec, CptRow, HierarchicalSystem, ParentRef, Relation, StructureTree,
    SubsystemNode, UserCpt,
};

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    /// At most 5.
    pub max_levels: usize,
    pub max_components: usize,
    /// Cap on the number of states of every component and node.
    pub max_states: usize,
    /// Chance that a node above level 2 gets a random stochastic CPT.
    pub stochastic_cpt_probability: f64,
    /// Chance that a component is a binary lifetime component rather than
    /// an explicit multi-state distribution.
    pub lifetime_probability: f64,
    /// Chance of nesting gates inside level-2 structure trees.
    pub nesting_probability: f64,
    /// Chance of an additional parent edge between adjacent levels.
    pub extra_edge_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            max_levels: 4,
            max_components: 12,
            max_states: 3,
            stochastic_cpt_probability: 0.3,
            lifetime_probability: 0.3,
            nesting_probability: 0.3,
            extra_edge_probability: 0.3,
        }
    }
}

fn dirichlet_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x: f64| x / total).collect()
}

/// Picks parallel when the resulting support stays within the state cap,
/// series otherwise.
fn pick_gate(
    rng: &mut ChaCha8Rng,
    children: Vec<StructureTree>,
    input_supports: &[Vec<f64>],
    max_states: usize,
) -> StructureTree {
    let want_parallel = rng.random_bool(0.5);
    if want_parallel {
        let candidate = StructureTree::Gate(StructureFunction::Parallel, children.clone());
        if let Ok(s) = candidate.support(input_supports) {
            if s.len() <= max_states {
                return candidate;
            }
        }
    }
    StructureTree::Gate(StructureFunction::Series, children)
}

fn random_tree(
    rng: &mut ChaCha8Rng,
    leaves: &[usize],
    input_supports: &[Vec<f64>],
    config: &GeneratorConfig,
) -> StructureTree {
    if leaves.len() >= 3 && rng.random_bool(config.nesting_probability) {
        let split = rng.random_range(1..leaves.len());
        let left = random_tree(rng, &leaves[..split], input_supports, config);
        let right = random_tree(rng, &leaves[split..], input_supports, config);
        let children: Vec<StructureTree> = [left, right]
            .into_iter()
            .map(|t| match t {
                StructureTree::Gate(_, ref c) if c.len() == 1 => c[0].clone(),
                other => other,
            })
            .collect();
        return pick_gate(rng, children, input_supports, config.max_states);
    }
    let children = leaves.iter().map(|&i| StructureTree::Input(i)).collect();
    pick_gate(rng, children, input_supports, config.max_states)
}

/// Generates a valid random system. Performance values are drawn from
/// `0..max_states`, so series gates never exceed the state cap.
pub fn random_system(seed: u64, config: &GeneratorConfig) -> HierarchicalSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_states = config.max_states.max(2);
    let levels = rng.random_range(2..=config.max_levels.clamp(2, 5));

    let mut sizes = vec![0usize; levels + 1];
    sizes[levels] = 1;
    let max_l2 = 4.min(config.max_components.max(1));
    sizes[2] = if levels == 2 {
        1
    } else {
        rng.random_range(1..=max_l2)
    };
    for k in 3..levels {
        sizes[k] = rng.random_range(1..=sizes[k - 1]);
    }

    let component_count = rng.random_range(sizes[2]..=config.max_components.max(sizes[2]));
    let mut components = Vec::with_capacity(component_count);
    for c in 0..component_count {
        let id = format!("c{c}");
        let model = if rng.random_bool(config.lifetime_probability) {
            let working = if max_states >= 3 && rng.random_bool(0.3) {
                2.0
            } else {
                1.0
            };
            ComponentModel::Lifetime {
                lambda_e6: rng.random_range(5.0..150.0_f64),
                working_performance: working,
            }
        } else {
            let k = rng.random_range(2..=max_states);
            let mut values: Vec<f64> = (0..max_states).map(|v| v as f64).collect();
            values.shuffle(&mut rng);
            let mut performances: Vec<f64> = values[..k].to_vec();
            performances.sort_by(f64::total_cmp);
            ComponentModel::Explicit {
                performances,
                probabilities: dirichlet_row(&mut rng, k),
            }
        };
        components.push(ComponentSpec { id, model });
    }
    let component_supports: Vec<Vec<f64>> = components.iter().map(|c| c.model.support()).collect();

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); sizes[2]];
    for c in 0..component_count {
        let g = if c < sizes[2] {
            c
        } else {
            rng.random_range(0..sizes[2])
        };
        groups[g].push(c);
    }

    let mut nodes: Vec<SubsystemNode> = Vec::new();
    let mut supports: Vec<Vec<f64>> = Vec::new();
    let mut previous: Vec<usize> = Vec::new();
    for (l, members) in groups.iter().enumerate() {
        let input_supports: Vec<Vec<f64>> = members
            .iter()
            .map(|&c| component_supports[c].clone())
            .collect();
        let leaves: Vec<usize> = (0..members.len()).collect();
        let tree = random_tree(&mut rng, &leaves, &input_supports, config);
        supports.push(
            tree.support(&input_supports)
                .expect("generated trees are total"),
        );
        previous.push(nodes.len());
        nodes.push(SubsystemNode {
            id: format!("s2_{l}"),
            level: 2,
            parents: members.iter().map(|&c| ParentRef::Component(c)).collect(),
            relation: Relation::Structure(tree),
        });
    }

    for level in 3..=levels {
        let count = sizes[level];
        let mut parent_sets: Vec<Vec<usize>> = vec![Vec::new(); count];
        for (k, &p) in previous.iter().enumerate() {
            let child = if k < count {
                k
            } else {
                rng.random_range(0..count)
            };
            parent_sets[child].push(p);
        }
        for set in parent_sets.iter_mut() {
            for &p in &previous {
                if !set.contains(&p) && rng.random_bool(config.extra_edge_probability / 2.0) {
                    set.push(p);
                }
            }
            set.sort_unstable();
        }
        let mut current = Vec::with_capacity(count);
        for (j, parents) in parent_sets.into_iter().enumerate() {
            let input_supports: Vec<Vec<f64>> =
                parents.iter().map(|&p| supports[p].clone()).collect();
            let relation = if rng.random_bool(config.stochastic_cpt_probability) {
                let k = rng.random_range(2..=max_states);
                let states: Vec<f64> = (0..k).map(|v| v as f64).collect();
                let mut rows = Vec::new();
                let mut index = vec![0usize; parents.len()];
                loop {
                    let given = index
                        .iter()
                        .zip(&input_supports)
                        .map(|(&i, s)| s[i])
                        .collect();
                    rows.push(CptRow {
                        given,
                        probabilities: dirichlet_row(&mut rng, k),
                    });
                    if !crate::ugf::advance(&mut index, |q| input_supports[q].len()) {
                        break;
                    }
                }
                supports.push(states.clone());
                Relation::Cpt(UserCpt { states, rows })
            } else {
                let children = (0..parents.len()).map(StructureTree::Input).collect();
                let tree = pick_gate(&mut rng, children, &input_supports, max_states);
                supports.push(
                    tree.support(&input_supports)
                        .expect("generated trees are total"),
                );
                Relation::Structure(tree)
            };
            current.push(nodes.len());
            nodes.push(SubsystemNode {
                id: format!("s{level}_{j}"),
                level,
                parents: parents.into_iter().map(ParentRef::Node).collect(),
                relation,
            });
        }
        previous = current;
    }

    HierarchicalSystem {
        level_count: levels,
        components,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn generated_systems_are_valid_and_capped() {
        let config = GeneratorConfig::default();
        for seed in 0..200 {
            let s = random_system(seed, &config);
            let report = validate_model(&s);
            assert!(report.is_empty(), "seed {seed}: {report:?}");
            assert!(s.components.len() <= 12);
            for support in s.node_supports().unwrap() {
                assert!(support.len() <= 3, "seed {seed}");
            }
        }
    }

    #[test]
    fn seeding_is_deterministic() {
        let config = GeneratorConfig::default();
        assert_eq!(random_system(9, &config), random_system(9, &config));
    }
}
