//! Redundancy design catalog and instantiation of a design vector into a
//! concrete system.

use crate::ugf::StructureFunction;

use super::{
    ComponentModel, ComponentSpec, HierarchicalSystem, ModelError, ParentRef, Relation,
    StructureTree,
};

/// Optional unit type: per-unit attributes and the allowed redundancy range.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpec {
    pub id: String,
    pub mass_kg: f64,
    pub power_w: f64,
    /// Development cost in M$.
    pub cost_m: f64,
    /// Failure rate in 1e-6 per hour.
    pub lambda_e6: f64,
    /// How the `n` copies of the unit combine.
    pub psi: StructureFunction,
    pub n_min: u32,
    pub n_max: u32,
    pub working_performance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub mass_kg: f64,
    pub power_w: f64,
    pub cost_m: f64,
    pub reliability: f64,
}

/// Unit counts aligned with [`DesignSpec::units`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesignVector(pub Vec<u32>);

impl DesignVector {
    pub fn counts(&self) -> &[u32] {
        &self.0
    }
}

impl std::fmt::Display for DesignVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Design problem: the unit catalog, budgets, mission time and the system
/// skeleton in which every unit appears once as a lifetime component.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub units: Vec<UnitSpec>,
    pub budgets: Budgets,
    pub mission_time_h: f64,
    /// Top-node demand; `None` accepts only the highest top state.
    pub demand: Option<f64>,
    pub baseline: Option<DesignVector>,
    pub skeleton: HierarchicalSystem,
}

impl DesignSpec {
    pub fn check(&self) -> Result<(), ModelError> {
        let err = |context: String, message: &str| ModelError::Schema {
            context,
            message: message.to_string(),
        };
        let b = &self.budgets;
        if !(b.mass_kg > 0.0 && b.power_w > 0.0 && b.cost_m > 0.0) {
            return Err(err(
                "budgets".into(),
                "mass, power and cost budgets must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&b.reliability) {
            return Err(err(
                "budgets".into(),
                "reliability budget must lie in [0, 1]",
            ));
        }
        if !(self.mission_time_h >= 0.0) {
            return Err(err("design".into(), "mission time must be non-negative"));
        }
        for u in &self.units {
            let context = format!("unit `{}`", u.id);
            if u.n_min < 1 || u.n_min > u.n_max {
                return Err(err(context, "bounds need 1 <= n_min <= n_max"));
            }
            if matches!(u.psi, StructureFunction::Custom(_)) {
                return Err(err(context, "psi must be series, parallel or xor"));
            }
            if !(u.lambda_e6 > 0.0) {
                return Err(err(context, "lambda_e6 must be positive"));
            }
            let idx = self.skeleton.component_index(&u.id);
            let users = self
                .skeleton
                .nodes
                .iter()
                .filter(|n| {
                    n.parents
                        .iter()
                        .any(|p| matches!(p, ParentRef::Component(c) if Some(*c) == idx))
                })
                .count();
            if users != 1 {
                return Err(err(context, "each unit must feed exactly one level-2 node"));
            }
        }
        if let Some(baseline) = &self.baseline {
            if baseline.0.len() != self.units.len() {
                return Err(ModelError::LengthMismatch {
                    expected: self.units.len(),
                    actual: baseline.0.len(),
                });
            }
        }
        Ok(())
    }

    /// Number of designs inside the bound box.
    pub fn design_space_size(&self) -> u128 {
        self.units
            .iter()
            .map(|u| (u.n_max - u.n_min + 1) as u128)
            .product()
    }

    pub fn check_bounds(&self, counts: &DesignVector) -> Result<(), ModelError> {
        self.check_length(counts)?;
        for (u, &n) in self.units.iter().zip(&counts.0) {
            if n < u.n_min || n > u.n_max {
                return Err(ModelError::BoundViolation {
                    unit: u.id.clone(),
                    count: n,
                    min: u.n_min,
                    max: u.n_max,
                });
            }
        }
        Ok(())
    }

    pub fn check_length(&self, counts: &DesignVector) -> Result<(), ModelError> {
        if counts.0.len() != self.units.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.units.len(),
                actual: counts.0.len(),
            });
        }
        Ok(())
    }

    /// Skeleton component index of each unit.
    pub(crate) fn unit_components(&self) -> Vec<usize> {
        self.units
            .iter()
            .map(|u| {
                self.skeleton
                    .component_index(&u.id)
                    .expect("units are skeleton components")
            })
            .collect()
    }
}

/// Builds the system in which unit `j` appears as `n_j` identical lifetime
/// components composed under its `psi`, in place of the unit's skeleton
/// component.
pub fn instantiate_design(
    spec: &DesignSpec,
    counts: &DesignVector,
) -> Result<HierarchicalSystem, ModelError> {
    spec.check_bounds(counts)?;
    instantiate_unchecked(spec, counts)
}

pub(crate) fn instantiate_unchecked(
    spec: &DesignSpec,
    counts: &DesignVector,
) -> Result<HierarchicalSystem, ModelError> {
    spec.check_length(counts)?;
    if let Some((u, _)) = spec.units.iter().zip(&counts.0).find(|(_, &n)| n == 0) {
        return Err(ModelError::BoundViolation {
            unit: u.id.clone(),
            count: 0,
            min: u.n_min,
            max: u.n_max,
        });
    }
    let skeleton = &spec.skeleton;
    let unit_of: Vec<Option<usize>> = skeleton
        .components
        .iter()
        .map(|c| spec.units.iter().position(|u| u.id == c.id))
        .collect();

    // Skeleton component index -> new component indices.
    let mut components = Vec::new();
    let mut replaced: Vec<Vec<usize>> = Vec::with_capacity(skeleton.components.len());
    for (ci, c) in skeleton.components.iter().enumerate() {
        match unit_of[ci] {
            Some(j) if counts.0[j] > 1 => {
                let u = &spec.units[j];
                let mut ids = Vec::new();
                for k in 1..=counts.0[j] {
                    ids.push(components.len());
                    components.push(ComponentSpec {
                        id: format!("{}#{}", c.id, k),
                        model: ComponentModel::Lifetime {
                            lambda_e6: u.lambda_e6,
                            working_performance: u.working_performance,
                        },
                    });
                }
                replaced.push(ids);
            }
            _ => {
                replaced.push(vec![components.len()]);
                components.push(c.clone());
            }
        }
    }

    let nodes = skeleton
        .nodes
        .iter()
        .map(|node| {
            let mut node = node.clone();
            if !node
                .parents
                .iter()
                .any(|p| matches!(p, ParentRef::Component(_)))
            {
                return node;
            }
            let old_parents = node.parents.clone();
            let mut parents = Vec::new();
            let mut slot_of: Vec<Vec<usize>> = Vec::with_capacity(old_parents.len());
            for p in &old_parents {
                let ParentRef::Component(ci) = *p else {
                    slot_of.push(vec![parents.len()]);
                    parents.push(*p);
                    continue;
                };
                let mut slots = Vec::new();
                for &nc in &replaced[ci] {
                    slots.push(parents.len());
                    parents.push(ParentRef::Component(nc));
                }
                slot_of.push(slots);
            }
            if let Relation::Structure(tree) = &node.relation {
                let tree = tree.map_inputs(&mut |i| {
                    let slots = &slot_of[i];
                    if slots.len() == 1 {
                        StructureTree::Input(slots[0])
                    } else {
                        let psi = match old_parents[i] {
                            ParentRef::Component(ci) => {
                                spec.units[unit_of[ci].unwrap()].psi.clone()
                            }
                            ParentRef::Node(_) => unreachable!(),
                        };
                        StructureTree::Gate(
                            psi,
                            slots.iter().map(|&s| StructureTree::Input(s)).collect(),
                        )
                    }
                });
                node.relation = Relation::Structure(tree);
            }
            node.parents = parents;
            node
        })
        .collect();

    Ok(HierarchicalSystem {
        level_count: skeleton.level_count,
        components,
        nodes,
    })
}
