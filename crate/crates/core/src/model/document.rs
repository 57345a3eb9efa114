//! TOML model documents.
//!
//! ```toml
//! levels = 2
//!
//! [[components]]
//! id = "c1"
//! performances = [0, 1]
//! probabilities = ["0.4", "0.6"]
//!
//! [[components]]
//! id = "c2"
//! lambda_e6 = 1.52          # failures per 1e6 hours
//!
//! [[nodes]]
//! id = "s"
//! level = 2
//! expr = "series(c1, c2)"   # or: parents = [...] with structure = "series"
//! ```
//!
//! Nodes above level 2 either name a `structure` over their `parents`
//! (`series`, `parallel`, `xor`, or `custom` with a `table` of
//! `{ inputs = [...], output = g }` rows) or carry `states` and a `cpt` of
//! `{ given = [...], p = [...] }` rows keyed by parent performance values.
//! Probabilities are written as decimal strings so that files round-trip
//! bit for bit.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ugf::{CustomTable, StructureFunction};

use super::design::{Budgets, DesignSpec, DesignVector, UnitSpec};
use super::expr::{parse_expr, render};
use super::{
    ComponentModel, ComponentSpec, CptRow, HierarchicalSystem, ModelError, ParentRef, Relation,
    StructureTree, SubsystemNode, UserCpt,
};

/// A parsed document: the system and, for design documents, the unit
/// catalog and budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub system: HierarchicalSystem,
    pub design: Option<DesignSpec>,
}

/// Real number accepted as integer, float or decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

/// Real number written back as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Decimal(f64);

struct NumVisitor;

impl<'de> Visitor<'de> for NumVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a decimal string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| E::custom(format!("`{v}` is not a decimal number")))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(NumVisitor).map(Num)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(NumVisitor).map(Decimal)
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

fn decimals(v: &[Decimal]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentDto {
    levels: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    components: Vec<ComponentDto>,
    #[serde(default)]
    nodes: Vec<NodeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<DesignDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDto {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    performances: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probabilities: Option<Vec<Decimal>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_e6: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    performance: Option<Num>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRowDto {
    inputs: Vec<Num>,
    output: Num,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptRowDto {
    given: Vec<Num>,
    p: Vec<Decimal>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDto {
    id: String,
    level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parents: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<TableRowDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    states: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpt: Option<Vec<CptRowDto>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetsDto {
    mass_kg: Num,
    power_w: Num,
    cost_m: Num,
    reliability: Decimal,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitDto {
    id: String,
    mass_kg: Num,
    power_w: Num,
    cost_m: Num,
    lambda_e6: Num,
    psi: String,
    n_min: u32,
    n_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    performance: Option<Num>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignDto {
    mission_time_h: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    demand: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline: Option<Vec<u32>>,
    budgets: BudgetsDto,
    units: Vec<UnitDto>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

fn schema(context: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        context: context.into(),
        message: message.into(),
    }
}

fn parse_kind(name: &str, context: &str) -> Result<StructureFunction, ModelError> {
    match name {
        "series" => Ok(StructureFunction::Series),
        "parallel" => Ok(StructureFunction::Parallel),
        "xor" => Ok(StructureFunction::Xor),
        other => {
            if let Ok(code) = other.parse::<u32>() {
                if let Some(w) = StructureFunction::from_code(code) {
                    return Ok(w);
                }
            }
            Err(schema(context, format!("unknown structure `{other}`")))
        }
    }
}

/// Parses a model document and returns its system.
pub fn parse_model(document: &str) -> Result<HierarchicalSystem, ModelError> {
    parse_document(document).map(|d| d.system)
}

pub fn parse_document(document: &str) -> Result<ModelDocument, ModelError> {
    let dto: DocumentDto = toml::from_str(document).map_err(|e| {
        let (line, column) = e
            .span()
            .map_or((1, 1), |span| line_column(document, span.start));
        ModelError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if dto.levels < 2 {
        return Err(schema("levels", "a hierarchy needs at least 2 levels"));
    }

    let mut seen = HashSet::new();
    let mut components = Vec::new();
    for c in &dto.components {
        if !seen.insert(c.id.clone()) {
            return Err(ModelError::DuplicateId(c.id.clone()));
        }
        components.push(component_from_dto(c)?);
    }

    let mut units = Vec::new();
    if let Some(design) = &dto.design {
        for u in &design.units {
            if !seen.insert(u.id.clone()) {
                return Err(ModelError::DuplicateId(u.id.clone()));
            }
            let unit = UnitSpec {
                id: u.id.clone(),
                mass_kg: u.mass_kg.0,
                power_w: u.power_w.0,
                cost_m: u.cost_m.0,
                lambda_e6: u.lambda_e6.0,
                psi: parse_kind(&u.psi, &format!("unit `{}`", u.id))?,
                n_min: u.n_min,
                n_max: u.n_max,
                working_performance: u.performance.map_or(1.0, |p| p.0),
            };
            components.push(ComponentSpec {
                id: unit.id.clone(),
                model: ComponentModel::Lifetime {
                    lambda_e6: unit.lambda_e6,
                    working_performance: unit.working_performance,
                },
            });
            units.push(unit);
        }
    }

    let component_ids: HashMap<&str, usize> = components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    let mut node_ids: HashMap<&str, usize> = HashMap::new();
    for (i, n) in dto.nodes.iter().enumerate() {
        if !seen.insert(n.id.clone()) {
            return Err(ModelError::DuplicateId(n.id.clone()));
        }
        node_ids.insert(n.id.as_str(), i);
    }

    let mut nodes = Vec::with_capacity(dto.nodes.len());
    for n in &dto.nodes {
        nodes.push(node_from_dto(n, &component_ids, &node_ids)?);
    }

    let system = HierarchicalSystem {
        level_count: dto.levels,
        components,
        nodes,
    };

    let design = match dto.design {
        None => None,
        Some(d) => {
            let spec = DesignSpec {
                units,
                budgets: Budgets {
                    mass_kg: d.budgets.mass_kg.0,
                    power_w: d.budgets.power_w.0,
                    cost_m: d.budgets.cost_m.0,
                    reliability: d.budgets.reliability.0,
                },
                mission_time_h: d.mission_time_h.0,
                demand: d.demand.map(|n| n.0),
                baseline: d.baseline.map(DesignVector),
                skeleton: system.clone(),
            };
            spec.check()?;
            Some(spec)
        }
    };

    Ok(ModelDocument { system, design })
}

fn component_from_dto(c: &ComponentDto) -> Result<ComponentSpec, ModelError> {
    let context = format!("component `{}`", c.id);
    let model = match (&c.performances, &c.probabilities, &c.lambda_e6) {
        (Some(g), Some(p), None) => {
            if c.performance.is_some() {
                return Err(schema(
                    context,
                    "`performance` only applies to lifetime components",
                ));
            }
            ComponentModel::Explicit {
                performances: nums(g),
                probabilities: decimals(p),
            }
        }
        (None, None, Some(lambda)) => ComponentModel::Lifetime {
            lambda_e6: lambda.0,
            working_performance: c.performance.map_or(1.0, |p| p.0),
        },
        _ => {
            return Err(schema(
                context,
                "give either `performances` and `probabilities`, or `lambda_e6`",
            ))
        }
    };
    Ok(ComponentSpec {
        id: c.id.clone(),
        model,
    })
}

fn resolve_parents(
    node: &NodeDto,
    names: &[String],
    component_ids: &HashMap<&str, usize>,
    node_ids: &HashMap<&str, usize>,
) -> Result<Vec<ParentRef>, ModelError> {
    names
        .iter()
        .map(|name| {
            if node.level == 2 {
                component_ids
                    .get(name.as_str())
                    .map(|&i| ParentRef::Component(i))
                    .ok_or_else(|| ModelError::UnknownReference {
                        node: node.id.clone(),
                        reference: name.clone(),
                        expected: "component",
                    })
            } else {
                node_ids
                    .get(name.as_str())
                    .map(|&i| ParentRef::Node(i))
                    .ok_or_else(|| ModelError::UnknownReference {
                        node: node.id.clone(),
                        reference: name.clone(),
                        expected: "node one level below",
                    })
            }
        })
        .collect()
}

fn node_from_dto(
    n: &NodeDto,
    component_ids: &HashMap<&str, usize>,
    node_ids: &HashMap<&str, usize>,
) -> Result<SubsystemNode, ModelError> {
    let context = format!("node `{}`", n.id);
    if n.level < 2 {
        return Err(schema(context, "node levels start at 2"));
    }
    let (parent_names, relation) = match (&n.expr, &n.structure, &n.cpt) {
        (Some(expr), None, None) => {
            if n.parents.is_some() || n.table.is_some() || n.states.is_some() {
                return Err(schema(
                    context,
                    "`expr` defines the parents; drop `parents`/`table`/`states`",
                ));
            }
            let (tree, names) = parse_expr(expr)
                .and_then(|e| e.into_tree())
                .map_err(|m| schema(context.clone(), m))?;
            (names, Relation::Structure(tree))
        }
        (None, Some(kind), None) => {
            let parents = n
                .parents
                .clone()
                .ok_or_else(|| schema(context.clone(), "`structure` needs `parents`"))?;
            if parents.is_empty() {
                return Err(schema(context, "`parents` is empty"));
            }
            if n.states.is_some() {
                return Err(schema(context, "`states` only applies to `cpt` nodes"));
            }
            let w = if kind == "custom" {
                let rows = n
                    .table
                    .as_ref()
                    .ok_or_else(|| schema(context.clone(), "custom structure needs a `table`"))?
                    .iter()
                    .map(|r| (nums(&r.inputs), r.output.0))
                    .collect();
                StructureFunction::Custom(
                    CustomTable::new(parents.len(), rows)
                        .map_err(|e| schema(context.clone(), e.to_string()))?,
                )
            } else {
                if n.table.is_some() {
                    return Err(schema(context, "`table` only applies to custom structures"));
                }
                parse_kind(kind, &context)?
            };
            let arity = parents.len();
            (parents, Relation::Structure(StructureTree::flat(w, arity)))
        }
        (None, None, Some(rows)) => {
            let parents = n
                .parents
                .clone()
                .ok_or_else(|| schema(context.clone(), "`cpt` needs `parents`"))?;
            let states = n
                .states
                .as_ref()
                .ok_or_else(|| schema(context.clone(), "`cpt` needs `states`"))?;
            let cpt = UserCpt {
                states: nums(states),
                rows: rows
                    .iter()
                    .map(|r| CptRow {
                        given: nums(&r.given),
                        probabilities: decimals(&r.p),
                    })
                    .collect(),
            };
            (parents, Relation::Cpt(cpt))
        }
        _ => {
            return Err(schema(
                context,
                "give exactly one of `expr`, `structure` or `cpt`",
            ))
        }
    };
    let parents = resolve_parents(n, &parent_names, component_ids, node_ids)?;
    Ok(SubsystemNode {
        id: n.id.clone(),
        level: n.level,
        parents,
        relation,
    })
}

fn num_vec(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

fn decimal_vec(v: &[f64]) -> Vec<Decimal> {
    v.iter().copied().map(Decimal).collect()
}

fn system_to_dto(system: &HierarchicalSystem, skip_components: &HashSet<&str>) -> DocumentDto {
    let components = system
        .components
        .iter()
        .filter(|c| !skip_components.contains(c.id.as_str()))
        .map(|c| match &c.model {
            ComponentModel::Explicit {
                performances,
                probabilities,
            } => ComponentDto {
                id: c.id.clone(),
                performances: Some(num_vec(performances)),
                probabilities: Some(decimal_vec(probabilities)),
                lambda_e6: None,
                performance: None,
            },
            ComponentModel::Lifetime {
                lambda_e6,
                working_performance,
            } => ComponentDto {
                id: c.id.clone(),
                performances: None,
                probabilities: None,
                lambda_e6: Some(Num(*lambda_e6)),
                performance: (*working_performance != 1.0).then_some(Num(*working_performance)),
            },
        })
        .collect();

    let nodes = system
        .nodes
        .iter()
        .map(|n| {
            let names: Vec<&str> = n.parents.iter().map(|&p| system.parent_id(p)).collect();
            let owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            let mut dto = NodeDto {
                id: n.id.clone(),
                level: n.level,
                parents: None,
                expr: None,
                structure: None,
                table: None,
                states: None,
                cpt: None,
            };
            match &n.relation {
                Relation::Structure(tree) => match tree.as_flat() {
                    Some(w) if tree.inputs().len() == names.len() => {
                        dto.parents = Some(owned);
                        dto.structure = Some(w.name().to_string());
                        if let StructureFunction::Custom(table) = w {
                            dto.table = Some(
                                table
                                    .rows()
                                    .iter()
                                    .map(|(inputs, output)| TableRowDto {
                                        inputs: num_vec(inputs),
                                        output: Num(*output),
                                    })
                                    .collect(),
                            );
                        }
                    }
                    _ => dto.expr = Some(render(tree, &names)),
                },
                Relation::Cpt(cpt) => {
                    dto.parents = Some(owned);
                    dto.states = Some(num_vec(&cpt.states));
                    dto.cpt = Some(
                        cpt.rows
                            .iter()
                            .map(|r| CptRowDto {
                                given: num_vec(&r.given),
                                p: decimal_vec(&r.probabilities),
                            })
                            .collect(),
                    );
                }
            }
            dto
        })
        .collect();

    DocumentDto {
        levels: system.level_count,
        components,
        nodes,
        design: None,
    }
}

fn psi_name(w: &StructureFunction) -> String {
    w.name().to_string()
}

/// Writes a system as a model document.
pub fn serialize_model(system: &HierarchicalSystem) -> String {
    toml::to_string(&system_to_dto(system, &HashSet::new())).expect("model documents serialize")
}

pub fn serialize_document(doc: &ModelDocument) -> String {
    let skip: HashSet<&str> = doc
        .design
        .iter()
        .flat_map(|d| d.units.iter().map(|u| u.id.as_str()))
        .collect();
    let mut dto = system_to_dto(&doc.system, &skip);
    dto.design = doc.design.as_ref().map(|d| DesignDto {
        mission_time_h: Num(d.mission_time_h),
        demand: d.demand.map(Num),
        baseline: d.baseline.as_ref().map(|b| b.0.clone()),
        budgets: BudgetsDto {
            mass_kg: Num(d.budgets.mass_kg),
            power_w: Num(d.budgets.power_w),
            cost_m: Num(d.budgets.cost_m),
            reliability: Decimal(d.budgets.reliability),
        },
        units: d
            .units
            .iter()
            .map(|u| UnitDto {
                id: u.id.clone(),
                mass_kg: Num(u.mass_kg),
                power_w: Num(u.power_w),
                cost_m: Num(u.cost_m),
                lambda_e6: Num(u.lambda_e6),
                psi: psi_name(&u.psi),
                n_min: u.n_min,
                n_max: u.n_max,
                performance: (u.working_performance != 1.0).then_some(Num(u.working_performance)),
            })
            .collect(),
    });
    toml::to_string(&dto).expect("model documents serialize")
}
