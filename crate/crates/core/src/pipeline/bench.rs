//! Timing of the hybrid method against the pure-network reference as bottom
//! components are added.

use std::io::{self, Write};
use std::time::Instant;

use crate::bayesnet::BnError;
use crate::model::{HierarchicalSystem, ParentRef, Relation, StructureTree};
use crate::ugf::StructureFunction;

use super::{
    system_reliability_purebn_with, system_reliability_ugfbn_with, Acceptance, Analysis,
    PipelineConfig, PipelineError,
};

/// Equality tolerance between the two methods.
const AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub step: usize,
    pub components: usize,
    /// `None` when the pure-network run exceeded the row cap.
    pub bn_ms: Option<f64>,
    pub ugfbn_ms: f64,
    pub ratio: Option<f64>,
    pub truncated: bool,
}

/// Adds `added` bottom components round-robin over the level-2 nodes. Each
/// new component copies the node's last component and joins the node's
/// outermost gate.
pub fn grow_system(base: &HierarchicalSystem, added: usize) -> HierarchicalSystem {
    let mut system = base.clone();
    let level2: Vec<usize> = system.nodes_at_level(2).collect();
    if level2.is_empty() {
        return system;
    }
    for k in 0..added {
        let node = level2[k % level2.len()];
        let Some(&ParentRef::Component(last)) = system.nodes[node]
            .parents
            .iter()
            .rev()
            .find(|p| matches!(p, ParentRef::Component(_)))
        else {
            continue;
        };
        let mut copy = system.components[last].clone();
        copy.id = format!("{}+{}", system.components[last].id, k + 1);
        system.components.push(copy);
        let new = system.components.len() - 1;

        let n = &mut system.nodes[node];
        let slot = n.parents.len();
        n.parents.push(ParentRef::Component(new));
        if let Relation::Structure(tree) = &mut n.relation {
            match tree {
                StructureTree::Gate(_, children) => children.push(StructureTree::Input(slot)),
                StructureTree::Input(i) => {
                    *tree = StructureTree::Gate(
                        StructureFunction::Series,
                        vec![StructureTree::Input(*i), StructureTree::Input(slot)],
                    );
                }
            }
        }
    }
    system
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn time_ms<T>(
    repetitions: usize,
    mut f: impl FnMut() -> Result<T, PipelineError>,
) -> Result<(T, f64), PipelineError> {
    let out = f()?;
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        std::hint::black_box(f()?);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((out, median(samples)))
}

/// Runs both methods on the base system and after each of `steps`
/// increments of `step` components. Rows cover steps `0..=steps`. Each
/// timing is the median of `repetitions` runs after one discarded warm-up;
/// the two methods must agree before a row is recorded.
pub fn benchmark_scaling(
    base: &HierarchicalSystem,
    step: usize,
    steps: usize,
    t: f64,
    acceptance: &Acceptance,
    repetitions: usize,
    config: &PipelineConfig,
) -> Result<Vec<BenchRow>, PipelineError> {
    if steps == 0 {
        return Err(PipelineError::NoSteps);
    }
    let repetitions = repetitions.max(1);
    let mut rows = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let system = grow_system(base, s * step);
        let (hybrid, ugfbn_ms): (Analysis, f64) = time_ms(repetitions, || {
            system_reliability_ugfbn_with(&system, t, acceptance, config)
        })?;
        let pure = time_ms(repetitions, || {
            system_reliability_purebn_with(&system, t, acceptance, config)
        });
        let (bn_ms, truncated) = match pure {
            Ok((reference, ms)) => {
                let diff = reference.max_abs_diff(&hybrid);
                if diff > AGREEMENT {
                    return Err(PipelineError::MethodsDisagree { step: s, diff });
                }
                (Some(ms), false)
            }
            Err(PipelineError::Network(BnError::StateSpaceTooLarge { .. })) => (None, true),
            Err(e) => return Err(e),
        };
        rows.push(BenchRow {
            step: s,
            components: system.components.len(),
            bn_ms,
            ugfbn_ms,
            ratio: bn_ms.map(|b| b / ugfbn_ms),
            truncated,
        });
    }
    Ok(rows)
}

/// Writes `step,components,bn_ms,ugfbn_ms,ratio,truncated`; missing
/// values are left empty.
pub fn write_csv(rows: &[BenchRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "step,components,bn_ms,ugfbn_ms,ratio,truncated")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.8}")).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.8},{},{}",
            r.step,
            r.components,
            opt(r.bn_ms),
            r.ugfbn_ms,
            opt(r.ratio),
            r.truncated
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, validate_model};

    const TWO_NODES: &str = r#"
levels = 3
components = [
  { id = "a", lambda_e6 = 2 },
  { id = "b", lambda_e6 = 3 },
  { id = "c", lambda_e6 = 4 },
]
nodes = [
  { id = "n1", level = 2, structure = "series", parents = ["a", "b"] },
  { id = "n2", level = 2, structure = "series", parents = ["c"] },
  { id = "top", level = 3, structure = "parallel", parents = ["n1", "n2"] },
]
"#;

    #[test]
    fn growth_is_round_robin_and_valid() {
        let base = parse_model(TWO_NODES).unwrap();
        let grown = grow_system(&base, 3);
        assert_eq!(grown.components.len(), 6);
        assert_eq!(grown.nodes[0].parents.len(), 4);
        assert_eq!(grown.nodes[1].parents.len(), 2);
        assert!(validate_model(&grown).is_empty());
    }

    #[test]
    fn zero_steps_rejected() {
        let base = parse_model(TWO_NODES).unwrap();
        let r = benchmark_scaling(
            &base,
            1,
            0,
            1e4,
            &Acceptance::HighestState,
            1,
            &Default::default(),
        );
        assert_eq!(r, Err(PipelineError::NoSteps));
    }

    #[test]
    fn rows_cover_every_step_and_mark_truncation() {
        let base = parse_model(TWO_NODES).unwrap();
        let config = PipelineConfig {
            row_cap: 8,
            ..Default::default()
        };
        let rows =
            benchmark_scaling(&base, 2, 2, 1e4, &Acceptance::HighestState, 1, &config).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].truncated);
        assert!(rows[2].truncated && rows[2].bn_ms.is_none());
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("step,components,bn_ms,ugfbn_ms,ratio,truncated\n0,3,"));
        assert!(text.lines().nth(3).unwrap().ends_with(",,true"));
    }
}
