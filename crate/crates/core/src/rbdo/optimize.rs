//! Design search: exhaustive enumeration for small bound boxes, otherwise a
//! continuous relaxation followed by rounding, repair and local search.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::model::{ComponentModel, DesignSpec, DesignVector};
use crate::pipeline::system_reliability_ugfbn;
use crate::ugf::{compose_refs, UFunction};

use super::{acceptance, evaluate_design, EvaluationResult, RbdoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Exhaustive when the bound box holds at most `exhaustive_limit`
    /// designs, relaxed otherwise.
    #[default]
    Auto,
    Exhaustive,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub exhaustive_limit: u128,
    pub max_iterations: usize,
    /// Stop once a step moves the relaxed design by less than this.
    pub step_tolerance: f64,
    /// Finite-difference step for the relaxed gradient.
    pub fd_step: f64,
    /// Most fractional coordinates branched on when rounding.
    pub max_round_dims: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            exhaustive_limit: 100_000,
            max_iterations: 500,
            step_tolerance: 1e-15,
            fd_step: 1e-3,
            max_round_dims: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    Exhaustive,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub phase: &'static str,
    pub iteration: usize,
    pub design: Vec<f64>,
    pub r_system: f64,
    /// Euclidean length of the move that produced this entry.
    pub step: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub path: SolverPath,
    /// Set when the result comes from the rounded relaxation and is not
    /// proven optimal.
    pub heuristic: bool,
    pub evaluations: usize,
    pub stop_reason: String,
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    /// `phase,iteration,r_system,step,feasible,design` with the design as
    /// `;`-separated counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,iteration,r_system,step,feasible,design\n");
        for e in &self.entries {
            let design: Vec<String> = e.design.iter().map(|x| format!("{x:.8}")).collect();
            let _ = writeln!(
                out,
                "{},{},{:.8},{:.8e},{},{}",
                e.phase,
                e.iteration,
                e.r_system,
                e.step,
                e.feasible,
                design.join(";")
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub best: EvaluationResult,
    pub trace: Trace,
}

fn entry(phase: &'static str, iteration: usize, e: &EvaluationResult, step: f64) -> TraceEntry {
    TraceEntry {
        phase,
        iteration,
        design: e.counts.0.iter().map(|&n| f64::from(n)).collect(),
        r_system: e.r_system,
        step,
        feasible: e.feasible.all(),
    }
}

/// Higher reliability first; ties keep the earlier candidate.
fn better(a: &EvaluationResult, b: &EvaluationResult) -> bool {
    a.r_system > b.r_system
}

fn pick_best<'a>(
    spec: &DesignSpec,
    evaluated: impl IntoIterator<Item = &'a EvaluationResult>,
) -> (Option<&'a EvaluationResult>, Option<&'a EvaluationResult>) {
    let mut best: Option<&EvaluationResult> = None;
    let mut least: Option<(&EvaluationResult, f64)> = None;
    for e in evaluated {
        if e.feasible.all() {
            if best.is_none_or(|b| better(e, b)) {
                best = Some(e);
            }
        } else {
            let v = e.violation(spec);
            let replace = match least {
                None => true,
                Some((l, lv)) => v < lv || (v == lv && better(e, l)),
            };
            if replace {
                least = Some((e, v));
            }
        }
    }
    (best, least.map(|(e, _)| e))
}

/// Finds the design with the highest reliability at `t` (hours) that meets
/// every budget, or reports the least-violating design as
/// [`RbdoError::Infeasible`].
pub fn optimize(spec: &DesignSpec, t: f64, config: &SolverConfig) -> Result<Optimum, RbdoError> {
    spec.check()?;
    let size = spec.design_space_size();
    let exhaustive = match config.method {
        SolverMethod::Exhaustive => true,
        SolverMethod::Relaxed => false,
        SolverMethod::Auto => size <= config.exhaustive_limit,
    };
    if exhaustive {
        exhaustive_search(spec, t, size)
    } else {
        Relaxation::new(spec, t, config)?.solve()
    }
}

fn design_at(spec: &DesignSpec, mut index: u128) -> DesignVector {
    let mut counts = vec![0u32; spec.units.len()];
    for (j, u) in spec.units.iter().enumerate().rev() {
        let span = u128::from(u.n_max - u.n_min + 1);
        counts[j] = u.n_min + (index % span) as u32;
        index /= span;
    }
    DesignVector(counts)
}

fn exhaustive_search(spec: &DesignSpec, t: f64, size: u128) -> Result<Optimum, RbdoError> {
    let size = usize::try_from(size).expect("exhaustive search over an addressable space");
    let evaluated = (0..size)
        .into_par_iter()
        .map(|i| evaluate_design(spec, &design_at(spec, i as u128), t))
        .collect::<Result<Vec<_>, _>>()?;
    let entries = evaluated
        .iter()
        .enumerate()
        .map(|(i, e)| entry("enumerate", i, e, 0.0))
        .collect();
    let (best, least) = pick_best(spec, &evaluated);
    let trace = Trace {
        path: SolverPath::Exhaustive,
        heuristic: false,
        evaluations: size,
        stop_reason: format!("enumerated all {size} designs"),
        entries,
    };
    match best {
        Some(b) => Ok(Optimum {
            best: b.clone(),
            trace,
        }),
        None => Err(RbdoError::Infeasible(Box::new(Optimum {
            best: least.expect("non-empty design space").clone(),
            trace,
        }))),
    }
}

struct Relaxation<'a> {
    spec: &'a DesignSpec,
    t: f64,
    config: &'a SolverConfig,
    /// `groups[j][k]` is the distribution of `k` copies of unit `j`.
    groups: Vec<Vec<UFunction>>,
    unit_components: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Budget rows: mass, power, cost.
    rows: [(Vec<f64>, f64); 3],
    evaluations: AtomicUsize,
    entries: Vec<TraceEntry>,
}

impl<'a> Relaxation<'a> {
    fn new(spec: &'a DesignSpec, t: f64, config: &'a SolverConfig) -> Result<Self, RbdoError> {
        let mut groups = Vec::with_capacity(spec.units.len());
        for u in &spec.units {
            let single = crate::lifetime::ExponentialLifetime::from_rate_e6(
                u.lambda_e6,
                u.working_performance,
            )
            .and_then(|m| m.binary_ufunction_at(t))
            .map_err(|source| crate::model::ModelError::Lifetime {
                id: u.id.clone(),
                source,
            })?;
            let mut list = vec![UFunction::degenerate(0.0), single.clone()];
            for _ in 2..=u.n_max + 1 {
                let next = compose_refs(&[list.last().unwrap(), &single], &u.psi)
                    .expect("series, parallel and xor are total");
                list.push(next);
            }
            groups.push(list);
        }
        let column = |f: fn(&crate::model::UnitSpec) -> f64| spec.units.iter().map(f).collect();
        let b = &spec.budgets;
        Ok(Self {
            spec,
            t,
            config,
            groups,
            unit_components: spec.unit_components(),
            lower: spec.units.iter().map(|u| f64::from(u.n_min)).collect(),
            upper: spec.units.iter().map(|u| f64::from(u.n_max)).collect(),
            rows: [
                (column(|u| u.mass_kg), b.mass_kg),
                (column(|u| u.power_w), b.power_w),
                (column(|u| u.cost_m), b.cost_m),
            ],
            evaluations: AtomicUsize::new(0),
            entries: Vec::new(),
        })
    }

    /// Reliability with fractional counts: `k + f` copies behave as `k`
    /// copies with probability `1 - f` and `k + 1` with probability `f`.
    fn relaxed_r(&self, x: &[f64]) -> Result<f64, RbdoError> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let mut system = self.spec.skeleton.clone();
        for (j, &xj) in x.iter().enumerate() {
            let k = xj.floor();
            let f = xj - k;
            let k = k as usize;
            let group = if f > 0.0 {
                self.groups[j][k].mix(&self.groups[j][k + 1], f)
            } else {
                self.groups[j][k].clone()
            };
            system.components[self.unit_components[j]].model = ComponentModel::Explicit {
                performances: group.performances(),
                probabilities: group.probabilities(),
            };
        }
        Ok(system_reliability_ugfbn(&system, self.t, &acceptance(self.spec))?.r_system)
    }

    fn gradient(&self, x: &[f64], r: f64) -> Result<Vec<f64>, RbdoError> {
        (0..x.len())
            .into_par_iter()
            .map(|j| {
                let mut y = x.to_vec();
                let h = if x[j] + self.config.fd_step <= self.upper[j] {
                    self.config.fd_step
                } else {
                    -self.config.fd_step
                };
                y[j] += h;
                Ok((self.relaxed_r(&y)? - r) / h)
            })
            .collect()
    }

    /// Projection onto the box intersected with the budget half-spaces
    /// (Dykstra's alternating projections).
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let sets = self.rows.len() + 1;
        let mut x = y.to_vec();
        let mut increments = vec![vec![0.0; y.len()]; sets];
        for _ in 0..2000 {
            let before = x.clone();
            for (s, inc) in increments.iter_mut().enumerate() {
                let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
                let z: Vec<f64> = if s == 0 {
                    shifted
                        .iter()
                        .zip(self.lower.iter().zip(&self.upper))
                        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                        .collect()
                } else {
                    let (a, b) = &self.rows[s - 1];
                    let dot: f64 = a.iter().zip(&shifted).map(|(p, q)| p * q).sum();
                    let norm: f64 = a.iter().map(|p| p * p).sum();
                    if dot > *b && norm > 0.0 {
                        let scale = (dot - b) / norm;
                        shifted.iter().zip(a).map(|(v, p)| v - scale * p).collect()
                    } else {
                        shifted.clone()
                    }
                };
                for ((i, sv), zv) in inc.iter_mut().zip(&shifted).zip(&z) {
                    *i = sv - zv;
                }
                x = z;
            }
            let moved = x
                .iter()
                .zip(&before)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved < 1e-13 {
                break;
            }
        }
        // The box projection is applied last within a sweep, but guard
        // against round-off anyway.
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    fn record(&mut self, phase: &'static str, iteration: usize, x: &[f64], r: f64, step: f64) {
        self.entries.push(TraceEntry {
            phase,
            iteration,
            design: x.to_vec(),
            r_system: r,
            step,
            feasible: false,
        });
    }

    fn ascend(&mut self) -> Result<(Vec<f64>, String), RbdoError> {
        let mut x = self.project(&self.lower.clone());
        let mut r = self.relaxed_r(&x)?;
        self.record("relax", 0, &x, r, 0.0);
        let mut g = self.gradient(&x, r)?;
        let mut alpha = 1.0 / g.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
        let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
        for iteration in 1..=self.config.max_iterations {
            if let Some((px, pg)) = &previous {
                // Barzilai-Borwein step for ascent.
                let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                let ss: f64 = s.iter().map(|v| v * v).sum();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                if sy.abs() > 1e-300 {
                    alpha = (ss / sy.abs()).clamp(1e-8, 1e8);
                }
            }
            let mut accepted = None;
            let mut a = alpha;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(v, d)| v + a * d).collect();
                let candidate = self.project(&trial);
                let gain: f64 = g
                    .iter()
                    .zip(candidate.iter().zip(&x))
                    .map(|(d, (c, v))| d * (c - v))
                    .sum();
                let rc = self.relaxed_r(&candidate)?;
                if rc >= r + 1e-4 * gain {
                    accepted = Some((candidate, rc));
                    break;
                }
                a *= 0.5;
            }
            let Some((next, rn)) = accepted else {
                return Ok((x, format!("line search failed at iteration {iteration}")));
            };
            let step = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            self.record("relax", iteration, &next, rn, step);
            previous = Some((std::mem::replace(&mut x, next), g));
            r = rn;
            if step < self.config.step_tolerance {
                return Ok((x, format!("step below tolerance at iteration {iteration}")));
            }
            g = self.gradient(&x, r)?;
        }
        Ok((
            x,
            format!("iteration limit {} reached", self.config.max_iterations),
        ))
    }

    fn corners(&self, x: &[f64]) -> Vec<DesignVector> {
        let mut fractional: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .map(|(j, v)| (j, (v - v.floor() - 0.5).abs()))
            .filter(|(_, d)| *d < 0.5 - 1e-9)
            .collect();
        fractional.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        fractional.truncate(self.config.max_round_dims);
        let branch: Vec<usize> = fractional.iter().map(|(j, _)| *j).collect();
        let base: Vec<u32> = x
            .iter()
            .enumerate()
            .map(|(j, v)| {
                (v.round() as u32).clamp(self.spec.units[j].n_min, self.spec.units[j].n_max)
            })
            .collect();
        (0..1usize << branch.len())
            .map(|mask| {
                let mut counts = base.clone();
                for (bit, &j) in branch.iter().enumerate() {
                    let v = if mask >> bit & 1 == 1 {
                        x[j].ceil()
                    } else {
                        x[j].floor()
                    };
                    counts[j] =
                        (v as u32).clamp(self.spec.units[j].n_min, self.spec.units[j].n_max);
                }
                DesignVector(counts)
            })
            .collect()
    }

    fn evaluate_all(&self, designs: &[DesignVector]) -> Result<Vec<EvaluationResult>, RbdoError> {
        self.evaluations.fetch_add(designs.len(), Ordering::Relaxed);
        designs
            .par_iter()
            .map(|d| evaluate_design(self.spec, d, self.t))
            .collect()
    }

    /// Moves a design towards feasibility one unit at a time.
    fn repair(&mut self, mut current: EvaluationResult) -> Result<EvaluationResult, RbdoError> {
        let mut iteration = 0;
        while !current.feasible.all() {
            iteration += 1;
            let fix_budgets = !current.feasible.budgets();
            let candidates: Vec<DesignVector> = self
                .spec
                .units
                .iter()
                .enumerate()
                .filter_map(|(j, u)| {
                    let n = current.counts.0[j];
                    let mut c = current.counts.clone();
                    if fix_budgets && n > u.n_min {
                        c.0[j] = n - 1;
                        Some(c)
                    } else if !fix_budgets && n < u.n_max {
                        c.0[j] = n + 1;
                        Some(c)
                    } else {
                        None
                    }
                })
                .collect();
            let evaluated = self.evaluate_all(&candidates)?;
            let next = if fix_budgets {
                evaluated.into_iter().min_by(|a, b| {
                    a.violation(self.spec)
                        .total_cmp(&b.violation(self.spec))
                        .then(b.r_system.total_cmp(&a.r_system))
                })
            } else {
                evaluated
                    .into_iter()
                    .filter(|e| e.feasible.budgets() && e.r_system > current.r_system)
                    .fold(None, |best: Option<EvaluationResult>, e| match best {
                        Some(b) if !better(&e, &b) => Some(b),
                        _ => Some(e),
                    })
            };
            match next {
                Some(n) => {
                    self.entries.push(entry("repair", iteration, &n, 1.0));
                    current = n;
                }
                None => break,
            }
        }
        Ok(current)
    }

    /// Greedy single and paired +-1 moves while reliability improves.
    fn improve(&mut self, mut current: EvaluationResult) -> Result<EvaluationResult, RbdoError> {
        let units = &self.spec.units;
        let mut iteration = 0;
        loop {
            iteration += 1;
            let mut moves = Vec::new();
            for j in 0..units.len() {
                for delta in [1i64, -1] {
                    let mut c = current.counts.0.clone();
                    let v = i64::from(c[j]) + delta;
                    if v >= i64::from(units[j].n_min) && v <= i64::from(units[j].n_max) {
                        c[j] = v as u32;
                        moves.push(DesignVector(c));
                    }
                }
            }
            for up in 0..units.len() {
                for down in 0..units.len() {
                    let c = &current.counts.0;
                    if up != down && c[up] < units[up].n_max && c[down] > units[down].n_min {
                        let mut c = c.clone();
                        c[up] += 1;
                        c[down] -= 1;
                        moves.push(DesignVector(c));
                    }
                }
            }
            let evaluated = self.evaluate_all(&moves)?;
            let mut best: Option<&EvaluationResult> = None;
            for e in evaluated.iter().filter(|e| e.feasible.all()) {
                if e.r_system > current.r_system && best.is_none_or(|b| better(e, b)) {
                    best = Some(e);
                }
            }
            match best {
                Some(b) => {
                    let step = b
                        .counts
                        .0
                        .iter()
                        .zip(&current.counts.0)
                        .map(|(a, c)| (f64::from(*a) - f64::from(*c)).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    self.entries.push(entry("improve", iteration, b, step));
                    current = b.clone();
                }
                None => return Ok(current),
            }
        }
    }

    fn solve(mut self) -> Result<Optimum, RbdoError> {
        let (x, stop) = self.ascend()?;
        let corners = self.corners(&x);
        let evaluated = self.evaluate_all(&corners)?;
        for (i, e) in evaluated.iter().enumerate() {
            self.entries.push(entry("round", i, e, 0.0));
        }
        let (best, least) = pick_best(self.spec, &evaluated);
        let start = match best {
            Some(b) => b.clone(),
            None => {
                let least = least.expect("at least one corner").clone();
                self.repair(least)?
            }
        };
        let result = if start.feasible.all() {
            self.improve(start)?
        } else {
            start
        };
        let trace = Trace {
            path: SolverPath::Relaxed,
            heuristic: true,
            evaluations: self.evaluations.load(Ordering::Relaxed),
            stop_reason: stop,
            entries: self.entries,
        };
        let optimum = Optimum {
            best: result,
            trace,
        };
        if optimum.best.feasible.all() {
            Ok(optimum)
        } else {
            Err(RbdoError::Infeasible(Box::new(optimum)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_indexing_is_odometer_order() {
        let spec = crate::model::parse_document(TOY).unwrap().design.unwrap();
        assert_eq!(design_at(&spec, 0).0, vec![1, 1]);
        assert_eq!(design_at(&spec, 1).0, vec![1, 2]);
        assert_eq!(design_at(&spec, 3).0, vec![2, 1]);
    }

    const TOY: &str = r#"
levels = 2
nodes = [{ id = "s", level = 2, structure = "series", parents = ["a", "b"] }]

[design]
mission_time_h = 1000
budgets = { mass_kg = 10, power_w = 10, cost_m = 10, reliability = "0.5" }
units = [
  { id = "a", mass_kg = 1, power_w = 1, cost_m = 1, lambda_e6 = 100, psi = "parallel", n_min = 1, n_max = 3 },
  { id = "b", mass_kg = 1, power_w = 1, cost_m = 1, lambda_e6 = 100, psi = "parallel", n_min = 1, n_max = 3 },
]
"#;
}
