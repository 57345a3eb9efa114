//! Redundancy design under mass, power, cost and reliability budgets.

mod compare;
mod optimize;

use thiserror::Error;

use crate::model::{instantiate_design, DesignSpec, DesignVector, ModelError};
use crate::pipeline::{system_reliability_ugfbn, Acceptance, PipelineError};

pub use compare::{compare_schemes, render_report, ComparisonReport, Metric, MetricRow, Metrics};
pub use optimize::{optimize, Optimum, SolverConfig, SolverMethod, SolverPath, Trace, TraceEntry};

/// Slack allowed when comparing totals against budgets.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RbdoError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no feasible design found; least-violating design {}", .0.best.counts)]
    Infeasible(Box<Optimum>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub mass_kg: f64,
    pub power_w: f64,
    pub cost_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub mass: bool,
    pub power: bool,
    pub cost: bool,
    pub reliability: bool,
    pub bounds: bool,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.mass && self.power && self.cost && self.reliability && self.bounds
    }

    pub fn budgets(&self) -> bool {
        self.mass && self.power && self.cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub counts: DesignVector,
    pub mass_kg: f64,
    pub power_w: f64,
    pub cost_m: f64,
    pub r_system: f64,
    pub feasible: Feasibility,
}

impl EvaluationResult {
    pub fn totals(&self) -> Totals {
        Totals {
            mass_kg: self.mass_kg,
            power_w: self.power_w,
            cost_m: self.cost_m,
        }
    }

    /// Sum of relative constraint excesses; 0 for feasible designs.
    pub fn violation(&self, spec: &DesignSpec) -> f64 {
        let b = &spec.budgets;
        let over = |v: f64, budget: f64| ((v - budget) / budget).max(0.0);
        let mut v = over(self.mass_kg, b.mass_kg)
            + over(self.power_w, b.power_w)
            + over(self.cost_m, b.cost_m);
        if b.reliability > 0.0 {
            v += ((b.reliability - self.r_system) / b.reliability).max(0.0);
        }
        if !self.feasible.bounds {
            v += 1.0;
        }
        v
    }
}

/// Mass, power and cost of a design: each attribute times the unit count,
/// summed over units.
pub fn budget_totals(spec: &DesignSpec, counts: &DesignVector) -> Result<Totals, ModelError> {
    spec.check_length(counts)?;
    let mut t = Totals {
        mass_kg: 0.0,
        power_w: 0.0,
        cost_m: 0.0,
    };
    for (u, &n) in spec.units.iter().zip(&counts.0) {
        let n = f64::from(n);
        t.mass_kg += u.mass_kg * n;
        t.power_w += u.power_w * n;
        t.cost_m += u.cost_m * n;
    }
    Ok(t)
}

pub(crate) fn acceptance(spec: &DesignSpec) -> Acceptance {
    spec.demand
        .map_or(Acceptance::HighestState, Acceptance::Demand)
}

fn flags(spec: &DesignSpec, totals: &Totals, r_system: f64, bounds: bool) -> Feasibility {
    let b = &spec.budgets;
    Feasibility {
        mass: totals.mass_kg <= b.mass_kg + BUDGET_TOLERANCE,
        power: totals.power_w <= b.power_w + BUDGET_TOLERANCE,
        cost: totals.cost_m <= b.cost_m + BUDGET_TOLERANCE,
        reliability: r_system >= b.reliability - BUDGET_TOLERANCE,
        bounds,
    }
}

/// Totals, reliability at `t` (hours) and feasibility of a design within
/// the unit bounds.
pub fn evaluate_design(
    spec: &DesignSpec,
    counts: &DesignVector,
    t: f64,
) -> Result<EvaluationResult, RbdoError> {
    spec.check_bounds(counts)?;
    evaluate_any(spec, counts, t)
}

/// Like [`evaluate_design`] but accepts counts outside the unit bounds (at
/// least 1 each) and reports them through the `bounds` flag.
pub fn evaluate_unchecked(
    spec: &DesignSpec,
    counts: &DesignVector,
    t: f64,
) -> Result<EvaluationResult, RbdoError> {
    evaluate_any(spec, counts, t)
}

fn evaluate_any(
    spec: &DesignSpec,
    counts: &DesignVector,
    t: f64,
) -> Result<EvaluationResult, RbdoError> {
    let totals = budget_totals(spec, counts)?;
    let in_bounds = spec.check_bounds(counts).is_ok();
    let system = if in_bounds {
        instantiate_design(spec, counts)?
    } else {
        crate::model::instantiate_unchecked(spec, counts)?
    };
    let r_system = system_reliability_ugfbn(&system, t, &acceptance(spec))?.r_system;
    Ok(EvaluationResult {
        counts: counts.clone(),
        mass_kg: totals.mass_kg,
        power_w: totals.power_w,
        cost_m: totals.cost_m,
        r_system,
        feasible: flags(spec, &totals, r_system, in_bounds),
    })
}
