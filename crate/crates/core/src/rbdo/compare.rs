//! Baseline versus optimum against the budgets, and the text report.

use std::fmt::Write as _;

use crate::model::{Budgets, DesignSpec, DesignVector};

use super::{evaluate_unchecked, EvaluationResult, Optimum, RbdoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mass,
    Power,
    Cost,
    Reliability,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Mass,
        Metric::Power,
        Metric::Cost,
        Metric::Reliability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mass => "mass_kg",
            Metric::Power => "power_w",
            Metric::Cost => "cost_m",
            Metric::Reliability => "reliability",
        }
    }
}

/// One value per metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mass_kg: f64,
    pub power_w: f64,
    pub cost_m: f64,
    pub reliability: f64,
}

impl Metrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Mass => self.mass_kg,
            Metric::Power => self.power_w,
            Metric::Cost => self.cost_m,
            Metric::Reliability => self.reliability,
        }
    }
}

impl From<&Budgets> for Metrics {
    fn from(b: &Budgets) -> Self {
        Self {
            mass_kg: b.mass_kg,
            power_w: b.power_w,
            cost_m: b.cost_m,
            reliability: b.reliability,
        }
    }
}

impl From<&EvaluationResult> for Metrics {
    fn from(e: &EvaluationResult) -> Self {
        Self {
            mass_kg: e.mass_kg,
            power_w: e.power_w,
            cost_m: e.cost_m,
            reliability: e.r_system,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub metric: Metric,
    pub budget: f64,
    pub baseline: f64,
    pub optimum: f64,
    /// Value over budget.
    pub k_baseline: f64,
    pub k_optimum: f64,
    /// Signed `(value - budget) / budget` in percent.
    pub delta_s1: f64,
    pub delta_s2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<MetricRow>,
}

impl ComparisonReport {
    pub fn from_values(budget: &Metrics, baseline: &Metrics, optimum: &Metrics) -> Self {
        let rows = Metric::ALL
            .iter()
            .map(|&metric| {
                let b = budget.get(metric);
                let base = baseline.get(metric);
                let opt = optimum.get(metric);
                MetricRow {
                    metric,
                    budget: b,
                    baseline: base,
                    optimum: opt,
                    k_baseline: base / b,
                    k_optimum: opt / b,
                    delta_s1: (base - b) / b * 100.0,
                    delta_s2: (opt - b) / b * 100.0,
                }
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, metric: Metric) -> &MetricRow {
        self.rows.iter().find(|r| r.metric == metric).unwrap()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from(
            "metric,budget,baseline,optimum,k_baseline,k_optimum,delta_s1_pct,delta_s2_pct\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.8},{:.8},{:.8},{:.8},{:.8},{:.8},{:.8}",
                r.metric.name(),
                r.budget,
                r.baseline,
                r.optimum,
                r.k_baseline,
                r.k_optimum,
                r.delta_s1,
                r.delta_s2
            );
        }
        out
    }
}

/// Evaluates both designs at `t` (hours) and compares them with the
/// budgets. The baseline may lie outside the unit bounds.
pub fn compare_schemes(
    spec: &DesignSpec,
    baseline: &DesignVector,
    optimum: &DesignVector,
    t: f64,
) -> Result<ComparisonReport, RbdoError> {
    let base = evaluate_unchecked(spec, baseline, t)?;
    let opt = evaluate_unchecked(spec, optimum, t)?;
    Ok(ComparisonReport::from_values(
        &Metrics::from(&spec.budgets),
        &Metrics::from(&base),
        &Metrics::from(&opt),
    ))
}

fn describe(out: &mut String, spec: &DesignSpec, e: &EvaluationResult) {
    let f = &e.feasible;
    let _ = writeln!(out, "design = {}", e.counts);
    for (u, n) in spec.units.iter().zip(&e.counts.0) {
        let _ = writeln!(out, "  {} = {}", u.id, n);
    }
    let _ = writeln!(
        out,
        "mass_kg = {:.8} (budget {:.8}, ok = {})",
        e.mass_kg, spec.budgets.mass_kg, f.mass
    );
    let _ = writeln!(
        out,
        "power_w = {:.8} (budget {:.8}, ok = {})",
        e.power_w, spec.budgets.power_w, f.power
    );
    let _ = writeln!(
        out,
        "cost_m = {:.8} (budget {:.8}, ok = {})",
        e.cost_m, spec.budgets.cost_m, f.cost
    );
    let _ = writeln!(
        out,
        "r_system = {:.8} (budget {:.8}, ok = {})",
        e.r_system, spec.budgets.reliability, f.reliability
    );
    let _ = writeln!(out, "within_bounds = {}", f.bounds);
    let _ = writeln!(out, "feasible = {}", f.all());
}

/// Plain-text optimization report: the chosen design, its totals and
/// flags, the comparison table when a baseline is available, and the
/// iteration trace as CSV.
pub fn render_report(
    spec: &DesignSpec,
    optimum: &Optimum,
    comparison: Option<&ComparisonReport>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[optimum]");
    describe(&mut out, spec, &optimum.best);
    let trace = &optimum.trace;
    let _ = writeln!(out, "\n[solver]");
    let _ = writeln!(out, "path = {:?}", trace.path);
    let _ = writeln!(out, "heuristic = {}", trace.heuristic);
    let _ = writeln!(out, "evaluations = {}", trace.evaluations);
    let _ = writeln!(out, "stop = {}", trace.stop_reason);
    if let Some(c) = comparison {
        let _ = writeln!(out, "\n[comparison]");
        out.push_str(&c.to_table());
    }
    let _ = writeln!(out, "\n[trace]");
    out.push_str(&trace.to_csv());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_only(p: f64) -> Metrics {
        Metrics {
            mass_kg: 1.0,
            power_w: p,
            cost_m: 1.0,
            reliability: 1.0,
        }
    }

    #[test]
    fn percentages_use_the_budget_as_base() {
        let r = ComparisonReport::from_values(
            &power_only(140.0),
            &power_only(314.0),
            &power_only(140.0),
        );
        let p = r.row(Metric::Power);
        assert!((p.delta_s1 - 124.2857142857).abs() < 1e-9);
        assert_eq!(p.delta_s2, 0.0);
        assert!((p.k_baseline - 314.0 / 140.0).abs() < 1e-15);
    }

    #[test]
    fn reliability_sign() {
        let budget = Metrics {
            reliability: 0.9,
            ..power_only(1.0)
        };
        let opt = Metrics {
            reliability: 0.913,
            ..power_only(1.0)
        };
        let r = ComparisonReport::from_values(&budget, &opt, &opt);
        assert!(r.row(Metric::Reliability).delta_s2 > 0.0);
    }
}
