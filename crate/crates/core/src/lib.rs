//! Reliability analysis of hierarchical multi-state systems.
//!
//! Bottom components are combined into level-2 subsystems with universal
//! generating functions ([`ugf`]); the upper levels are evaluated exactly as a
//! discrete Bayesian network ([`bayesnet`]). [`pipeline`] ties both together
//! and also runs the pure-network reference, [`mc`] is a sampling oracle, and
//! [`rbdo`] searches redundancy designs under mass, power and cost budgets.

pub mod bayesnet;
pub mod lifetime;
pub mod mc;
pub mod model;
pub mod pipeline;
pub mod rbdo;
pub mod ugf;

pub use bayesnet::{BayesianNetwork, BnError, Cpt, DiscreteNode};
pub use lifetime::{ExponentialLifetime, LifetimeError};
pub use model::{HierarchicalSystem, ModelError};
pub use pipeline::{Acceptance, Analysis, PipelineConfig, PipelineError};
pub use ugf::{compose, make_ufunction, prob_at_least, StructureFunction, UFunction, UgfError};

/// Formats with 8 decimals and strips trailing zeros, for messages.
pub(crate) fn short(x: f64) -> String {
    let s = format!("{x:.8}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
