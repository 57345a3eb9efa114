//! Universal generating functions (u-functions) for discrete performance
//! distributions and their composition under structure functions.
//!
//! A u-function `Σ p_i z^{g_i}` is stored as an ordered list of
//! `(performance, probability)` terms. Composition multiplies probabilities
//! and combines performances through a [`StructureFunction`].

use std::fmt;

use thiserror::Error;

/// Performance keys closer than this are treated as the same key.
pub const KEY_TOLERANCE: f64 = 1e-9;

/// Allowed deviation of a distribution's total probability from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UgfError {
    #[error("{performances} performances but {probabilities} probabilities")]
    LengthMismatch {
        performances: usize,
        probabilities: usize,
    },
    #[error("a u-function needs at least one term")]
    Empty,
    #[error("probability {value} at position {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("performance {value} at position {index} is not finite")]
    NonFinitePerformance { index: usize, value: f64 },
    #[error("custom structure table has no entry for inputs {tuple:?}")]
    IncompleteCustomTable { tuple: Vec<f64> },
    #[error("custom structure table expects {expected} inputs, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("composition needs at least one input")]
    NoInputs,
}

/// One `p·z^g` term of a u-function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub performance: f64,
    pub probability: f64,
}

/// Canonical u-function: keys strictly increasing, no zero-probability terms,
/// probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct UFunction {
    terms: Vec<Term>,
}

/// Builds a u-function from parallel performance/probability vectors.
pub fn make_ufunction(performances: &[f64], probabilities: &[f64]) -> Result<UFunction, UgfError> {
    UFunction::new(performances, probabilities)
}

impl UFunction {
    pub fn new(performances: &[f64], probabilities: &[f64]) -> Result<Self, UgfError> {
        if performances.len() != probabilities.len() {
            return Err(UgfError::LengthMismatch {
                performances: performances.len(),
                probabilities: probabilities.len(),
            });
        }
        if performances.is_empty() {
            return Err(UgfError::Empty);
        }
        for (index, &value) in performances.iter().enumerate() {
            if !value.is_finite() {
                return Err(UgfError::NonFinitePerformance { index, value });
            }
        }
        for (index, &value) in probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(UgfError::ProbabilityOutOfRange { index, value });
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(UgfError::NotNormalized { sum });
        }
        let terms = performances
            .iter()
            .zip(probabilities)
            .map(|(&performance, &probability)| Term {
                performance,
                probability,
            })
            .collect();
        Ok(Self::canonical(terms))
    }

    /// The distribution concentrated on a single performance level.
    pub fn degenerate(performance: f64) -> Self {
        Self {
            terms: vec![Term {
                performance,
                probability: 1.0,
            }],
        }
    }

    /// Sorts, merges keys within [`KEY_TOLERANCE`] onto the smallest key of
    /// each run, and drops terms whose probability is exactly zero.
    pub(crate) fn canonical(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|a, b| a.performance.total_cmp(&b.performance));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for term in terms {
            match merged.last_mut() {
                Some(last) if term.performance - last.performance <= KEY_TOLERANCE => {
                    last.probability += term.probability;
                }
                _ => merged.push(term),
            }
        }
        merged.retain(|t| t.probability != 0.0);
        Self { terms: merged }
    }

    /// Canonical form of arbitrary (performance, probability) pairs without
    /// validation.
    pub(crate) fn canonical_pairs(performances: &[f64], probabilities: &[f64]) -> Self {
        Self::canonical(
            performances
                .iter()
                .zip(probabilities)
                .map(|(&performance, &probability)| Term {
                    performance,
                    probability,
                })
                .collect(),
        )
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn performances(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.performance).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.probability).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.terms.iter().map(|t| t.probability).sum()
    }

    pub fn min_performance(&self) -> f64 {
        self.terms.first().map_or(0.0, |t| t.performance)
    }

    pub fn max_performance(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.performance)
    }

    /// Probability of the term at `performance`, zero if absent.
    pub fn probability_of(&self, performance: f64) -> f64 {
        self.terms
            .iter()
            .find(|t| (t.performance - performance).abs() <= KEY_TOLERANCE)
            .map_or(0.0, |t| t.probability)
    }

    /// Drops terms below `threshold` and renormalizes the remainder.
    pub fn pruned(&self, threshold: f64) -> Self {
        let kept: Vec<Term> = self
            .terms
            .iter()
            .copied()
            .filter(|t| t.probability >= threshold)
            .collect();
        let total: f64 = kept.iter().map(|t| t.probability).sum();
        if kept.is_empty() || total <= 0.0 {
            return self.clone();
        }
        Self {
            terms: kept
                .into_iter()
                .map(|t| Term {
                    probability: t.probability / total,
                    ..t
                })
                .collect(),
        }
    }

    /// Convex combination `(1 - weight)·self + weight·other`.
    pub fn mix(&self, other: &UFunction, weight: f64) -> Self {
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .map(|t| Term {
                probability: t.probability * (1.0 - weight),
                ..*t
            })
            .collect();
        terms.extend(other.terms.iter().map(|t| Term {
            probability: t.probability * weight,
            ..*t
        }));
        Self::canonical(terms)
    }

    /// Largest absolute probability difference over the union of keys.
    pub fn max_abs_diff(&self, other: &UFunction) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.terms {
            worst = worst.max((t.probability - other.probability_of(t.performance)).abs());
        }
        for t in &other.terms {
            worst = worst.max((t.probability - self.probability_of(t.performance)).abs());
        }
        worst
    }
}

impl fmt::Display for UFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}·z^{}", t.probability, t.performance)?;
        }
        Ok(())
    }
}

/// Explicit mapping from input performance tuples to an output performance.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomTable {
    arity: usize,
    rows: Vec<(Vec<f64>, f64)>,
}

impl CustomTable {
    pub fn new(arity: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self, UgfError> {
        for (inputs, _) in &rows {
            if inputs.len() != arity {
                return Err(UgfError::ArityMismatch {
                    expected: arity,
                    actual: inputs.len(),
                });
            }
        }
        Ok(Self { arity, rows })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    pub fn lookup(&self, tuple: &[f64]) -> Option<f64> {
        self.rows
            .iter()
            .find(|(inputs, _)| {
                inputs
                    .iter()
                    .zip(tuple)
                    .all(|(a, b)| (a - b).abs() <= KEY_TOLERANCE)
            })
            .map(|(_, out)| *out)
    }
}

/// Rule combining input performances into an output performance.
///
/// Relationship codes used in tabular data: 1 = parallel (sum),
/// 2 = series (min), 3 = xor.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureFunction {
    Series,
    Parallel,
    /// `a ⊕ b = a + b` when at most one operand is nonzero, otherwise 0;
    /// folded left to right for more inputs.
    Xor,
    Custom(CustomTable),
}

fn is_zero(x: f64) -> bool {
    x.abs() <= KEY_TOLERANCE
}

impl StructureFunction {
    pub fn name(&self) -> &'static str {
        match self {
            StructureFunction::Series => "series",
            StructureFunction::Parallel => "parallel",
            StructureFunction::Xor => "xor",
            StructureFunction::Custom(_) => "custom",
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(StructureFunction::Parallel),
            2 => Some(StructureFunction::Series),
            3 => Some(StructureFunction::Xor),
            _ => None,
        }
    }

    fn pair(&self, a: f64, b: f64) -> f64 {
        match self {
            StructureFunction::Series => a.min(b),
            StructureFunction::Parallel => a + b,
            StructureFunction::Xor => {
                if is_zero(a) || is_zero(b) {
                    a + b
                } else {
                    0.0
                }
            }
            StructureFunction::Custom(_) => unreachable!("custom tables are not pairwise"),
        }
    }

    /// Evaluates the structure function on one input tuple.
    pub fn apply(&self, inputs: &[f64]) -> Result<f64, UgfError> {
        match self {
            StructureFunction::Custom(table) => {
                if inputs.len() != table.arity() {
                    return Err(UgfError::ArityMismatch {
                        expected: table.arity(),
                        actual: inputs.len(),
                    });
                }
                table
                    .lookup(inputs)
                    .ok_or_else(|| UgfError::IncompleteCustomTable {
                        tuple: inputs.to_vec(),
                    })
            }
            _ => {
                let (first, rest) = inputs.split_first().ok_or(UgfError::NoInputs)?;
                Ok(rest.iter().fold(*first, |acc, &x| self.pair(acc, x)))
            }
        }
    }
}

fn compose_pair(a: &UFunction, b: &UFunction, w: &StructureFunction) -> UFunction {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for ta in &a.terms {
        for tb in &b.terms {
            terms.push(Term {
                performance: w.pair(ta.performance, tb.performance),
                probability: ta.probability * tb.probability,
            });
        }
    }
    UFunction::canonical(terms)
}

/// Composition operator `Ψ_w(u_1, …, u_n)`.
///
/// Series, parallel and xor fold pairwise from the left; custom tables are
/// evaluated on full input tuples.
pub fn compose(inputs: &[UFunction], w: &StructureFunction) -> Result<UFunction, UgfError> {
    compose_refs(&inputs.iter().collect::<Vec<_>>(), w)
}

pub(crate) fn compose_refs(
    inputs: &[&UFunction],
    w: &StructureFunction,
) -> Result<UFunction, UgfError> {
    let (first, rest) = inputs.split_first().ok_or(UgfError::NoInputs)?;
    match w {
        StructureFunction::Custom(table) => {
            if inputs.len() != table.arity() {
                return Err(UgfError::ArityMismatch {
                    expected: table.arity(),
                    actual: inputs.len(),
                });
            }
            let mut index = vec![0usize; inputs.len()];
            let mut terms = Vec::new();
            let mut tuple = vec![0.0; inputs.len()];
            loop {
                let mut probability = 1.0;
                for (k, u) in inputs.iter().enumerate() {
                    let term = u.terms[index[k]];
                    tuple[k] = term.performance;
                    probability *= term.probability;
                }
                let performance =
                    table
                        .lookup(&tuple)
                        .ok_or_else(|| UgfError::IncompleteCustomTable {
                            tuple: tuple.clone(),
                        })?;
                terms.push(Term {
                    performance,
                    probability,
                });
                if !advance(&mut index, |k| inputs[k].len()) {
                    break;
                }
            }
            Ok(UFunction::canonical(terms))
        }
        _ => {
            let mut acc = (*first).clone();
            for u in rest {
                acc = compose_pair(&acc, u, w);
            }
            Ok(acc)
        }
    }
}

/// Mixed-radix odometer step (last position fastest). Returns false after
/// the final combination.
pub(crate) fn advance(index: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..index.len()).rev() {
        index[k] += 1;
        if index[k] < radix(k) {
            return true;
        }
        index[k] = 0;
    }
    false
}

/// `P(G ≥ demand)`.
pub fn prob_at_least(u: &UFunction, demand: f64) -> f64 {
    u.terms
        .iter()
        .filter(|t| t.performance >= demand - KEY_TOLERANCE)
        .map(|t| t.probability)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(g: &[f64], p: &[f64]) -> UFunction {
        UFunction::new(g, p).unwrap()
    }

    #[test]
    fn worked_example_components() {
        let u1 = u(&[0.0, 1.0], &[0.4, 0.6]);
        assert_eq!(u1.performances(), vec![0.0, 1.0]);
        assert_eq!(u1.probabilities(), vec![0.4, 0.6]);
        let u2 = u(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]);
        assert_eq!(u2.len(), 3);
    }

    #[test]
    fn duplicate_keys_merge() {
        let m = u(&[1.0, 1.0], &[0.3, 0.7]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.terms()[0].performance, 1.0);
        assert!((m.terms()[0].probability - 1.0).abs() < 1e-15);
    }

    #[test]
    fn near_keys_merge_onto_smaller() {
        let m = u(&[1.0 + 5e-10, 1.0, 2.0], &[0.25, 0.25, 0.5]);
        assert_eq!(m.performances(), vec![1.0, 2.0]);
    }

    #[test]
    fn constructor_errors() {
        assert!(matches!(
            UFunction::new(&[0.0], &[0.5, 0.5]),
            Err(UgfError::LengthMismatch { .. })
        ));
        assert!(matches!(
            UFunction::new(&[0.0, 1.0], &[1.2, -0.2]),
            Err(UgfError::ProbabilityOutOfRange { index: 0, .. })
        ));
        match UFunction::new(&[0.0, 1.0], &[0.5, 0.4]) {
            Err(UgfError::NotNormalized { sum }) => assert!((sum - 0.9).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(UFunction::new(&[], &[]), Err(UgfError::Empty));
    }

    #[test]
    fn parallel_then_series_reproduces_worked_example() {
        let u1 = u(&[0.0, 1.0], &[0.4, 0.6]);
        let u2 = u(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]);
        let u3 = u(&[0.0, 1.0], &[0.5, 0.5]);
        let par = compose(&[u2, u3], &StructureFunction::Parallel).unwrap();
        let expected = u(&[0.0, 1.0, 2.0, 3.0], &[0.10, 0.25, 0.40, 0.25]);
        assert!(par.max_abs_diff(&expected) < 1e-12);
        assert!((prob_at_least(&par, 2.0) - 0.65).abs() < 1e-12);
        let top = compose(&[par, u1], &StructureFunction::Series).unwrap();
        assert_eq!(top.performances(), vec![0.0, 1.0]);
        assert!((top.probabilities()[0] - 0.46).abs() < 1e-12);
        assert!((top.probabilities()[1] - 0.54).abs() < 1e-12);
        assert!((prob_at_least(&top, 1.0) - 0.54).abs() < 1e-12);
        assert_eq!(prob_at_least(&top, 0.0), 1.0);
    }

    #[test]
    fn identities() {
        let x = u(&[0.0, 1.0, 2.5], &[0.2, 0.3, 0.5]);
        let zero = UFunction::degenerate(0.0);
        let par = compose(&[x.clone(), zero], &StructureFunction::Parallel).unwrap();
        assert_eq!(par, x);
        let high = UFunction::degenerate(10.0);
        let ser = compose(&[x.clone(), high], &StructureFunction::Series).unwrap();
        assert_eq!(ser, x);
    }

    #[test]
    fn xor_semantics() {
        let w = StructureFunction::Xor;
        assert_eq!(w.apply(&[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(w.apply(&[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(w.apply(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(w.apply(&[0.0, 0.0]).unwrap(), 0.0);
        // left fold: (1 ⊕ 1) ⊕ 1 = 0 ⊕ 1
        assert_eq!(w.apply(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn custom_table_errors() {
        let table =
            CustomTable::new(2, vec![(vec![0.0, 0.0], 0.0), (vec![0.0, 1.0], 1.0)]).unwrap();
        let w = StructureFunction::Custom(table);
        let a = u(&[0.0, 1.0], &[0.5, 0.5]);
        match compose(&[a.clone(), a.clone()], &w) {
            Err(UgfError::IncompleteCustomTable { tuple }) => assert_eq!(tuple, vec![1.0, 0.0]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            compose(std::slice::from_ref(&a), &w),
            Err(UgfError::ArityMismatch {
                expected: 2,
                actual: 1
            })
        ));
        assert!(CustomTable::new(2, vec![(vec![0.0], 0.0)]).is_err());
    }

    #[test]
    fn custom_table_composes_full_tuples() {
        // min(a, b + c) written out as a table over binary inputs
        let mut rows = Vec::new();
        for a in [0.0, 1.0] {
            for b in [0.0, 1.0] {
                for c in [0.0, 1.0] {
                    rows.push((vec![a, b, c], f64::min(a, b + c)));
                }
            }
        }
        let w = StructureFunction::Custom(CustomTable::new(3, rows).unwrap());
        let a = u(&[0.0, 1.0], &[0.1, 0.9]);
        let out = compose(&[a.clone(), a.clone(), a.clone()], &w).unwrap();
        // P(up) = 0.9 · (1 - 0.01)
        assert!((out.probability_of(1.0) - 0.9 * 0.99).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_terms_dropped() {
        let x = u(&[0.0, 1.0], &[0.0, 1.0]);
        assert_eq!(x.len(), 1);
        assert_eq!(x.performances(), vec![1.0]);
    }

    #[test]
    fn pruning_is_opt_in() {
        let a = u(&[0.0, 1.0], &[1e-16, 1.0 - 1e-16]);
        assert_eq!(a.len(), 2);
        let p = a.pruned(1e-15);
        assert_eq!(p.len(), 1);
        assert_eq!(p.probabilities(), vec![1.0]);
    }

    #[test]
    fn codes_map_to_kinds() {
        assert_eq!(
            StructureFunction::from_code(1),
            Some(StructureFunction::Parallel)
        );
        assert_eq!(
            StructureFunction::from_code(2),
            Some(StructureFunction::Series)
        );
        assert_eq!(
            StructureFunction::from_code(3),
            Some(StructureFunction::Xor)
        );
        assert_eq!(StructureFunction::from_code(4), None);
    }
}
