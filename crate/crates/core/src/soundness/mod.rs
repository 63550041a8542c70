//! One-sided violation measures, the sampled and weighted unsoundness cost,
//! and a sampling falsifier that searches for violating abstract elements.
//!
//! Soundness established here is a sampled verdict: an empty falsifier
//! result means no violation was found on the sampled elements and states.

mod falsify;
mod verifier;

pub use falsify::{falsify, structured_boxes, FalsifyBudget};
pub use verifier::{ExternalVerifier, SamplingVerifier, Verdict, Verifier, VerifierError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    sample_concretization, AbstractElement, ConcreteState, Constraint, DomainError, GridSpec, NeuronId,
    NeuronShape,
};
use crate::interp::{EvalContext, EvalFault, NeuronMeta, Transformer};
use crate::ops::{self, OperatorKind};

/// Finite stand-in for the infinite violation of a faulting candidate.
pub const FAULT_PENALTY: f64 = 1e9;

/// Relative tolerance below which a violation is treated as rounding noise.
pub const VIOLATION_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SoundnessError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("site is invalid for this element: {0}")]
    BadSite(String),
    #[error("{op} transformer expects {expected} shapes, element is {got}")]
    DomainMismatch {
        op: String,
        expected: String,
        got: String,
    },
}

/// One-sided distance by which `m` escapes constraint `c` at state `x`.
/// Returns `+∞` when an affine bound cannot be evaluated at `x`.
pub fn epsilon(m: f64, c: &Constraint, x: &ConcreteState) -> f64 {
    match c.bound_at(&x.values) {
        Ok(b) if c.is_upper() => (m - b).max(0.0),
        Ok(b) => (b - m).max(0.0),
        Err(_) => f64::INFINITY,
    }
}

fn effective(eps: f64, m: f64) -> f64 {
    if eps > VIOLATION_RTOL * m.abs().max(1.0) {
        eps.min(FAULT_PENALTY)
    } else {
        0.0
    }
}

/// Where the operator sits relative to an element: the input neurons and,
/// for affine operators, the incoming weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub prev: Vec<NeuronId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
}

impl Site {
    /// Default placement on an `n`-neuron element: unary operators read the
    /// last neuron, `add` the last two, and `affine` sums every neuron.
    pub fn for_op(op: OperatorKind, n: usize) -> Site {
        let prev: Vec<NeuronId> = match op {
            OperatorKind::Affine => (0..n).collect(),
            OperatorKind::Add => (n.saturating_sub(2)..n).collect(),
            _ => n.checked_sub(1).into_iter().collect(),
        };
        let weight = if op == OperatorKind::Affine {
            vec![1.0; prev.len()]
        } else {
            Vec::new()
        };
        Site {
            prev,
            weight,
            bias: 0.0,
        }
    }

    /// Concrete operator output at state `x`.
    pub fn concrete(&self, op: OperatorKind, x: &[f64]) -> f64 {
        let inputs: Vec<f64> = self.prev.iter().map(|&i| x[i]).collect();
        match op {
            OperatorKind::Affine => ops::affine(&self.weight, self.bias, &inputs),
            OperatorKind::Add => inputs.iter().sum(),
            _ => op.apply(inputs[0]),
        }
    }

    fn check(&self, op: OperatorKind, n: usize) -> Result<(), SoundnessError> {
        let want = match op {
            OperatorKind::Add => Some(2),
            OperatorKind::Affine => None,
            _ => Some(1),
        };
        if self.prev.is_empty() || want.is_some_and(|w| w != self.prev.len()) {
            return Err(SoundnessError::BadSite(format!(
                "{} takes {} input(s), site has {}",
                op,
                want.map_or("≥1".to_string(), |w| w.to_string()),
                self.prev.len()
            )));
        }
        if let Some(bad) = self.prev.iter().find(|&&p| p >= n) {
            return Err(SoundnessError::BadSite(format!("neuron {bad} out of range")));
        }
        if op == OperatorKind::Affine && self.weight.len() != self.prev.len() {
            return Err(SoundnessError::BadSite(
                "weight length differs from input count".into(),
            ));
        }
        Ok(())
    }
}

/// A violated constraint of the output neuron at one sampled state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub neuron: NeuronId,
    pub constraint: Constraint,
    pub witness: ConcreteState,
    pub epsilon: f64,
}

/// A violating abstract element with its worst sampled witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub element: AbstractElement,
    pub site: Site,
    /// State maximizing the weighted violation.
    pub witness: ConcreteState,
    /// Output shape the candidate produced, absent when evaluation faulted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<NeuronShape>,
    /// Every violated constraint at every sampled state.
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<EvalFault>,
    pub cost: f64,
}

impl Counterexample {
    /// The violations observed at the main witness.
    pub fn witness_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.witness == self.witness)
    }

    /// Compact form for prompts: violations restricted to the main witness.
    pub fn summary(&self) -> Counterexample {
        Counterexample {
            violations: self.witness_violations().cloned().collect(),
            ..self.clone()
        }
    }
}

/// Full evaluation of a candidate on one element.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementEval {
    pub cost: f64,
    pub witness: ConcreteState,
    pub output: Option<NeuronShape>,
    pub violations: Vec<Violation>,
    pub fault: Option<EvalFault>,
    /// Normalizer of the sample weights; `cost · weight_total` is the
    /// unnormalized score, which only grows as samples are added.
    pub weight_total: f64,
}

impl ElementEval {
    pub fn into_counterexample(self, element: AbstractElement, site: Site) -> Counterexample {
        Counterexample {
            element,
            site,
            witness: self.witness,
            output: self.output,
            violations: self.violations,
            fault: self.fault,
            cost: self.cost,
        }
    }
}

/// Layer of each neuron: 0 for neurons whose affine bounds are constant,
/// otherwise one more than the deepest neuron they reference.
fn layers(elem: &AbstractElement) -> Vec<usize> {
    let mut out = vec![0usize; elem.n];
    for (i, s) in elem.shapes.iter().enumerate() {
        if let NeuronShape::DeepPoly(d) = s {
            let deepest = d
                .lower
                .coeffs
                .keys()
                .chain(d.upper.coeffs.keys())
                .filter(|&&j| j < i)
                .map(|&j| out[j] + 1)
                .max();
            out[i] = deepest.unwrap_or(0);
        }
    }
    out
}

/// Applies `t` at `site` on `elem` and returns the output shape of the new neuron `elem.n`.
pub fn apply_at(
    t: &Transformer,
    op: OperatorKind,
    elem: &AbstractElement,
    site: &Site,
) -> Result<Result<NeuronShape, EvalFault>, SoundnessError> {
    if t.domain != elem.domain {
        return Err(SoundnessError::DomainMismatch {
            op: op.to_string(),
            expected: t.domain.to_string(),
            got: elem.domain.to_string(),
        });
    }
    site.check(op, elem.n)?;
    let lay = layers(elem);
    let mut meta: Vec<NeuronMeta> = lay
        .iter()
        .map(|&layer| NeuronMeta {
            layer,
            ..Default::default()
        })
        .collect();
    meta.push(NeuronMeta {
        layer: site.prev.iter().map(|&p| lay[p]).max().unwrap_or(0) + 1,
        weight: site.weight.clone(),
        bias: site.bias,
    });
    let fresh_eps = elem
        .shapes
        .iter()
        .filter_map(|s| match s {
            NeuronShape::Zonotope { z, .. } => z.max_symbol(),
            _ => None,
        })
        .max()
        .map_or(0, |m| m + 1)
        .max(elem.n);
    let ctx = EvalContext {
        domain: elem.domain,
        shapes: &elem.shapes,
        meta: &meta,
        prev: site.prev.clone(),
        curr: elem.n,
        fresh_eps,
    };
    Ok(t.apply(op, &ctx))
}

/// Evaluates `t` on `elem`: samples the concretization, measures every
/// constraint of the output at every state, weights each state by the
/// operator's gradient at the varied input and keeps the maximum.
pub fn evaluate_element(
    t: &Transformer,
    op: OperatorKind,
    elem: &AbstractElement,
    site: &Site,
    grid: &GridSpec,
    seed: u64,
) -> Result<ElementEval, SoundnessError> {
    let output = apply_at(t, op, elem, site)?;
    let varied = site.prev[0];
    let mut grid = grid.clone();
    grid.breakpoints.extend_from_slice(op.breakpoints());
    let states = sample_concretization(elem, varied, &grid, seed)?;
    let shape = match output {
        Ok(s) => s,
        Err(fault) => {
            return Ok(ElementEval {
                cost: FAULT_PENALTY,
                witness: states[0].clone(),
                output: None,
                violations: Vec::new(),
                fault: Some(fault),
                weight_total: 1.0,
            })
        }
    };
    let constraints = shape.constraints();
    let xs: Vec<f64> = states.iter().map(|s| s.values[varied]).collect();
    let weights = op.weights(&xs);
    let weight_total: f64 = xs
        .iter()
        .map(|&x| ops::softplus(op.numeric_gradient(x, ops::DEFAULT_H).abs()))
        .sum();
    let mut best = (0.0f64, 0usize);
    let mut violations = Vec::new();
    for (k, state) in states.iter().enumerate() {
        let m = site.concrete(op, &state.values);
        let mut total = 0.0;
        for c in &constraints {
            let e = effective(epsilon(m, c, state), m);
            if e > 0.0 {
                total += e;
                violations.push(Violation {
                    neuron: elem.n,
                    constraint: c.clone(),
                    witness: state.clone(),
                    epsilon: e,
                });
            }
        }
        let weighted = (weights[k] * total).min(FAULT_PENALTY);
        if weighted > best.0 {
            best = (weighted, k);
        }
    }
    Ok(ElementEval {
        cost: best.0,
        witness: states[best.1].clone(),
        output: Some(shape),
        violations,
        fault: None,
        weight_total,
    })
}

/// Weighted cost of `t` on one element at the default site.
pub fn element_cost(
    t: &Transformer,
    elem: &AbstractElement,
    op: OperatorKind,
    grid: &GridSpec,
) -> Result<f64, SoundnessError> {
    let site = Site::for_op(op, elem.n);
    Ok(evaluate_element(t, op, elem, &site, grid, 0)?.cost)
}

/// How per-element costs combine into the total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl Aggregation {
    pub fn combine(self, costs: &[f64]) -> f64 {
        match self {
            Aggregation::Max => costs.iter().copied().fold(0.0, f64::max),
            Aggregation::Mean if costs.is_empty() => 0.0,
            Aggregation::Mean => costs.iter().sum::<f64>() / costs.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementCost {
    pub element: AbstractElement,
    pub cost: f64,
    pub witness: ConcreteState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub grid: GridSpec,
    pub seed: u64,
}

/// Cost of a candidate over a set of elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub aggregation: Aggregation,
    pub per_element: Vec<ElementCost>,
    pub sample_spec: SampleSpec,
}

/// Cost over `elements` with each element at its default site.
pub fn cost(
    t: &Transformer,
    elements: &[AbstractElement],
    op: OperatorKind,
    grid: &GridSpec,
    seed: u64,
    aggregation: Aggregation,
) -> Result<CostReport, SoundnessError> {
    let mut per_element = Vec::with_capacity(elements.len());
    for e in elements {
        let site = Site::for_op(op, e.n);
        let ev = evaluate_element(t, op, e, &site, grid, seed)?;
        per_element.push(ElementCost {
            element: e.clone(),
            cost: ev.cost,
            witness: ev.witness,
        });
    }
    let costs: Vec<f64> = per_element.iter().map(|c| c.cost).collect();
    Ok(CostReport {
        total: aggregation.combine(&costs),
        aggregation,
        per_element,
        sample_spec: SampleSpec {
            grid: grid.clone(),
            seed,
        },
    })
}

/// Cost of a falsifier result, which carries explicit sites.
pub fn counterexample_cost(cexs: &[Counterexample], aggregation: Aggregation) -> f64 {
    let costs: Vec<f64> = cexs.iter().map(|c| c.cost).collect();
    aggregation.combine(&costs)
}

#[cfg(test)]
mod tests;
