//! Evaluates validated transformers on concrete abstract shapes.
//!
//! An [`EvalContext`] binds `prev`/`curr` to neuron ids and exposes the
//! shapes and metadata of every neuron the transformer may inspect. The
//! result of one case evaluation is the output [`NeuronShape`] for `curr`.

mod builtins;
mod eval;
mod value;

pub use builtins::{backsubs, is_builtin, substitute_layer};
pub use value::{Callable, Value};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainTag, NeuronId, NeuronShape};
use crate::dsl::ast::{Program, TransRet};
use crate::dsl::{self, Diagnostic, ShapeSpec};
use crate::ops::OperatorKind;

/// Dynamic failure of a candidate expression. Faults are scored by the
/// falsifier rather than propagated as crashes.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum EvalFault {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value in field `{0}`")]
    NonFinite(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("unknown neuron {0}")]
    UnknownNeuron(NeuronId),
    #[error("missing metadata `{0}`")]
    MissingMetadata(String),
    #[error("transformer has no case for operator `{0}`")]
    MissingCase(String),
    #[error("output bound refers to the output neuron")]
    SelfReference,
    #[error("unsupported construct: {0}")]
    Unsupported(String),
}

/// Per-neuron network metadata visible through `n[layer]`, `n[weight]`, `n[bias]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeuronMeta {
    pub layer: usize,
    /// Incoming weight row, aligned with the `prev` list of an affine neuron.
    #[serde(default)]
    pub weight: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
}

/// Everything one transformer application may read.
#[derive(Clone, Debug)]
pub struct EvalContext<'a> {
    pub domain: DomainTag,
    /// Shapes of already-processed neurons, indexed by id.
    pub shapes: &'a [NeuronShape],
    /// Metadata for every neuron including `curr`, indexed by id.
    pub meta: &'a [NeuronMeta],
    pub prev: Vec<NeuronId>,
    pub curr: NeuronId,
    /// Noise symbol bound to `eps`; must be unused by every input shape.
    pub fresh_eps: usize,
}

impl EvalContext<'_> {
    pub fn shape(&self, id: NeuronId) -> Result<&NeuronShape, EvalFault> {
        self.shapes.get(id).ok_or(EvalFault::UnknownNeuron(id))
    }

    pub fn meta(&self, id: NeuronId) -> Result<&NeuronMeta, EvalFault> {
        self.meta.get(id).ok_or(EvalFault::UnknownNeuron(id))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformerError {
    #[error("candidate failed validation with {} diagnostic(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("shape ({0}) does not match a supported domain")]
    UnsupportedShape(String),
}

/// A validated program together with its resolved domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformer {
    pub program: Program,
    pub shape: ShapeSpec,
    pub domain: DomainTag,
}

impl Transformer {
    /// Lexes, parses and validates `source`.
    pub fn from_source(source: &str) -> Result<Self, TransformerError> {
        let program = dsl::check(source).map_err(TransformerError::Invalid)?;
        Self::from_program(program)
    }

    /// Wraps an already validated program.
    pub fn from_program(program: Program) -> Result<Self, TransformerError> {
        let shape = dsl::active_shape(&program);
        let domain = shape.domain().ok_or_else(|| {
            let names: Vec<&str> = shape.fields.iter().map(|(n, _)| n.as_str()).collect();
            TransformerError::UnsupportedShape(names.join(", "))
        })?;
        Ok(Transformer {
            program,
            shape,
            domain,
        })
    }

    /// The case body for `op` in the first transformer block.
    pub fn case_for(&self, op: OperatorKind) -> Option<&TransRet> {
        case_for(&self.program, op)
    }

    pub fn handles(&self, op: OperatorKind) -> bool {
        self.case_for(op).is_some()
    }

    pub fn apply(&self, op: OperatorKind, ctx: &EvalContext) -> Result<NeuronShape, EvalFault> {
        eval::apply(&self.program, &self.shape, self.domain, op, ctx)
    }
}

fn case_for(prog: &Program, op: OperatorKind) -> Option<&TransRet> {
    prog.transformers.first().and_then(|t| {
        t.cases
            .iter()
            .find(|c| {
                OperatorKind::from_name(&c.op.name)
                    .map(|k| k.name() == op.name())
                    .unwrap_or(false)
            })
            .map(|c| &c.body)
    })
}

/// Evaluates the case for `op` of a validated program and returns `curr`'s shape.
pub fn apply_transformer(
    prog: &Program,
    op: OperatorKind,
    ctx: &EvalContext,
) -> Result<NeuronShape, EvalFault> {
    let shape = dsl::active_shape(prog);
    let domain = shape
        .domain()
        .ok_or_else(|| EvalFault::Unsupported("shape does not match a built-in domain".into()))?;
    eval::apply(prog, &shape, domain, op, ctx)
}
