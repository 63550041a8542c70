//! Layer-by-layer certification of small feedforward networks with DSL
//! transformers, L∞ robustness checks and the certified-fraction metric.

mod network;

pub use network::{grid_attack, Layer, Network, RobustnessQuery};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AffineExpr, DomainTag, NeuronId, NeuronShape};
use crate::interp::{backsubs, EvalContext, EvalFault, NeuronMeta, Transformer, TransformerError};
use crate::ops::OperatorKind;
use crate::reference;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("invalid network: {0}")]
    Network(String),
    #[error("invalid query: {0}")]
    Query(String),
    #[error("no {domain} transformer for `{op}`")]
    MissingTransformer { op: String, domain: DomainTag },
    #[error("transformer fault at neuron {neuron}: {fault}")]
    Fault { neuron: NeuronId, fault: EvalFault },
    #[error("{path}: {source}")]
    Transformer { path: String, source: TransformerError },
    #[error("{0}")]
    Io(String),
}

/// Transformers by operator name for one domain.
#[derive(Clone, Debug)]
pub struct TransformerSet {
    pub domain: DomainTag,
    by_op: BTreeMap<&'static str, Transformer>,
}

impl TransformerSet {
    /// The embedded reference transformers.
    pub fn reference(domain: DomainTag) -> Self {
        let mut set = TransformerSet {
            domain,
            by_op: BTreeMap::new(),
        };
        for op in reference::operators(domain) {
            if let Some(src) = reference::source(domain, op.name()) {
                let t = Transformer::from_source(src).expect("embedded references validate");
                set.by_op.insert(op.name(), t);
            }
        }
        set
    }

    /// Installs `t` for every operator it has a case for. Returns the
    /// operators it now handles.
    pub fn insert(&mut self, t: Transformer) -> Vec<OperatorKind> {
        let mut ops = Vec::new();
        for op in OperatorKind::ALL {
            if t.domain == self.domain && t.handles(op) {
                self.by_op.insert(op.name(), t.clone());
                ops.push(op);
            }
        }
        ops
    }

    /// References overridden by every `*.cf` file in `dir` whose domain matches.
    pub fn with_dir(domain: DomainTag, dir: &Path) -> Result<Self, CertifyError> {
        let mut set = Self::reference(domain);
        let io = |e: std::io::Error| CertifyError::Io(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "cf"))
            .collect();
        paths.sort();
        for p in paths {
            let src = std::fs::read_to_string(&p).map_err(io)?;
            let t = Transformer::from_source(&src).map_err(|source| CertifyError::Transformer {
                path: p.display().to_string(),
                source,
            })?;
            set.insert(t);
        }
        Ok(set)
    }

    pub fn get(&self, op: OperatorKind) -> Result<&Transformer, CertifyError> {
        self.by_op.get(op.name()).ok_or(CertifyError::MissingTransformer {
            op: op.name().to_string(),
            domain: self.domain,
        })
    }
}

/// Every neuron's shape and metadata after propagation.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub domain: DomainTag,
    pub shapes: Vec<NeuronShape>,
    pub meta: Vec<NeuronMeta>,
    /// Neuron ids of each layer, input layer first.
    pub layers: Vec<Vec<NeuronId>>,
}

impl Propagation {
    pub fn outputs(&self) -> &[NeuronId] {
        self.layers.last().map_or(&[], |l| l.as_slice())
    }

    /// `(l, u)` of every output neuron.
    pub fn output_bounds(&self) -> Vec<(f64, f64)> {
        self.outputs().iter().map(|&i| self.shapes[i].bounds()).collect()
    }

    fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            domain: self.domain,
            shapes: &self.shapes,
            meta: &self.meta,
            prev: Vec::new(),
            curr: self.shapes.len(),
            fresh_eps: 0,
        }
    }

    /// Sound lower bound of `out[a] − out[b]` in the propagation's domain.
    pub fn difference_lower(&self, a: usize, b: usize) -> Result<f64, CertifyError> {
        let (ia, ib) = (self.outputs()[a], self.outputs()[b]);
        let (la, _) = self.shapes[ia].bounds();
        let (_, ub) = self.shapes[ib].bounds();
        let boxed = la - ub;
        let refined = match (&self.shapes[ia], &self.shapes[ib]) {
            (NeuronShape::DeepPoly(_), NeuronShape::DeepPoly(_)) => {
                let e = AffineExpr::from_parts(0.0, [(ia, 1.0), (ib, -1.0)]);
                backsubs(&e, &self.ctx(), true).map_err(|fault| CertifyError::Fault { neuron: ia, fault })?
            }
            (NeuronShape::Zonotope { z: za, .. }, NeuronShape::Zonotope { z: zb, .. }) => {
                let mut d = za.clone();
                d.add_scaled(zb, -1.0);
                d.bounds().0
            }
            _ => boxed,
        };
        Ok(boxed.max(refined))
    }
}

/// Propagates the box `input` through `net`.
pub fn propagate(
    net: &Network,
    input: &[(f64, f64)],
    set: &TransformerSet,
) -> Result<Propagation, CertifyError> {
    net.check()?;
    if input.len() != net.input_dim {
        return Err(CertifyError::Query(format!(
            "input has {} coordinates, network expects {}",
            input.len(),
            net.input_dim
        )));
    }
    let domain = set.domain;
    let mut p = Propagation {
        domain,
        shapes: Vec::new(),
        meta: Vec::new(),
        layers: vec![(0..input.len()).collect()],
    };
    for (i, &(l, u)) in input.iter().enumerate() {
        if !(l <= u && l.is_finite() && u.is_finite()) {
            return Err(CertifyError::Query(format!("bad input interval [{l}, {u}]")));
        }
        p.shapes.push(NeuronShape::from_box(domain, l, u, i));
        p.meta.push(NeuronMeta::default());
    }
    let mut fresh_eps = input.len();
    for (k, layer) in net.layers.iter().enumerate() {
        let depth = k + 1;
        let prev_ids = p.layers[k].clone();
        let mut ids = Vec::new();
        let jobs: Vec<(OperatorKind, Vec<NeuronId>, NeuronMeta)> = match layer {
            Layer::Affine { weights, bias } => weights
                .iter()
                .zip(bias)
                .map(|(row, &b)| {
                    let meta = NeuronMeta {
                        layer: depth,
                        weight: row.clone(),
                        bias: b,
                    };
                    (OperatorKind::Affine, prev_ids.clone(), meta)
                })
                .collect(),
            Layer::Activation { op } => prev_ids
                .iter()
                .map(|&i| {
                    let meta = NeuronMeta {
                        layer: depth,
                        ..Default::default()
                    };
                    (*op, vec![i], meta)
                })
                .collect(),
        };
        for (op, prev, meta) in jobs {
            let t = set.get(op)?;
            let curr = p.shapes.len();
            p.meta.push(meta);
            let ctx = EvalContext {
                domain,
                shapes: &p.shapes,
                meta: &p.meta,
                prev,
                curr,
                fresh_eps,
            };
            let shape = t
                .apply(op, &ctx)
                .map_err(|fault| CertifyError::Fault { neuron: curr, fault })?;
            fresh_eps += 1;
            p.shapes.push(shape);
            ids.push(curr);
        }
        p.layers.push(ids);
    }
    Ok(p)
}

/// Outcome of one robustness query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub certified: bool,
    /// Lower bounds of `score[true] − score[j]` for each `j ≠ true`.
    pub margins: Vec<f64>,
}

impl Certification {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Certifies `query`: robust iff every margin lower bound is strictly positive.
pub fn certify(
    net: &Network,
    query: &RobustnessQuery,
    set: &TransformerSet,
) -> Result<Certification, CertifyError> {
    query.check(net)?;
    let p = propagate(net, &query.input_box(), set)?;
    let t = query.true_label;
    let mut margins = Vec::new();
    for j in 0..p.outputs().len() {
        if j != t {
            margins.push(p.difference_lower(t, j)?);
        }
    }
    Ok(Certification {
        certified: margins.iter().all(|m| *m > 0.0),
        margins,
    })
}

/// Certifies every query in parallel, preserving order.
pub fn certify_all(
    net: &Network,
    queries: &[RobustnessQuery],
    set: &TransformerSet,
) -> Result<Vec<Certification>, CertifyError> {
    queries.par_iter().map(|q| certify(net, q, set)).collect()
}

/// Certified fraction among queries whose unperturbed input is classified
/// correctly. Returns 0 when no query is baseline-correct.
pub fn precision(
    net: &Network,
    queries: &[RobustnessQuery],
    set: &TransformerSet,
) -> Result<f64, CertifyError> {
    let correct: Vec<RobustnessQuery> = queries
        .iter()
        .filter(|q| net.classify(&q.input).is_some_and(|c| c == q.true_label))
        .cloned()
        .collect();
    if correct.is_empty() {
        return Ok(0.0);
    }
    let results = certify_all(net, &correct, set)?;
    let ok = results.iter().filter(|r| r.certified).count();
    Ok(ok as f64 / correct.len() as f64)
}

/// CSV table with columns `query-id,certified,min-margin`.
pub fn to_csv(queries: &[RobustnessQuery], results: &[Certification]) -> String {
    let mut out = String::from("query-id,certified,min-margin\n");
    for (k, (q, r)) in queries.iter().zip(results).enumerate() {
        let id = q.id.clone().unwrap_or_else(|| k.to_string());
        out.push_str(&format!("{id},{},{}\n", r.certified, r.min_margin()));
    }
    out
}
