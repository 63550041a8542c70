//! Abstract elements for the Interval, Zonotope and DeepPoly domains, the
//! one-sided constraints they induce, and concretization sampling.

mod affine;
mod element;
mod grid;

pub use affine::AffineExpr;
pub use element::{
    eval_affine, AbstractElement, ConcreteState, Constraint, DeepPolyShape, DomainTag, IntervalShape,
    NeuronShape, ZonotopeShape,
};
pub use grid::{sample_concretization, GridSpec, MAX_GRID_POINTS};

use thiserror::Error;

/// Index of a neuron inside an element or network.
pub type NeuronId = usize;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DomainError {
    #[error("unknown neuron id {0}")]
    UnknownNeuron(NeuronId),
    #[error("abstract element has an empty concretization")]
    Infeasible,
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("sample grid too large ({0} points)")]
    GridTooLarge(usize),
}

/// Serde adapter for sparse `id → coefficient` maps. Keys are parsed from
/// strings so the maps also decode inside internally tagged enums.
pub(crate) mod sparse {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<usize, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, f64>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("invalid neuron id `{k}`")))
            })
            .collect()
    }
}
