//! Synthesis and sampled falsification of abstract transformers for
//! neural-network operators.

pub mod certify;
pub mod domain;
pub mod dsl;
pub mod interp;
pub mod ops;
pub mod reference;
pub mod soundness;
pub mod synth;
