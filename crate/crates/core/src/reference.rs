//! Hand-written reference transformers embedded at build time.

use crate::domain::DomainTag;
use crate::ops::OperatorKind;

const SOURCES: &[(DomainTag, &str, &str)] = &[
    (
        DomainTag::DeepPoly,
        "abs",
        include_str!("../fixtures/reference/deeppoly/abs.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "add",
        include_str!("../fixtures/reference/deeppoly/add.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "affine",
        include_str!("../fixtures/reference/deeppoly/affine.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "elu",
        include_str!("../fixtures/reference/deeppoly/elu.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "gelu",
        include_str!("../fixtures/reference/deeppoly/gelu.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "hardsigmoid",
        include_str!("../fixtures/reference/deeppoly/hardsigmoid.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "hardtanh",
        include_str!("../fixtures/reference/deeppoly/hardtanh.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "relu",
        include_str!("../fixtures/reference/deeppoly/relu.cf"),
    ),
    (
        DomainTag::DeepPoly,
        "sigmoid",
        include_str!("../fixtures/reference/deeppoly/sigmoid.cf"),
    ),
    (
        DomainTag::Interval,
        "abs",
        include_str!("../fixtures/reference/interval/abs.cf"),
    ),
    (
        DomainTag::Interval,
        "add",
        include_str!("../fixtures/reference/interval/add.cf"),
    ),
    (
        DomainTag::Interval,
        "affine",
        include_str!("../fixtures/reference/interval/affine.cf"),
    ),
    (
        DomainTag::Interval,
        "elu",
        include_str!("../fixtures/reference/interval/elu.cf"),
    ),
    (
        DomainTag::Interval,
        "hardsigmoid",
        include_str!("../fixtures/reference/interval/hardsigmoid.cf"),
    ),
    (
        DomainTag::Interval,
        "hardtanh",
        include_str!("../fixtures/reference/interval/hardtanh.cf"),
    ),
    (
        DomainTag::Interval,
        "relu",
        include_str!("../fixtures/reference/interval/relu.cf"),
    ),
    (
        DomainTag::Interval,
        "sigmoid",
        include_str!("../fixtures/reference/interval/sigmoid.cf"),
    ),
    (
        DomainTag::Zonotope,
        "abs",
        include_str!("../fixtures/reference/deepz/abs.cf"),
    ),
    (
        DomainTag::Zonotope,
        "add",
        include_str!("../fixtures/reference/deepz/add.cf"),
    ),
    (
        DomainTag::Zonotope,
        "affine",
        include_str!("../fixtures/reference/deepz/affine.cf"),
    ),
    (
        DomainTag::Zonotope,
        "hardsigmoid",
        include_str!("../fixtures/reference/deepz/hardsigmoid.cf"),
    ),
    (
        DomainTag::Zonotope,
        "hardtanh",
        include_str!("../fixtures/reference/deepz/hardtanh.cf"),
    ),
    (
        DomainTag::Zonotope,
        "relu",
        include_str!("../fixtures/reference/deepz/relu.cf"),
    ),
];

/// Reference source for operator `name` in `domain`.
pub fn source(domain: DomainTag, name: &str) -> Option<&'static str> {
    SOURCES
        .iter()
        .find(|(d, n, _)| *d == domain && *n == name)
        .map(|(_, _, s)| *s)
}

/// Operators that have a reference transformer in `domain`.
pub fn operators(domain: DomainTag) -> Vec<OperatorKind> {
    SOURCES
        .iter()
        .filter(|(d, _, _)| *d == domain)
        .filter_map(|(_, n, _)| OperatorKind::from_name(n).ok())
        .collect()
}

/// Directory name used for `domain` under a transformer directory.
pub fn dir_name(domain: DomainTag) -> &'static str {
    match domain {
        DomainTag::DeepPoly => "deeppoly",
        DomainTag::Interval => "interval",
        DomainTag::Zonotope => "deepz",
    }
}
