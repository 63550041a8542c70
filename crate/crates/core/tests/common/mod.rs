//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use absynth::domain::{AbstractElement, DomainTag};
use absynth::dsl::{self, format_expr, format_program, Expr, TransRet};
use absynth::interp::Transformer;
use absynth::ops::OperatorKind;
use absynth::soundness::{apply_at, structured_boxes, Site};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Reference DeepPoly fixtures and the operator each one covers.
pub fn deeppoly_references() -> Vec<(&'static str, OperatorKind)> {
    vec![
        ("reference/deeppoly/hardsigmoid.cf", OperatorKind::HardSigmoid),
        ("reference/deeppoly/gelu.cf", OperatorKind::Gelu),
        ("reference/deeppoly/elu.cf", OperatorKind::Elu { alpha: 1.0 }),
        ("reference/deeppoly/sigmoid.cf", OperatorKind::Sigmoid),
        ("reference/deeppoly/abs.cf", OperatorKind::Abs),
        ("reference/deeppoly/affine.cf", OperatorKind::Affine),
        ("reference/deeppoly/relu.cf", OperatorKind::Relu),
        ("reference/deeppoly/hardtanh.cf", OperatorKind::HardTanh),
        ("reference/deeppoly/add.cf", OperatorKind::Add),
    ]
}

fn parse_expr(src: &str) -> Expr {
    let tokens = dsl::lex(src).expect("lexes");
    dsl::parse_expression(&tokens).expect("parses")
}

fn collect_leaves<'a>(r: &'a mut TransRet, out: &mut Vec<&'a mut Vec<Expr>>) {
    match r {
        TransRet::Cond { then, els, .. } => {
            collect_leaves(then, out);
            collect_leaves(els, out);
        }
        TransRet::Paren(inner, _) => collect_leaves(inner, out),
        TransRet::Tuple(items, _) => out.push(items),
    }
}

/// Every single-slot mutant of the first case: one affine bound (the third
/// or fourth tuple element) of one leaf gets `0.05 · prev` added to it.
pub fn slope_mutants(source: &str) -> Vec<(String, String)> {
    let prog = dsl::parse(source).expect("parses");
    let leaves = prog.transformers[0].cases[0].body.leaf_count();
    let mut out = Vec::new();
    for leaf in 0..leaves {
        for slot in [2usize, 3] {
            let mut p = prog.clone();
            let mut all = Vec::new();
            collect_leaves(&mut p.transformers[0].cases[0].body, &mut all);
            let items = &mut all[leaf];
            let orig = format_expr(&items[slot]);
            items[slot] = parse_expr(&format!("({orig}) + 0.05 * prev"));
            let label = format!("leaf {leaf} {}", if slot == 2 { "L" } else { "U" });
            out.push((label, format_program(&p)));
        }
    }
    out
}

/// Independent soundness check: applies the transformer on each box and
/// scans `points` evenly spaced inputs against every output bound.
pub fn dense_unsound(t: &Transformer, op: OperatorKind, boxes: &[(f64, f64)], points: usize) -> bool {
    boxes.iter().any(|&(l, u)| {
        let elem = AbstractElement::single(DomainTag::DeepPoly, l, u).unwrap();
        let Ok(out) = apply_at(t, op, &elem, &Site::for_op(op, 1)).unwrap() else {
            return true;
        };
        let (sl, su) = out.bounds();
        let absynth::domain::NeuronShape::DeepPoly(s) = out else {
            panic!("DeepPoly output expected")
        };
        (0..points).any(|k| {
            let x = if points == 1 {
                l
            } else {
                l + (u - l) * k as f64 / (points - 1) as f64
            };
            let m = op.apply(x);
            let lo = s.lower.eval(&[x]).unwrap();
            let hi = s.upper.eval(&[x]).unwrap();
            let tol = 1e-9 * m.abs().max(1.0);
            m < sl - tol || m > su + tol || m < lo - tol || m > hi + tol
        })
    })
}

/// Verifier whose verdicts come from a cost table keyed by trimmed source.
/// Unknown sources are sound.
pub struct TableVerifier(pub std::collections::HashMap<String, f64>);

pub fn synthetic_counterexample(cost: f64) -> absynth::soundness::Counterexample {
    absynth::soundness::Counterexample {
        element: AbstractElement::single(DomainTag::DeepPoly, -5.0, 4.0).unwrap(),
        site: Site::for_op(OperatorKind::HardSigmoid, 1),
        witness: absynth::domain::ConcreteState::new(vec![-3.0]),
        output: None,
        violations: Vec::new(),
        fault: None,
        cost,
    }
}

impl absynth::soundness::Verifier for TableVerifier {
    fn verify(
        &self,
        source: &str,
        _op: OperatorKind,
    ) -> Result<absynth::soundness::Verdict, absynth::soundness::VerifierError> {
        let cost = self.0.get(source.trim()).copied().unwrap_or(0.0);
        Ok(absynth::soundness::Verdict {
            sound: cost == 0.0,
            counterexamples: if cost > 0.0 {
                vec![synthetic_counterexample(cost)]
            } else {
                Vec::new()
            },
        })
    }
}

/// Distinct, valid HardSigmoid candidates whose only role is their identity.
pub fn synthetic_candidate(k: usize) -> String {
    format!("transformer deeppoly {{ HardSigmoid -> (0, 1, 0, {k}); }}")
}

/// Lattice boxes plus wide and off-lattice boxes the sweep does not enumerate.
pub fn oracle_boxes(op: OperatorKind) -> Vec<(f64, f64)> {
    let mut boxes = structured_boxes(op);
    for l in [-20.0, -7.5, -3.25, -0.5, 0.3] {
        for w in [0.1, 1.7, 4.0, 12.0, 30.0] {
            boxes.push((l, l + w));
        }
    }
    boxes
}
