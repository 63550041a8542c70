use super::*;
use crate::domain::{AffineExpr, DomainTag};

const F0: &str = include_str!("../../fixtures/f0.cf");
const LISTING2: &str = include_str!("../../fixtures/listing2.cf");
const LISTING3: &str = include_str!("../../fixtures/listing3.cf");

fn hs() -> OperatorKind {
    OperatorKind::HardSigmoid
}

fn boxed(l: f64, u: f64) -> AbstractElement {
    AbstractElement::single(DomainTag::DeepPoly, l, u).unwrap()
}

#[test]
fn epsilon_examples() {
    let x = |v: f64| ConcreteState::new(vec![v]);
    let upper = Constraint::AffineLe {
        a: AffineExpr::from_parts(0.5, [(0, 0.125)]),
    };
    assert!((epsilon(1.0, &upper, &x(3.0)) - 0.125).abs() < 1e-12);
    assert_eq!(epsilon(0.5, &Constraint::ScalarLe { c: 1.0 }, &x(0.0)), 0.0);
    let lower = Constraint::AffineGe {
        a: AffineExpr::from_parts(0.5, [(0, 0.125)]),
    };
    let e = epsilon(1.0 / 6.0, &lower, &x(-2.0));
    assert!((e - 1.0 / 12.0).abs() < 1e-12);
}

#[test]
fn f0_worked_example() {
    let t = Transformer::from_source(F0).unwrap();
    let grid = GridSpec::unit();
    let c = |l, u| element_cost(&t, &boxed(l, u), hs(), &grid).unwrap();
    assert!((c(-4.0, 4.0) - 0.014241).abs() < 1e-5);
    assert!((c(-5.0, 4.0) - 0.022990).abs() < 1e-5);
    assert!((c(-5.0, 5.0) - 0.018949).abs() < 1e-5);
    let elems = [boxed(-4.0, 4.0), boxed(-5.0, 4.0), boxed(-5.0, 5.0)];
    let report = cost(&t, &elems, hs(), &grid, 0, Aggregation::Max).unwrap();
    assert!((report.total - 0.0230).abs() < 1e-3);
    assert_eq!(report.per_element.len(), 3);
    let single = cost(&t, &elems[..1], hs(), &grid, 0, Aggregation::Max).unwrap();
    assert!((single.total - 0.01424).abs() < 1e-5);
    let empty = cost(&t, &[], hs(), &grid, 0, Aggregation::Max).unwrap();
    assert_eq!(empty.total, 0.0);
}

#[test]
fn mean_aggregation() {
    assert_eq!(Aggregation::Mean.combine(&[1.0, 3.0]), 2.0);
    assert_eq!(Aggregation::Max.combine(&[1.0, 3.0]), 3.0);
    assert_eq!(Aggregation::Mean.combine(&[]), 0.0);
}

#[test]
fn listing3_is_zero_on_lattice() {
    let t = Transformer::from_source(LISTING3).unwrap();
    for (l, u) in structured_boxes(hs()) {
        let c = element_cost(&t, &boxed(l, u), hs(), &GridSpec::unit()).unwrap();
        assert_eq!(c, 0.0, "({l}, {u})");
    }
}

#[test]
fn f0_falsifies_in_mixed_case() {
    let t = Transformer::from_source(F0).unwrap();
    let budget = FalsifyBudget {
        n_elements: 200,
        ..Default::default()
    };
    let cexs = falsify(&t, hs(), &budget).unwrap();
    assert!(!cexs.is_empty());
    assert!(cexs.windows(2).all(|w| w[0].cost >= w[1].cost));
    let (l, u) = cexs[0].element.shapes[0].bounds();
    assert!(l < -3.0 && u > 3.0, "worst element [{l}, {u}]");
}

#[test]
fn listing2_witness() {
    let t = Transformer::from_source(LISTING2).unwrap();
    let budget = FalsifyBudget {
        n_elements: 66,
        max_counterexamples: usize::MAX,
        ..Default::default()
    };
    let cexs = falsify(&t, hs(), &budget).unwrap();
    let hit = cexs
        .iter()
        .find(|c| c.element.shapes[0].bounds() == (-4.0, 2.0))
        .expect("(-4, 2) is violating");
    let v = hit
        .violations
        .iter()
        .find(|v| v.witness.values == [1.5] && matches!(v.constraint, Constraint::AffineLe { .. }))
        .expect("x = 3/2 violates U'");
    let u = v.constraint.bound_at(&[1.5]).unwrap();
    assert!((u + 5.0 / 18.0).abs() < 1e-12);
}

#[test]
fn faults_get_the_penalty() {
    let src = "transformer deeppoly { HardSigmoid -> (0, 1 / (prev[u] - prev[l]), 0, 1); }";
    let t = Transformer::from_source(src).unwrap();
    let ev = evaluate_element(
        &t,
        hs(),
        &boxed(1.0, 1.0),
        &Site::for_op(hs(), 1),
        &GridSpec::unit(),
        0,
    )
    .unwrap();
    assert_eq!(ev.cost, FAULT_PENALTY);
    assert_eq!(ev.fault, Some(EvalFault::DivisionByZero));
}

#[test]
fn bad_sites_are_rejected() {
    let t = Transformer::from_source(LISTING3).unwrap();
    let site = Site {
        prev: vec![3],
        weight: vec![],
        bias: 0.0,
    };
    assert!(matches!(
        evaluate_element(&t, hs(), &boxed(0.0, 1.0), &site, &GridSpec::unit(), 0),
        Err(SoundnessError::BadSite(_))
    ));
    let z = AbstractElement::single(DomainTag::Interval, 0.0, 1.0).unwrap();
    assert!(matches!(
        element_cost(&t, &z, hs(), &GridSpec::unit()),
        Err(SoundnessError::DomainMismatch { .. })
    ));
}

#[test]
fn counterexample_json_round_trips() {
    let t = Transformer::from_source(F0).unwrap();
    let site = Site::for_op(hs(), 1);
    let ev = evaluate_element(&t, hs(), &boxed(-5.0, 4.0), &site, &GridSpec::unit(), 0).unwrap();
    let c = ev.into_counterexample(boxed(-5.0, 4.0), site).summary();
    assert!(c.violations.iter().all(|v| v.witness == c.witness));
    let json = serde_json::to_string(&c).unwrap();
    for key in [
        "\"element\"",
        "\"witness\"",
        "\"violations\"",
        "\"cost\"",
        "\"epsilon\"",
    ] {
        assert!(json.contains(key), "{key} missing");
    }
    let back: Counterexample = serde_json::from_str(&json).unwrap();
    assert_eq!(back, c);
}

#[test]
fn sampling_verifier_verdicts() {
    let v = SamplingVerifier {
        budget: FalsifyBudget {
            n_elements: 100,
            ..Default::default()
        },
    };
    assert!(v.verify(LISTING3, hs()).unwrap().sound);
    assert!(!v.verify(F0, hs()).unwrap().sound);
}

#[cfg(unix)]
#[test]
fn external_verifier_runs_command() {
    let v = ExternalVerifier {
        command: vec![
            "sh".into(),
            "-c".into(),
            "test -s \"$0\" && echo '{\"sound\": true}'".into(),
            "{file}".into(),
        ],
    };
    assert!(v.verify(LISTING3, hs()).unwrap().sound);
    let failing = ExternalVerifier {
        command: vec!["sh".into(), "-c".into(), "exit 4".into()],
    };
    assert!(matches!(
        failing.verify(LISTING3, hs()),
        Err(VerifierError::Failed { .. })
    ));
}
