use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AbstractElement, DomainTag, GridSpec, NeuronShape};
use crate::interp::Transformer;
use crate::ops::OperatorKind;

use super::{evaluate_element, Counterexample, Site, SoundnessError};

/// Search effort for [`falsify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FalsifyBudget {
    /// Total elements tried, structured sweep included.
    pub n_elements: usize,
    pub grid: GridSpec,
    pub seed: u64,
    pub max_counterexamples: usize,
    /// Random boxes are drawn inside `[-r, r]` with `r` picked per box from
    /// `box_range / 8, box_range / 4, box_range / 2, box_range`.
    pub box_range: f64,
}

impl Default for FalsifyBudget {
    fn default() -> Self {
        FalsifyBudget {
            n_elements: 4096,
            grid: GridSpec::with_step(0.5).subdivisions(32),
            seed: 0,
            max_counterexamples: 16,
            box_range: 64.0,
        }
    }
}

/// All boxes `[l, u]`, `l ≤ u`, over integer offsets `-2..=2` around each
/// breakpoint of `op` and around zero. Degenerate boxes are included.
pub fn structured_boxes(op: OperatorKind) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = op
        .breakpoints()
        .iter()
        .chain(std::iter::once(&0.0))
        .flat_map(|b| (-2..=2).map(move |k| b + k as f64))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::new();
    for (i, &l) in pts.iter().enumerate() {
        for &u in &pts[i..] {
            out.push((l, u));
        }
    }
    out
}

fn inputs(op: OperatorKind) -> usize {
    match op {
        OperatorKind::Add | OperatorKind::Affine => 2,
        _ => 1,
    }
}

fn element(domain: DomainTag, boxes: &[(f64, f64)]) -> AbstractElement {
    let shapes = boxes
        .iter()
        .enumerate()
        .map(|(i, &(l, u))| NeuronShape::from_box(domain, l, u, i))
        .collect();
    AbstractElement {
        domain,
        n: boxes.len(),
        shapes,
    }
}

fn random_box(rng: &mut ChaCha8Rng, range: f64) -> (f64, f64) {
    let r = range / f64::from(1u32 << rng.gen_range(0..4));
    let a: f64 = rng.gen_range(-r..=r);
    let b: f64 = rng.gen_range(-r..=r);
    (a.min(b), a.max(b))
}

/// The deterministic sequence of (element, site) pairs tried for `op`.
fn candidates(op: OperatorKind, domain: DomainTag, budget: &FalsifyBudget) -> Vec<(AbstractElement, Site)> {
    let k = inputs(op);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let site_for = |n: usize, rng: &mut ChaCha8Rng| {
        let mut site = Site::for_op(op, n);
        if op == OperatorKind::Affine {
            site.weight = (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            site.bias = rng.gen_range(-1.0..=1.0);
        }
        site
    };
    let mut out = Vec::with_capacity(budget.n_elements);
    for b in structured_boxes(op) {
        if out.len() >= budget.n_elements {
            break;
        }
        let site = site_for(k, &mut rng);
        out.push((element(domain, &vec![b; k]), site));
    }
    while out.len() < budget.n_elements {
        let boxes: Vec<(f64, f64)> = (0..k).map(|_| random_box(&mut rng, budget.box_range)).collect();
        let site = site_for(k, &mut rng);
        out.push((element(domain, &boxes), site));
    }
    out
}

/// Searches for elements on which `t` is unsound for `op`. Returns up to
/// `max_counterexamples` violating elements, worst first; an empty result
/// means no violation was found within the budget.
pub fn falsify(
    t: &Transformer,
    op: OperatorKind,
    budget: &FalsifyBudget,
) -> Result<Vec<Counterexample>, SoundnessError> {
    let tried = candidates(op, t.domain, budget);
    let found: Vec<Counterexample> = tried
        .into_par_iter()
        .map(|(elem, site)| {
            let ev = evaluate_element(t, op, &elem, &site, &budget.grid, budget.seed)?;
            Ok((ev.cost > 0.0).then(|| ev.into_counterexample(elem, site)))
        })
        .collect::<Result<Vec<_>, SoundnessError>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut keyed: Vec<(String, Counterexample)> = found
        .into_iter()
        .map(|c| (serde_json::to_string(&c.element).unwrap_or_default(), c))
        .collect();
    keyed.sort_by(|a, b| b.1.cost.total_cmp(&a.1.cost).then_with(|| a.0.cmp(&b.0)));
    keyed.truncate(budget.max_counterexamples);
    tracing::debug!(op = %op, found = keyed.len(), "falsification finished");
    Ok(keyed.into_iter().map(|(_, c)| c).collect())
}
