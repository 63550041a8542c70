use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AbstractElement, ConcreteState, DomainError, NeuronId};

/// Upper bound on the points produced for one interval.
pub const MAX_GRID_POINTS: usize = 200_000;

/// How an interval `[l, u]` is discretized. Endpoints and the breakpoints
/// inside the interval are always included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Integer multiples of `step` that fall inside the interval.
    pub step: Option<f64>,
    /// Evenly spaced interior points.
    #[serde(default)]
    pub subdivisions: usize,
    /// Uniform random interior points.
    #[serde(default)]
    pub random: usize,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::unit()
    }
}

impl GridSpec {
    /// Unit grid over the integers.
    pub fn unit() -> Self {
        GridSpec {
            step: Some(1.0),
            subdivisions: 0,
            random: 0,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_step(step: f64) -> Self {
        GridSpec {
            step: Some(step),
            ..GridSpec::unit()
        }
    }

    pub fn subdivisions(mut self, n: usize) -> Self {
        self.subdivisions = n;
        self
    }

    pub fn random(mut self, n: usize) -> Self {
        self.random = n;
        self
    }

    pub fn with_breakpoints(mut self, bps: &[f64]) -> Self {
        self.breakpoints = bps.to_vec();
        self
    }

    /// Sorted, deduplicated sample points of `[l, u]`.
    pub fn points(&self, l: f64, u: f64, seed: u64) -> Result<Vec<f64>, DomainError> {
        if !(l.is_finite() && u.is_finite()) || l > u {
            return Err(DomainError::InvalidShape(format!("bad interval [{l}, {u}]")));
        }
        let mut pts = vec![l, u];
        if let Some(step) = self.step.filter(|s| *s > 0.0 && s.is_finite()) {
            let lo = (l / step).ceil();
            let hi = (u / step).floor();
            if hi >= lo {
                let count = (hi - lo) as usize + 1;
                if count > MAX_GRID_POINTS {
                    return Err(DomainError::GridTooLarge(count));
                }
                for k in 0..count {
                    let v = (lo + k as f64) * step;
                    if v >= l && v <= u {
                        pts.push(v);
                    }
                }
            }
        }
        if self.subdivisions + self.random > MAX_GRID_POINTS {
            return Err(DomainError::GridTooLarge(self.subdivisions + self.random));
        }
        let width = u - l;
        for i in 1..=self.subdivisions {
            pts.push(l + width * i as f64 / (self.subdivisions + 1) as f64);
        }
        pts.extend(self.breakpoints.iter().copied().filter(|b| *b > l && *b < u));
        if self.random > 0 && width > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, l, u));
            for _ in 0..self.random {
                pts.push(rng.gen_range(l..=u));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}

fn mix(seed: u64, l: f64, u: f64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [l.to_bits(), u.to_bits()] {
        h ^= v;
        h = h.wrapping_mul(0x0100_0000_01b3).rotate_left(29);
    }
    h
}

/// Concrete states of `elem`: `neuron` ranges over the grid of its interval,
/// every other neuron over `{l, midpoint, u}`. States that break any affine
/// bound are dropped.
pub fn sample_concretization(
    elem: &AbstractElement,
    neuron: NeuronId,
    grid: &GridSpec,
    seed: u64,
) -> Result<Vec<ConcreteState>, DomainError> {
    elem.shape(neuron)?;
    let mut axes = Vec::with_capacity(elem.n);
    for (i, s) in elem.shapes.iter().enumerate() {
        let (l, u) = s.bounds();
        if l > u {
            return Err(DomainError::Infeasible);
        }
        if i == neuron {
            axes.push(grid.points(l, u, seed)?);
        } else {
            let mut v = vec![l, 0.5 * (l + u), u];
            v.dedup();
            axes.push(v);
        }
    }
    let total: usize = axes.iter().map(Vec::len).product();
    if total > MAX_GRID_POINTS {
        return Err(DomainError::GridTooLarge(total));
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let values: Vec<f64> = idx.iter().zip(&axes).map(|(&k, a)| a[k]).collect();
        let state = ConcreteState::new(values);
        if elem.contains(&state, 1e-9)? {
            out.push(state);
        }
        // Odometer increment, last axis fastest.
        let mut d = axes.len();
        loop {
            if d == 0 {
                if out.is_empty() {
                    return Err(DomainError::Infeasible);
                }
                return Ok(out);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AffineExpr, DeepPolyShape, DomainTag, NeuronShape};

    #[test]
    fn unit_grid() {
        let e = AbstractElement::single(DomainTag::DeepPoly, -4.0, 4.0).unwrap();
        let xs: Vec<f64> = sample_concretization(&e, 0, &GridSpec::unit(), 0)
            .unwrap()
            .into_iter()
            .map(|s| s.values[0])
            .collect();
        assert_eq!(xs, (-4..=4).map(f64::from).collect::<Vec<_>>());

        let e = AbstractElement::single(DomainTag::DeepPoly, -5.0, 4.0).unwrap();
        assert_eq!(
            sample_concretization(&e, 0, &GridSpec::unit(), 0).unwrap().len(),
            10
        );
    }

    #[test]
    fn degenerate() {
        let e = AbstractElement::single(DomainTag::Interval, 0.0, 0.0).unwrap();
        let s = sample_concretization(&e, 0, &GridSpec::unit().random(5), 3).unwrap();
        assert_eq!(s, vec![ConcreteState::new(vec![0.0])]);
    }

    #[test]
    fn endpoints_and_breakpoints_kept() {
        let g = GridSpec::with_step(2.0).with_breakpoints(&[-3.0, 3.0, 10.0]);
        let p = g.points(-3.5, 3.5, 0).unwrap();
        assert_eq!(p, vec![-3.5, -3.0, -2.0, 0.0, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn random_points_deterministic() {
        let g = GridSpec::unit().random(8);
        assert_eq!(g.points(-1.0, 1.0, 7).unwrap(), g.points(-1.0, 1.0, 7).unwrap());
        assert_ne!(g.points(-1.0, 1.0, 7).unwrap(), g.points(-1.0, 1.0, 8).unwrap());
    }

    #[test]
    fn affine_bounds_filter_states() {
        let x0 = NeuronShape::DeepPoly(DeepPolyShape::from_box(0.0, 2.0));
        let x1 = NeuronShape::DeepPoly(DeepPolyShape {
            l: 0.0,
            u: 2.0,
            lower: AffineExpr::var(0),
            upper: AffineExpr::var(0),
        });
        let e = AbstractElement::new(DomainTag::DeepPoly, vec![x0, x1]).unwrap();
        let states = sample_concretization(&e, 1, &GridSpec::unit(), 0).unwrap();
        assert!(!states.is_empty());
        for s in &states {
            assert_eq!(s.values[0], s.values[1]);
        }
    }
}
