use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AffineExpr, DomainError, NeuronId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    DeepPoly,
    Interval,
    Zonotope,
}

impl DomainTag {
    pub fn name(self) -> &'static str {
        match self {
            DomainTag::DeepPoly => "deeppoly",
            DomainTag::Interval => "interval",
            DomainTag::Zonotope => "zonotope",
        }
    }

    /// Case-insensitive; accepts `deepz` and `ibp`/`box` aliases.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "deeppoly" => Some(DomainTag::DeepPoly),
            "interval" | "ibp" | "box" => Some(DomainTag::Interval),
            "zonotope" | "deepz" => Some(DomainTag::Zonotope),
            _ => None,
        }
    }

    /// Number of output fields a transformer case returns.
    pub fn arity(self) -> usize {
        match self {
            DomainTag::DeepPoly => 4,
            DomainTag::Interval => 2,
            DomainTag::Zonotope => 3,
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// ⟨l, u, L, U⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepPolyShape {
    pub l: f64,
    pub u: f64,
    #[serde(rename = "L")]
    pub lower: AffineExpr,
    #[serde(rename = "U")]
    pub upper: AffineExpr,
}

impl DeepPolyShape {
    /// Box with constant affine bounds.
    pub fn from_box(l: f64, u: f64) -> Self {
        DeepPolyShape {
            l,
            u,
            lower: AffineExpr::constant(l),
            upper: AffineExpr::constant(u),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalShape {
    pub l: f64,
    pub u: f64,
}

/// `center + Σ gᵢ·εᵢ`, εᵢ ∈ [−1, 1].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZonotopeShape {
    pub center: f64,
    #[serde(default, with = "super::sparse")]
    pub generators: BTreeMap<usize, f64>,
}

impl ZonotopeShape {
    pub fn constant(c: f64) -> Self {
        ZonotopeShape {
            center: c,
            generators: BTreeMap::new(),
        }
    }

    /// Box `[l, u]` as a single-generator zonotope on noise symbol `eps`.
    pub fn from_box(l: f64, u: f64, eps: usize) -> Self {
        let mut z = ZonotopeShape::constant(0.5 * (l + u));
        z.add_generator(eps, 0.5 * (u - l));
        z
    }

    pub fn add_generator(&mut self, eps: usize, g: f64) {
        let slot = self.generators.entry(eps).or_insert(0.0);
        *slot += g;
        if *slot == 0.0 {
            self.generators.remove(&eps);
        }
    }

    pub fn add_scaled(&mut self, other: &ZonotopeShape, k: f64) {
        self.center += k * other.center;
        for (&e, &g) in &other.generators {
            self.add_generator(e, k * g);
        }
    }

    pub fn scale(&self, k: f64) -> ZonotopeShape {
        let mut out = ZonotopeShape::constant(0.0);
        out.add_scaled(self, k);
        out
    }

    pub fn radius(&self) -> f64 {
        self.generators.values().map(|g| g.abs()).sum()
    }

    pub fn bounds(&self) -> (f64, f64) {
        let r = self.radius();
        (self.center - r, self.center + r)
    }

    pub fn max_symbol(&self) -> Option<usize> {
        self.generators.keys().next_back().copied()
    }
}

/// One neuron's abstract state. Zonotope neurons also carry scalar bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, try_from = "RawShape")]
pub enum NeuronShape {
    DeepPoly(DeepPolyShape),
    Zonotope { l: f64, u: f64, z: ZonotopeShape },
    Interval(IntervalShape),
}

/// Wire form of [`NeuronShape`]; the variant is decided by which fields are
/// present. Untagged decoding cannot be used because integer map keys in
/// buffered content fail to parse.
#[derive(Deserialize)]
struct RawShape {
    l: f64,
    u: f64,
    #[serde(rename = "L")]
    lower: Option<AffineExpr>,
    #[serde(rename = "U")]
    upper: Option<AffineExpr>,
    z: Option<ZonotopeShape>,
}

impl TryFrom<RawShape> for NeuronShape {
    type Error = String;

    fn try_from(r: RawShape) -> Result<Self, String> {
        match (r.lower, r.upper, r.z) {
            (Some(lower), Some(upper), None) => Ok(NeuronShape::DeepPoly(DeepPolyShape {
                l: r.l,
                u: r.u,
                lower,
                upper,
            })),
            (None, None, Some(z)) => Ok(NeuronShape::Zonotope { l: r.l, u: r.u, z }),
            (None, None, None) => Ok(NeuronShape::Interval(IntervalShape { l: r.l, u: r.u })),
            _ => Err("shape needs both L and U, or z, or neither".to_string()),
        }
    }
}

impl NeuronShape {
    pub fn domain(&self) -> DomainTag {
        match self {
            NeuronShape::DeepPoly(_) => DomainTag::DeepPoly,
            NeuronShape::Interval(_) => DomainTag::Interval,
            NeuronShape::Zonotope { .. } => DomainTag::Zonotope,
        }
    }

    /// Box shape in `domain`; zonotopes get a fresh generator on `eps`.
    pub fn from_box(domain: DomainTag, l: f64, u: f64, eps: usize) -> Self {
        match domain {
            DomainTag::DeepPoly => NeuronShape::DeepPoly(DeepPolyShape::from_box(l, u)),
            DomainTag::Interval => NeuronShape::Interval(IntervalShape { l, u }),
            DomainTag::Zonotope => NeuronShape::Zonotope {
                l,
                u,
                z: ZonotopeShape::from_box(l, u, eps),
            },
        }
    }

    /// Scalar bounds as stored.
    pub fn scalar_bounds(&self) -> (f64, f64) {
        match self {
            NeuronShape::DeepPoly(s) => (s.l, s.u),
            NeuronShape::Interval(s) => (s.l, s.u),
            NeuronShape::Zonotope { l, u, .. } => (*l, *u),
        }
    }

    /// Tightest box implied by the shape.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            NeuronShape::Zonotope { l, u, z } => {
                let (zl, zu) = z.bounds();
                (l.max(zl), u.min(zu))
            }
            other => other.scalar_bounds(),
        }
    }

    /// The constraints a concrete value of this neuron must satisfy.
    pub fn constraints(&self) -> Vec<Constraint> {
        match self {
            NeuronShape::DeepPoly(s) => vec![
                Constraint::ScalarGe { c: s.l },
                Constraint::ScalarLe { c: s.u },
                Constraint::AffineGe { a: s.lower.clone() },
                Constraint::AffineLe { a: s.upper.clone() },
            ],
            _ => {
                let (l, u) = self.bounds();
                vec![Constraint::ScalarGe { c: l }, Constraint::ScalarLe { c: u }]
            }
        }
    }

    pub fn check(&self, own: NeuronId) -> Result<(), DomainError> {
        let (l, u) = self.scalar_bounds();
        if !(l.is_finite() && u.is_finite()) {
            return Err(DomainError::InvalidShape(format!(
                "neuron {own}: non-finite bounds"
            )));
        }
        if l > u {
            return Err(DomainError::InvalidShape(format!(
                "neuron {own}: lower bound {l} exceeds upper bound {u}"
            )));
        }
        match self {
            NeuronShape::DeepPoly(s) => {
                for a in [&s.lower, &s.upper] {
                    if !a.is_finite() {
                        return Err(DomainError::InvalidShape(format!(
                            "neuron {own}: non-finite affine bound"
                        )));
                    }
                    if a.max_id().is_some_and(|m| m >= own) {
                        return Err(DomainError::InvalidShape(format!(
                            "neuron {own}: affine bound references a later neuron"
                        )));
                    }
                }
            }
            NeuronShape::Zonotope { z, .. } => {
                if !z.center.is_finite() || z.generators.values().any(|g| !g.is_finite()) {
                    return Err(DomainError::InvalidShape(format!(
                        "neuron {own}: non-finite zonotope"
                    )));
                }
            }
            NeuronShape::Interval(_) => {}
        }
        Ok(())
    }
}

/// A one-sided bound on a neuron value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    ScalarLe { c: f64 },
    ScalarGe { c: f64 },
    AffineLe { a: AffineExpr },
    AffineGe { a: AffineExpr },
}

impl Constraint {
    /// Value of the bound at `x`.
    pub fn bound_at(&self, x: &[f64]) -> Result<f64, DomainError> {
        match self {
            Constraint::ScalarLe { c } | Constraint::ScalarGe { c } => Ok(*c),
            Constraint::AffineLe { a } | Constraint::AffineGe { a } => a.eval(x),
        }
    }

    pub fn is_upper(&self) -> bool {
        matches!(self, Constraint::ScalarLe { .. } | Constraint::AffineLe { .. })
    }

    pub fn is_satisfied(&self, m: f64, x: &[f64]) -> Result<bool, DomainError> {
        let b = self.bound_at(x)?;
        Ok(if self.is_upper() { m <= b } else { m >= b })
    }
}

/// An abstract element over neurons `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractElement {
    pub domain: DomainTag,
    pub n: usize,
    pub shapes: Vec<NeuronShape>,
}

impl AbstractElement {
    /// Checks counts, domain agreement, bound order and layering.
    pub fn new(domain: DomainTag, shapes: Vec<NeuronShape>) -> Result<Self, DomainError> {
        let elem = AbstractElement {
            domain,
            n: shapes.len(),
            shapes,
        };
        elem.check()?;
        Ok(elem)
    }

    /// Single-neuron box element.
    pub fn single(domain: DomainTag, l: f64, u: f64) -> Result<Self, DomainError> {
        Self::new(domain, vec![NeuronShape::from_box(domain, l, u, 0)])
    }

    pub fn check(&self) -> Result<(), DomainError> {
        if self.n != self.shapes.len() {
            return Err(DomainError::InvalidShape(format!(
                "n = {} but {} shapes given",
                self.n,
                self.shapes.len()
            )));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.domain() != self.domain {
                return Err(DomainError::InvalidShape(format!(
                    "neuron {i} is {} inside a {} element",
                    s.domain(),
                    self.domain
                )));
            }
            s.check(i)?;
        }
        Ok(())
    }

    pub fn shape(&self, neuron: NeuronId) -> Result<&NeuronShape, DomainError> {
        self.shapes.get(neuron).ok_or(DomainError::UnknownNeuron(neuron))
    }

    /// The constraints of one neuron, in stable order.
    pub fn constraints_of(&self, neuron: NeuronId) -> Result<Vec<Constraint>, DomainError> {
        Ok(self.shape(neuron)?.constraints())
    }

    /// Checks `x` against every neuron's constraints.
    pub fn contains(&self, x: &ConcreteState, tol: f64) -> Result<bool, DomainError> {
        for (i, s) in self.shapes.iter().enumerate() {
            let v = *x.values.get(i).ok_or(DomainError::UnknownNeuron(i))?;
            for c in s.constraints() {
                let b = c.bound_at(&x.values)?;
                let ok = if c.is_upper() { v <= b + tol } else { v >= b - tol };
                if !ok {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// One concrete value per neuron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcreteState {
    pub values: Vec<f64>,
}

impl ConcreteState {
    pub fn new(values: Vec<f64>) -> Self {
        ConcreteState { values }
    }
}

/// `eval_affine(a, x)`.
pub fn eval_affine(a: &AffineExpr, x: &ConcreteState) -> Result<f64, DomainError> {
    a.eval(&x.values)
}
