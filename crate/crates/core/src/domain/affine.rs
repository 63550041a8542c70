use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{DomainError, NeuronId};

/// `c + Σ aᵢ·xᵢ` with a sparse coefficient map. Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    #[serde(rename = "c")]
    pub constant: f64,
    #[serde(default, with = "super::sparse")]
    pub coeffs: BTreeMap<NeuronId, f64>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    /// The single variable `x_id`.
    pub fn var(id: NeuronId) -> Self {
        Self::term(id, 1.0)
    }

    pub fn term(id: NeuronId, coeff: f64) -> Self {
        let mut e = Self::constant(0.0);
        e.add_term(id, coeff);
        e
    }

    /// Builds from parts, dropping zero coefficients.
    pub fn from_parts(constant: f64, coeffs: impl IntoIterator<Item = (NeuronId, f64)>) -> Self {
        let mut e = Self::constant(constant);
        for (id, c) in coeffs {
            e.add_term(id, c);
        }
        e
    }

    pub fn add_term(&mut self, id: NeuronId, coeff: f64) {
        let slot = self.coeffs.entry(id).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.coeffs.remove(&id);
        }
    }

    /// `self += k · other`.
    pub fn add_scaled(&mut self, other: &AffineExpr, k: f64) {
        self.constant += k * other.constant;
        for (&id, &c) in &other.coeffs {
            self.add_term(id, k * c);
        }
    }

    pub fn scale(&self, k: f64) -> AffineExpr {
        let mut out = AffineExpr::constant(0.0);
        out.add_scaled(self, k);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, id: NeuronId) -> f64 {
        self.coeffs.get(&id).copied().unwrap_or(0.0)
    }

    pub fn max_id(&self) -> Option<NeuronId> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.coeffs.values().all(|c| c.is_finite())
    }

    /// `c + Σ aᵢ·x[i]`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        let mut acc = self.constant;
        for (&id, &c) in &self.coeffs {
            let v = x.get(id).ok_or(DomainError::UnknownNeuron(id))?;
            acc += c * v;
        }
        Ok(acc)
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for (id, c) in &self.coeffs {
            if *c < 0.0 {
                write!(f, " - {}*x{id}", -c)?;
            } else {
                write!(f, " + {c}*x{id}")?;
            }
        }
        Ok(())
    }
}

impl Add for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul<f64> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, k: f64) -> AffineExpr {
        self.scale(k)
    }
}

impl Neg for &AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let a = AffineExpr::from_parts(0.5, [(0, 1.0 / 6.0)]);
        assert!((a.eval(&[3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(AffineExpr::constant(7.0).eval(&[1.0, 2.0]).unwrap(), 7.0);
        let b = AffineExpr::from_parts(1.0, [(0, 2.0), (1, -1.0)]);
        assert_eq!(b.eval(&[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(b.eval(&[1.0]), Err(DomainError::UnknownNeuron(1)));
    }

    #[test]
    fn canonical_zeros() {
        let a = AffineExpr::var(3);
        let z = &a - &a;
        assert!(z.coeffs.is_empty());
        assert_eq!(z, AffineExpr::constant(0.0));
        assert!(AffineExpr::from_parts(1.0, [(2, 0.0)]).is_constant());
    }

    #[test]
    fn json_shape() {
        let a = AffineExpr::from_parts(0.5, [(0, 2.0)]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"c":0.5,"coeffs":{"0":2.0}}"#);
        let back: AffineExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}
