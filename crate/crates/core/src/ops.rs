//! Concrete operators, their kinks, and the gradient-based sample weights.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default finite-difference step.
pub const DEFAULT_H: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorKind {
    Relu,
    Relu6,
    HardTanh,
    HardSigmoid,
    HardSwish,
    Gelu,
    Elu { alpha: f64 },
    Sigmoid,
    Abs,
    Affine,
    Add,
}

#[derive(Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("`{op}` expects {expected} input(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown operator `{0}`")]
    Unknown(String),
    #[error("ELU alpha must be positive, got {0}")]
    BadAlpha(f64),
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 11] = [
        OperatorKind::Relu,
        OperatorKind::Relu6,
        OperatorKind::HardTanh,
        OperatorKind::HardSigmoid,
        OperatorKind::HardSwish,
        OperatorKind::Gelu,
        OperatorKind::Elu { alpha: 1.0 },
        OperatorKind::Sigmoid,
        OperatorKind::Abs,
        OperatorKind::Affine,
        OperatorKind::Add,
    ];

    /// ELU with a validated `alpha`.
    pub fn elu(alpha: f64) -> Result<Self, OpsError> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(OperatorKind::Elu { alpha })
        } else {
            Err(OpsError::BadAlpha(alpha))
        }
    }

    /// Lower-case name used by the CLI and config files.
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Relu => "relu",
            OperatorKind::Relu6 => "relu6",
            OperatorKind::HardTanh => "hardtanh",
            OperatorKind::HardSigmoid => "hardsigmoid",
            OperatorKind::HardSwish => "hardswish",
            OperatorKind::Gelu => "gelu",
            OperatorKind::Elu { .. } => "elu",
            OperatorKind::Sigmoid => "sigmoid",
            OperatorKind::Abs => "abs",
            OperatorKind::Affine => "affine",
            OperatorKind::Add => "add",
        }
    }

    /// Case-insensitive lookup; DSL case labels such as `HardSigmoid` resolve too.
    pub fn from_name(name: &str) -> Result<Self, OpsError> {
        let lower = name.to_ascii_lowercase();
        OperatorKind::ALL
            .into_iter()
            .find(|op| op.name() == lower)
            .ok_or_else(|| OpsError::Unknown(name.to_string()))
    }

    pub fn is_unary(self) -> bool {
        !matches!(self, OperatorKind::Affine | OperatorKind::Add)
    }

    /// Points where the operator is not differentiable.
    pub fn breakpoints(self) -> &'static [f64] {
        match self {
            OperatorKind::Relu | OperatorKind::Abs | OperatorKind::Elu { .. } => &[0.0],
            OperatorKind::Relu6 => &[0.0, 6.0],
            OperatorKind::HardTanh => &[-1.0, 1.0],
            OperatorKind::HardSigmoid | OperatorKind::HardSwish => &[-3.0, 3.0],
            OperatorKind::Gelu | OperatorKind::Sigmoid | OperatorKind::Affine | OperatorKind::Add => &[],
        }
    }

    /// Piecewise linear operators have exact linear bounds on every piece.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(
            self,
            OperatorKind::Relu
                | OperatorKind::Relu6
                | OperatorKind::HardTanh
                | OperatorKind::HardSigmoid
                | OperatorKind::Abs
                | OperatorKind::Affine
                | OperatorKind::Add
        )
    }

    /// Scalar evaluation of a unary operator. Multi-input kinds return the input.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            OperatorKind::Relu => x.max(0.0),
            OperatorKind::Relu6 => x.clamp(0.0, 6.0),
            OperatorKind::HardTanh => x.clamp(-1.0, 1.0),
            OperatorKind::HardSigmoid => hard_sigmoid(x),
            OperatorKind::HardSwish => x * (x + 3.0).clamp(0.0, 6.0) / 6.0,
            OperatorKind::Gelu => gelu(x),
            OperatorKind::Elu { alpha } => elu(x, alpha),
            OperatorKind::Sigmoid => sigmoid(x),
            OperatorKind::Abs => x.abs(),
            OperatorKind::Affine | OperatorKind::Add => x,
        }
    }

    /// Evaluates the operator on its inputs. Affine here is the plain sum of
    /// already-weighted inputs; see [`affine`] for weights and bias.
    pub fn eval(self, inputs: &[f64]) -> Result<f64, OpsError> {
        match self {
            OperatorKind::Affine => Ok(inputs.iter().sum()),
            OperatorKind::Add => match inputs {
                [a, b] => Ok(a + b),
                _ => Err(OpsError::Arity {
                    op: self.name(),
                    expected: 2,
                    got: inputs.len(),
                }),
            },
            _ => match inputs {
                [x] => Ok(self.apply(*x)),
                _ => Err(OpsError::Arity {
                    op: self.name(),
                    expected: 1,
                    got: inputs.len(),
                }),
            },
        }
    }

    /// Finite-difference slope at `x`. Within `h` of a breakpoint the larger
    /// absolute one-sided difference is returned instead of the central one.
    pub fn numeric_gradient(self, x: f64, h: f64) -> f64 {
        if !self.is_unary() {
            return 1.0;
        }
        let f = |v: f64| self.apply(v);
        if self.breakpoints().iter().any(|b| (x - b).abs() < h) {
            let left = (f(x) - f(x - h)) / h;
            let right = (f(x + h) - f(x)) / h;
            left.abs().max(right.abs())
        } else {
            (f(x + h) - f(x - h)) / (2.0 * h)
        }
    }

    /// Normalized softplus-of-gradient weights over `samples`.
    pub fn weights(self, samples: &[f64]) -> Vec<f64> {
        let phi: Vec<f64> = samples
            .iter()
            .map(|&x| softplus(self.numeric_gradient(x, DEFAULT_H).abs()))
            .collect();
        let total: f64 = phi.iter().sum();
        phi.into_iter().map(|p| p / total).collect()
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `w · x + b`.
pub fn affine(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn hard_sigmoid(x: f64) -> f64 {
    ((x + 3.0) / 6.0).clamp(0.0, 1.0)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
