use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CertifyError;
use crate::ops::{self, OperatorKind};

fn op_by_name<'de, D: Deserializer<'de>>(d: D) -> Result<OperatorKind, D::Error> {
    let name = String::deserialize(d)?;
    OperatorKind::from_name(&name).map_err(serde::de::Error::custom)
}

fn op_name<S: Serializer>(op: &OperatorKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(op.name())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    /// `y = W x + b`, one weight row per output.
    Affine { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    /// Element-wise activation.
    Activation {
        #[serde(deserialize_with = "op_by_name", serialize_with = "op_name")]
        op: OperatorKind,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl Network {
    /// Checks that shapes chain and entries are finite. Returns the output width.
    pub fn check(&self) -> Result<usize, CertifyError> {
        let mut width = self.input_dim;
        if width == 0 {
            return Err(CertifyError::Network("input_dim must be positive".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Affine { weights, bias } => {
                    if weights.is_empty() || weights.len() != bias.len() {
                        return Err(CertifyError::Network(format!(
                            "layer {k}: {} weight rows, {} biases",
                            weights.len(),
                            bias.len()
                        )));
                    }
                    if let Some(row) = weights.iter().find(|r| r.len() != width) {
                        return Err(CertifyError::Network(format!(
                            "layer {k}: row of width {}, expected {width}",
                            row.len()
                        )));
                    }
                    if !weights.iter().flatten().chain(bias).all(|v| v.is_finite()) {
                        return Err(CertifyError::Network(format!("layer {k}: non-finite entry")));
                    }
                    width = weights.len();
                }
                Layer::Activation { op } => {
                    if !op.is_unary() {
                        return Err(CertifyError::Network(format!(
                            "layer {k}: `{op}` is not an activation"
                        )));
                    }
                }
            }
        }
        Ok(width)
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Affine { weights, .. } => Some(weights.len()),
                Layer::Activation { .. } => None,
            })
            .unwrap_or(self.input_dim)
    }

    /// Concrete forward pass.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = match layer {
                Layer::Affine { weights, bias } => weights
                    .iter()
                    .zip(bias)
                    .map(|(row, &b)| ops::affine(row, b, &v))
                    .collect(),
                Layer::Activation { op } => v.iter().map(|&t| op.apply(t)).collect(),
            };
        }
        v
    }

    /// Index of the unique maximal score; `None` on ties.
    pub fn classify(&self, x: &[f64]) -> Option<usize> {
        let y = self.forward(x);
        let (best, &top) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        (y.iter().filter(|&&s| s == top).count() == 1).then_some(best)
    }
}

/// L∞ robustness query around `input`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub input: Vec<f64>,
    pub epsilon: f64,
    pub true_label: usize,
}

impl RobustnessQuery {
    pub fn check(&self, net: &Network) -> Result<(), CertifyError> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CertifyError::Query(format!(
                "epsilon must be ≥ 0, got {}",
                self.epsilon
            )));
        }
        if self.input.len() != net.input_dim {
            return Err(CertifyError::Query(format!(
                "input has {} coordinates, network expects {}",
                self.input.len(),
                net.input_dim
            )));
        }
        if self.true_label >= net.output_dim() {
            return Err(CertifyError::Query(format!(
                "label {} out of range",
                self.true_label
            )));
        }
        Ok(())
    }

    pub fn input_box(&self) -> Vec<(f64, f64)> {
        self.input
            .iter()
            .map(|&x| (x - self.epsilon, x + self.epsilon))
            .collect()
    }
}

/// Exhaustive search over the grid with `2 · steps + 1` points per input
/// coordinate across the ε-box. Returns a point where some other label
/// scores at least as high as the true one.
pub fn grid_attack(net: &Network, q: &RobustnessQuery, steps: usize) -> Option<Vec<f64>> {
    let axes: Vec<Vec<f64>> = q
        .input
        .iter()
        .map(|&x| {
            if q.epsilon == 0.0 || steps == 0 {
                return vec![x];
            }
            (0..=2 * steps)
                .map(|k| x - q.epsilon + q.epsilon * k as f64 / steps as f64)
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let point: Vec<f64> = idx.iter().zip(&axes).map(|(&k, a)| a[k]).collect();
        let y = net.forward(&point);
        let t = y[q.true_label];
        if y.iter().enumerate().any(|(j, &s)| j != q.true_label && s >= t) {
            return Some(point);
        }
        let mut d = 0;
        loop {
            if d == axes.len() {
                return None;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
