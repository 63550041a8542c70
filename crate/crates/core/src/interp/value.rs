use std::fmt;

use crate::domain::{AffineExpr, NeuronId, ZonotopeShape};

use super::EvalFault;

/// A callable passed as a value, e.g. `simplify_lower` in `.map(simplify_lower)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Callable {
    Builtin(String),
    /// Index into the program's function definitions.
    User(usize),
}

/// Runtime result of a DSL expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Neuron(NeuronId),
    Poly(AffineExpr),
    Zono(ZonotopeShape),
    List(Vec<Value>),
    Func(Callable),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Bool(_) => "Bool",
            Value::Int(_) => "Int",
            Value::Float(_) => "Float",
            Value::Neuron(_) => "Neuron",
            Value::Poly(_) => "PolyExp",
            Value::Zono(_) => "ZonoExp",
            Value::List(_) => "List",
            Value::Func(_) => "Func",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_neuron(&self) -> Option<NeuronId> {
        match self {
            Value::Neuron(id) => Some(*id),
            _ => None,
        }
    }

    fn is_num(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Float(_))
    }

    /// The value as an affine expression, if it is numeric or polyhedral.
    pub fn as_affine(&self) -> Option<AffineExpr> {
        match self {
            Value::Int(_) | Value::Float(_) => self.as_f64().map(AffineExpr::constant),
            Value::Neuron(id) => Some(AffineExpr::var(*id)),
            Value::Poly(a) => Some(a.clone()),
            _ => None,
        }
    }

    /// The value as a zonotope expression, if it is numeric or a zonotope.
    pub fn as_zono(&self) -> Option<ZonotopeShape> {
        match self {
            Value::Int(_) | Value::Float(_) => self.as_f64().map(ZonotopeShape::constant),
            Value::Zono(z) => Some(z.clone()),
            _ => None,
        }
    }

    pub fn f64_checked(&self, what: &str) -> Result<f64, EvalFault> {
        self.as_f64()
            .ok_or_else(|| mismatch(format!("{what} expects a number, found {}", self.kind())))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Neuron(id) => write!(f, "x{id}"),
            Value::Poly(a) => write!(f, "{a}"),
            Value::Zono(z) => {
                write!(f, "{}", z.center)?;
                for (e, g) in &z.generators {
                    write!(f, " + {g}*eps{e}")?;
                }
                Ok(())
            }
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Func(Callable::Builtin(n)) => write!(f, "<builtin {n}>"),
            Value::Func(Callable::User(i)) => write!(f, "<func #{i}>"),
        }
    }
}

pub(crate) fn mismatch(msg: impl Into<String>) -> EvalFault {
    EvalFault::TypeMismatch(msg.into())
}

fn both_int(a: &Value, b: &Value) -> Option<(i64, i64)> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some((*x, *y)),
        _ => None,
    }
}

fn is_zono_side(v: &Value) -> bool {
    matches!(v, Value::Zono(_))
}

/// `a + k·b` for the additive operators.
fn add_scaled(a: &Value, b: &Value, k: f64, op: &str) -> Result<Value, EvalFault> {
    if let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) {
        if let Some((i, j)) = both_int(a, b) {
            let r = if k > 0.0 {
                i.checked_add(j)
            } else {
                i.checked_sub(j)
            };
            if let Some(r) = r {
                return Ok(Value::Int(r));
            }
        }
        return Ok(Value::Float(x + k * y));
    }
    if is_zono_side(a) || is_zono_side(b) {
        if let (Some(mut x), Some(y)) = (a.as_zono(), b.as_zono()) {
            x.add_scaled(&y, k);
            return Ok(Value::Zono(x));
        }
    } else if let (Some(mut x), Some(y)) = (a.as_affine(), b.as_affine()) {
        x.add_scaled(&y, k);
        return Ok(Value::Poly(x));
    }
    Err(mismatch(format!(
        "cannot apply `{op}` to {} and {}",
        a.kind(),
        b.kind()
    )))
}

pub fn add(a: &Value, b: &Value) -> Result<Value, EvalFault> {
    add_scaled(a, b, 1.0, "+")
}

pub fn sub(a: &Value, b: &Value) -> Result<Value, EvalFault> {
    add_scaled(a, b, -1.0, "-")
}

pub fn mul(a: &Value, b: &Value) -> Result<Value, EvalFault> {
    if let Some((i, j)) = both_int(a, b) {
        if let Some(r) = i.checked_mul(j) {
            return Ok(Value::Int(r));
        }
    }
    let (num, other) = match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => return Ok(Value::Float(x * y)),
        (Some(x), None) => (x, b),
        (None, Some(y)) => (y, a),
        (None, None) => {
            return Err(mismatch(format!(
                "product of {} and {} is not affine",
                a.kind(),
                b.kind()
            )))
        }
    };
    scale(other, num)
}

fn scale(v: &Value, k: f64) -> Result<Value, EvalFault> {
    match v {
        Value::Zono(z) => Ok(Value::Zono(z.scale(k))),
        other => other
            .as_affine()
            .map(|a| Value::Poly(a.scale(k)))
            .ok_or_else(|| mismatch(format!("cannot scale {}", other.kind()))),
    }
}

pub fn div(a: &Value, b: &Value) -> Result<Value, EvalFault> {
    let d = b
        .as_f64()
        .ok_or_else(|| mismatch(format!("cannot divide by {}", b.kind())))?;
    if d == 0.0 {
        return Err(EvalFault::DivisionByZero);
    }
    match a.as_f64() {
        Some(x) => Ok(Value::Float(x / d)),
        None => scale(a, 1.0 / d),
    }
}

pub fn neg(a: &Value) -> Result<Value, EvalFault> {
    match a {
        Value::Int(i) => Ok(i
            .checked_neg()
            .map(Value::Int)
            .unwrap_or(Value::Float(-(*i as f64)))),
        Value::Float(x) => Ok(Value::Float(-x)),
        other => scale(other, -1.0),
    }
}

/// Numeric comparison; booleans support only equality.
pub fn compare(op: crate::dsl::ast::BinOp, a: &Value, b: &Value) -> Result<bool, EvalFault> {
    use crate::dsl::ast::BinOp::*;
    if let (Value::Bool(x), Value::Bool(y)) = (a, b) {
        return match op {
            Eq => Ok(x == y),
            Ne => Ok(x != y),
            _ => Err(mismatch("booleans can only be compared for equality")),
        };
    }
    if !(a.is_num() && b.is_num()) {
        return Err(mismatch(format!(
            "cannot evaluate comparison between {} and {}",
            a.kind(),
            b.kind()
        )));
    }
    let (x, y) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
    Ok(match op {
        Lt => x < y,
        Le => x <= y,
        Gt => x > y,
        Ge => x >= y,
        Eq => x == y,
        Ne => x != y,
        _ => return Err(mismatch(format!("`{}` is not a comparison", op.as_str()))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_promotion() {
        assert_eq!(add(&Value::Int(2), &Value::Int(3)).unwrap(), Value::Int(5));
        assert_eq!(
            add(&Value::Int(2), &Value::Float(0.5)).unwrap(),
            Value::Float(2.5)
        );
        let p = add(&Value::Neuron(0), &Value::Float(3.0)).unwrap();
        assert_eq!(p, Value::Poly(AffineExpr::from_parts(3.0, [(0, 1.0)])));
        let q = div(&p, &Value::Int(6)).unwrap();
        assert_eq!(q, Value::Poly(AffineExpr::from_parts(0.5, [(0, 1.0 / 6.0)])));
        assert_eq!(
            div(&Value::Int(1), &Value::Float(0.0)),
            Err(EvalFault::DivisionByZero)
        );
        assert!(mul(&Value::Neuron(0), &Value::Neuron(1)).is_err());
        assert_eq!(
            neg(&Value::Neuron(2)).unwrap(),
            Value::Poly(AffineExpr::term(2, -1.0))
        );
    }

    #[test]
    fn zonotope_arithmetic() {
        let z = ZonotopeShape::from_box(-1.0, 1.0, 0);
        let r = add(&mul(&Value::Float(2.0), &Value::Zono(z)).unwrap(), &Value::Int(1)).unwrap();
        let Value::Zono(r) = r else { panic!() };
        assert_eq!(r.center, 1.0);
        assert_eq!(r.generators[&0], 2.0);
        assert!(add(&Value::Neuron(0), &Value::Zono(ZonotopeShape::constant(0.0))).is_err());
    }
}
