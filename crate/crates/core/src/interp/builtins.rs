//! Native implementations of the builtin function library.

use crate::domain::{AffineExpr, NeuronShape};
use crate::ops;

use super::value::{mismatch, Value};
use super::{EvalContext, EvalFault};

const BUILTINS: [&str; 22] = [
    "simplify_lower",
    "simplify_upper",
    "replace_lower",
    "replace_upper",
    "priority",
    "priority2",
    "stop",
    "stop_traverse",
    "backsubs_lower",
    "backsubs_upper",
    "f",
    "slope",
    "intercept",
    "f1",
    "f2",
    "f3",
    "compute_l",
    "compute_u",
    "avg",
    "gelu",
    "elu",
    "sigmoid",
];

/// Upper bound on back-substitution steps; a well-formed element needs at most one per layer.
const MAX_SUBSTITUTIONS: usize = 10_000;

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

fn arity(name: &str, args: &[Value], n: usize) -> Result<(), EvalFault> {
    if args.len() == n {
        Ok(())
    } else {
        Err(mismatch(format!(
            "`{name}` takes {n} arguments, {} given",
            args.len()
        )))
    }
}

fn neuron(name: &str, v: &Value) -> Result<usize, EvalFault> {
    v.as_neuron()
        .ok_or_else(|| mismatch(format!("`{name}` expects a Neuron, found {}", v.kind())))
}

fn div(a: f64, b: f64) -> Result<f64, EvalFault> {
    if b == 0.0 {
        Err(EvalFault::DivisionByZero)
    } else {
        Ok(a / b)
    }
}

fn bounds(ctx: &EvalContext, id: usize) -> Result<(f64, f64), EvalFault> {
    Ok(ctx.shape(id)?.bounds())
}

fn simplify_term(ctx: &EvalContext, id: usize, c: f64, lower: bool) -> Result<f64, EvalFault> {
    let (l, u) = bounds(ctx, id)?;
    Ok(if (c >= 0.0) == lower { c * l } else { c * u })
}

/// Collapses `e` to a scalar bound using each neuron's interval.
pub fn simplify(e: &AffineExpr, ctx: &EvalContext, lower: bool) -> Result<f64, EvalFault> {
    let mut acc = e.constant;
    for (&id, &c) in &e.coeffs {
        acc += simplify_term(ctx, id, c, lower)?;
    }
    Ok(acc)
}

fn replace_term(ctx: &EvalContext, id: usize, c: f64, lower: bool) -> Result<AffineExpr, EvalFault> {
    Ok(match ctx.shape(id)? {
        NeuronShape::DeepPoly(s) => {
            if (c >= 0.0) == lower {
                s.lower.scale(c)
            } else {
                s.upper.scale(c)
            }
        }
        _ => AffineExpr::constant(simplify_term(ctx, id, c, lower)?),
    })
}

/// One backward step: every neuron of the deepest non-input layer in `e` is
/// replaced by its lower or upper affine bound according to the sign of its
/// coefficient. Returns `None` once only input neurons (or neurons without
/// affine bounds) remain.
pub fn substitute_layer(
    e: &AffineExpr,
    ctx: &EvalContext,
    lower: bool,
) -> Result<Option<AffineExpr>, EvalFault> {
    let mut top = 0;
    for &id in e.coeffs.keys() {
        top = top.max(ctx.meta(id)?.layer);
    }
    if top == 0 {
        return Ok(None);
    }
    let mut out = AffineExpr::constant(e.constant);
    for (&id, &c) in &e.coeffs {
        if ctx.meta(id)?.layer == top {
            if !matches!(ctx.shape(id)?, NeuronShape::DeepPoly(_)) {
                return Ok(None);
            }
            out.add_scaled(&replace_term(ctx, id, c, lower)?, 1.0);
        } else {
            out.add_term(id, c);
        }
    }
    Ok(Some(out))
}

/// Substitutes backward until only input-layer neurons remain.
pub fn traverse(e: &AffineExpr, ctx: &EvalContext, lower: bool) -> Result<AffineExpr, EvalFault> {
    let mut cur = e.clone();
    for _ in 0..MAX_SUBSTITUTIONS {
        match substitute_layer(&cur, ctx, lower)? {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    Err(EvalFault::Unsupported(
        "back-substitution did not terminate".into(),
    ))
}

/// Back-substitution bound of `e`: the expression is concretized after every
/// substitution step and the tightest of those scalar bounds is returned.
/// Every stage is sound, so the best stage is as well.
pub fn backsubs(e: &AffineExpr, ctx: &EvalContext, lower: bool) -> Result<f64, EvalFault> {
    let mut cur = e.clone();
    let mut best = simplify(&cur, ctx, lower)?;
    for _ in 0..MAX_SUBSTITUTIONS {
        match substitute_layer(&cur, ctx, lower)? {
            Some(next) => {
                cur = next;
                let b = simplify(&cur, ctx, lower)?;
                best = if lower { best.max(b) } else { best.min(b) };
            }
            None => return Ok(best),
        }
    }
    Err(EvalFault::Unsupported(
        "back-substitution did not terminate".into(),
    ))
}

fn hs_slope(x1: f64, x2: f64) -> Result<f64, EvalFault> {
    div(x1 * (x1 + 3.0) - x2 * (x2 + 3.0), 6.0 * (x1 - x2))
}

fn f2(x: f64) -> f64 {
    x * ((x + 3.0) / 6.0)
}

fn products(ctx: &EvalContext, a: usize, b: usize) -> Result<[f64; 4], EvalFault> {
    let (al, au) = bounds(ctx, a)?;
    let (bl, bu) = bounds(ctx, b)?;
    Ok([al * bl, al * bu, au * bl, au * bu])
}

/// Dispatches a builtin by name.
pub(super) fn call(name: &str, args: &[Value], ctx: &EvalContext) -> Result<Value, EvalFault> {
    let num = |i: usize| args[i].f64_checked(name);
    match name {
        "simplify_lower" | "simplify_upper" => {
            arity(name, args, 2)?;
            let id = neuron(name, &args[0])?;
            Ok(Value::Float(simplify_term(
                ctx,
                id,
                num(1)?,
                name == "simplify_lower",
            )?))
        }
        "replace_lower" | "replace_upper" => {
            arity(name, args, 2)?;
            let id = neuron(name, &args[0])?;
            Ok(Value::Poly(replace_term(
                ctx,
                id,
                num(1)?,
                name == "replace_lower",
            )?))
        }
        "priority" | "priority2" => {
            arity(name, args, if name == "priority" { 1 } else { 2 })?;
            let layer = ctx.meta(neuron(name, &args[0])?)?.layer as i64;
            Ok(Value::Int(if name == "priority" { layer } else { -layer }))
        }
        "stop" | "stop_traverse" => {
            arity(name, args, if name == "stop" { 1 } else { 2 })?;
            Ok(Value::Bool(false))
        }
        "backsubs_lower" | "backsubs_upper" => {
            arity(name, args, 2)?;
            let e = args[0]
                .as_affine()
                .ok_or_else(|| mismatch(format!("`{name}` expects a PolyExp")))?;
            Ok(Value::Float(backsubs(&e, ctx, name == "backsubs_lower")?))
        }
        "f" => {
            arity(name, args, 2)?;
            let (l1, _) = bounds(ctx, neuron(name, &args[0])?)?;
            let (_, u2) = bounds(ctx, neuron(name, &args[1])?)?;
            Ok(Value::Bool(l1 >= u2))
        }
        "slope" => {
            arity(name, args, 2)?;
            Ok(Value::Float(hs_slope(num(0)?, num(1)?)?))
        }
        "intercept" => {
            arity(name, args, 2)?;
            let (x1, x2) = (num(0)?, num(1)?);
            Ok(Value::Float(f2(x1) - hs_slope(x1, x2)? * x1))
        }
        "f1" => {
            arity(name, args, 1)?;
            let x = num(0)?;
            Ok(Value::Float(if x < 3.0 { f2(x) } else { x }))
        }
        "f2" => {
            arity(name, args, 1)?;
            Ok(Value::Float(f2(num(0)?)))
        }
        "f3" => {
            arity(name, args, 1)?;
            let (l, u) = bounds(ctx, neuron(name, &args[0])?)?;
            Ok(Value::Float(f2(l).max(f2(u))))
        }
        "compute_l" | "compute_u" => {
            arity(name, args, 2)?;
            let p = products(ctx, neuron(name, &args[0])?, neuron(name, &args[1])?)?;
            let r = if name == "compute_l" {
                p.into_iter().fold(f64::INFINITY, f64::min)
            } else {
                p.into_iter().fold(f64::NEG_INFINITY, f64::max)
            };
            Ok(Value::Float(r))
        }
        "avg" => {
            arity(name, args, 1)?;
            let Value::List(items) = &args[0] else {
                return Err(mismatch("`avg` expects a list"));
            };
            let xs: Vec<f64> = items
                .iter()
                .map(|v| v.f64_checked("avg"))
                .collect::<Result<_, _>>()?;
            Ok(Value::Float(div(xs.iter().sum(), xs.len() as f64)?))
        }
        "gelu" | "elu" | "sigmoid" => {
            arity(name, args, 1)?;
            let x = num(0)?;
            Ok(Value::Float(match name {
                "gelu" => ops::gelu(x),
                "elu" => ops::elu(x, 1.0),
                _ => ops::sigmoid(x),
            }))
        }
        other => Err(EvalFault::Unbound(other.to_string())),
    }
}
