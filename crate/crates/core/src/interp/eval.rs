use std::collections::HashMap;

use crate::domain::{
    AffineExpr, DeepPolyShape, DomainTag, IntervalShape, NeuronId, NeuronShape, ZonotopeShape,
};
use crate::dsl::ast::{BinOp, Expr, ExprKind, Method, Program, TransRet};
use crate::dsl::ShapeSpec;
use crate::ops::OperatorKind;

use super::builtins;
use super::value::{self, mismatch, Callable, Value};
use super::{case_for, EvalContext, EvalFault};

type Env = HashMap<String, Value>;

pub(super) fn apply(
    prog: &Program,
    shape: &ShapeSpec,
    domain: DomainTag,
    op: OperatorKind,
    ctx: &EvalContext,
) -> Result<NeuronShape, EvalFault> {
    if domain != ctx.domain {
        return Err(EvalFault::Unsupported(format!(
            "{} transformer applied to {} shapes",
            domain, ctx.domain
        )));
    }
    let body = case_for(prog, op).ok_or_else(|| EvalFault::MissingCase(op.name().into()))?;
    let env = bindings(op, ctx)?;
    let ev = Evaluator { prog, ctx };
    let values = ev.trans_ret(body, &env)?;
    build_shape(shape, domain, &values, ctx.curr)
}

fn bindings(op: OperatorKind, ctx: &EvalContext) -> Result<Env, EvalFault> {
    let mut env = Env::new();
    env.insert("curr".into(), Value::Neuron(ctx.curr));
    env.insert("curr_list".into(), Value::List(vec![Value::Neuron(ctx.curr)]));
    let mut eps = ZonotopeShape::constant(0.0);
    eps.add_generator(ctx.fresh_eps, 1.0);
    env.insert("eps".into(), Value::Zono(eps));
    let prev_list = Value::List(ctx.prev.iter().map(|&p| Value::Neuron(p)).collect());
    match op {
        OperatorKind::Affine => {
            env.insert("prev".into(), prev_list);
        }
        OperatorKind::Add => {
            let [p0, p1] = ctx.prev[..] else {
                return Err(mismatch(format!("add needs 2 inputs, got {}", ctx.prev.len())));
            };
            env.insert("prev".into(), prev_list);
            env.insert("prev_0".into(), Value::Neuron(p0));
            env.insert("prev_1".into(), Value::Neuron(p1));
        }
        _ => {
            let [p] = ctx.prev[..] else {
                return Err(mismatch(format!(
                    "{} needs 1 input, got {}",
                    op.name(),
                    ctx.prev.len()
                )));
            };
            env.insert("prev".into(), Value::Neuron(p));
        }
    }
    Ok(env)
}

fn finite(name: &str, x: f64) -> Result<f64, EvalFault> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(EvalFault::NonFinite(name.to_string()))
    }
}

fn build_shape(
    shape: &ShapeSpec,
    domain: DomainTag,
    values: &[Value],
    curr: NeuronId,
) -> Result<NeuronShape, EvalFault> {
    if values.len() != shape.fields.len() {
        return Err(mismatch(format!(
            "case returned {} values for {} fields",
            values.len(),
            shape.fields.len()
        )));
    }
    let get = |name: &str| -> &Value {
        let (i, _) = shape.field(name).expect("field of a built-in shape");
        &values[i]
    };
    let num = |name: &str| -> Result<f64, EvalFault> {
        finite(name, get(name).f64_checked(&format!("field `{name}`"))?)
    };
    let affine = |name: &str| -> Result<AffineExpr, EvalFault> {
        let v = get(name);
        let a = v
            .as_affine()
            .ok_or_else(|| mismatch(format!("field `{name}` expects PolyExp, found {}", v.kind())))?;
        if !a.is_finite() {
            return Err(EvalFault::NonFinite(name.to_string()));
        }
        if a.coeffs.contains_key(&curr) {
            return Err(EvalFault::SelfReference);
        }
        Ok(a)
    };
    Ok(match domain {
        DomainTag::DeepPoly => NeuronShape::DeepPoly(DeepPolyShape {
            l: num("l")?,
            u: num("u")?,
            lower: affine("L")?,
            upper: affine("U")?,
        }),
        DomainTag::Interval => NeuronShape::Interval(IntervalShape {
            l: num("l")?,
            u: num("u")?,
        }),
        DomainTag::Zonotope => {
            let v = get("z");
            let z = v
                .as_zono()
                .ok_or_else(|| mismatch(format!("field `z` expects ZonoExp, found {}", v.kind())))?;
            if !(z.center.is_finite() && z.generators.values().all(|g| g.is_finite())) {
                return Err(EvalFault::NonFinite("z".into()));
            }
            NeuronShape::Zonotope {
                l: num("l")?,
                u: num("u")?,
                z,
            }
        }
    })
}

struct Evaluator<'a> {
    prog: &'a Program,
    ctx: &'a EvalContext<'a>,
}

impl Evaluator<'_> {
    fn trans_ret(&self, t: &TransRet, env: &Env) -> Result<Vec<Value>, EvalFault> {
        match t {
            TransRet::Cond { cond, then, els, .. } => {
                if self.condition(cond, env)? {
                    self.trans_ret(then, env)
                } else {
                    self.trans_ret(els, env)
                }
            }
            TransRet::Paren(inner, _) => self.trans_ret(inner, env),
            TransRet::Tuple(items, _) => items.iter().map(|e| self.expr(e, env)).collect(),
        }
    }

    fn condition(&self, e: &Expr, env: &Env) -> Result<bool, EvalFault> {
        let v = self.expr(e, env)?;
        v.as_bool()
            .ok_or_else(|| mismatch(format!("condition evaluated to {}", v.kind())))
    }

    fn lookup_callable(&self, name: &str, env: &Env) -> Option<Callable> {
        if let Some(Value::Func(c)) = env.get(name) {
            return Some(c.clone());
        }
        if let Some(i) = self.prog.funcs.iter().position(|f| f.name.name == name) {
            return Some(Callable::User(i));
        }
        builtins::is_builtin(name).then(|| Callable::Builtin(name.to_string()))
    }

    fn call(&self, f: &Callable, args: Vec<Value>) -> Result<Value, EvalFault> {
        match f {
            Callable::Builtin(name) => builtins::call(name, &args, self.ctx),
            Callable::User(i) => {
                let def = &self.prog.funcs[*i];
                if def.params.len() != args.len() {
                    return Err(mismatch(format!(
                        "`{}` takes {} arguments, {} given",
                        def.name.name,
                        def.params.len(),
                        args.len()
                    )));
                }
                let env: Env = def.params.iter().map(|p| p.name.name.clone()).zip(args).collect();
                self.expr(&def.body, &env)
            }
        }
    }

    fn field(&self, base: &Value, name: &str, meta: bool) -> Result<Value, EvalFault> {
        match base {
            Value::List(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|v| self.field(v, name, meta))
                    .collect::<Result<_, _>>()?,
            )),
            Value::Neuron(id) if meta => {
                let m = self.ctx.meta(*id)?;
                match name {
                    "weight" => Ok(Value::List(m.weight.iter().map(|w| Value::Float(*w)).collect())),
                    "bias" => Ok(Value::Float(m.bias)),
                    "layer" => Ok(Value::Int(m.layer as i64)),
                    other => Err(EvalFault::MissingMetadata(other.to_string())),
                }
            }
            Value::Neuron(id) => {
                let shape = self.ctx.shape(*id)?;
                match (shape, name) {
                    (_, "l") => Ok(Value::Float(shape.bounds().0)),
                    (_, "u") => Ok(Value::Float(shape.bounds().1)),
                    (NeuronShape::DeepPoly(s), "L") => Ok(Value::Poly(s.lower.clone())),
                    (NeuronShape::DeepPoly(s), "U") => Ok(Value::Poly(s.upper.clone())),
                    (NeuronShape::Zonotope { z, .. }, "z") => Ok(Value::Zono(z.clone())),
                    _ => Err(mismatch(format!(
                        "neuron {id} has no field `{name}` in the {} domain",
                        shape.domain()
                    ))),
                }
            }
            other => Err(mismatch(format!("cannot index {} with `{name}`", other.kind()))),
        }
    }

    fn list(&self, e: &Expr, env: &Env) -> Result<Vec<Value>, EvalFault> {
        match self.expr(e, env)? {
            Value::List(items) => Ok(items),
            other => Err(mismatch(format!("expected a list, found {}", other.kind()))),
        }
    }

    fn expr(&self, e: &Expr, env: &Env) -> Result<Value, EvalFault> {
        match &e.kind {
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Float(x) => Ok(Value::Float(*x)),
            ExprKind::Var(name) => {
                if let Some(v) = env.get(name) {
                    return Ok(v.clone());
                }
                self.lookup_callable(name, env)
                    .map(Value::Func)
                    .ok_or_else(|| EvalFault::Unbound(name.clone()))
            }
            ExprKind::Paren(inner) => self.expr(inner, env),
            ExprKind::List(items) => Ok(Value::List(
                items
                    .iter()
                    .map(|i| self.expr(i, env))
                    .collect::<Result<_, _>>()?,
            )),
            ExprKind::GetMetadata { base, field } => {
                let b = self.expr(base, env)?;
                self.field(&b, &field.name, true)
            }
            ExprKind::GetElement { base, field } => {
                let b = self.expr(base, env)?;
                self.field(&b, &field.name, false)
            }
            ExprKind::BadIndex { .. } | ExprKind::BadAttr { .. } => {
                Err(EvalFault::Unsupported("malformed index".into()))
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, env),
            ExprKind::Not(inner) => {
                let v = self.expr(inner, env)?;
                v.as_bool()
                    .map(|b| Value::Bool(!b))
                    .ok_or_else(|| mismatch(format!("`not` applied to {}", v.kind())))
            }
            ExprKind::Neg(inner) => value::neg(&self.expr(inner, env)?),
            ExprKind::Cond { cond, then, els } => {
                if self.condition(cond, env)? {
                    self.expr(then, env)
                } else {
                    self.expr(els, env)
                }
            }
            ExprKind::Traverse { base, replace, .. } => {
                let b = self.expr(base, env)?;
                let a = b
                    .as_affine()
                    .ok_or_else(|| mismatch(format!("traverse over {}", b.kind())))?;
                let lower = matches!(&replace.unparen().kind, ExprKind::Var(n) if n == "replace_lower");
                Ok(Value::Poly(builtins::traverse(&a, self.ctx, lower)?))
            }
            ExprKind::ArgOp { list, cmp, .. } => {
                let items = self.list(list, env)?;
                let f = match self.expr(cmp, env)? {
                    Value::Func(f) => f,
                    other => return Err(mismatch(format!("comparator is {}", other.kind()))),
                };
                let mut out = Vec::new();
                for n in &items {
                    let mut all = true;
                    for m in &items {
                        let r = self.call(&f, vec![n.clone(), m.clone()])?;
                        if !r
                            .as_bool()
                            .ok_or_else(|| mismatch("comparator must return Bool"))?
                        {
                            all = false;
                            break;
                        }
                    }
                    if all {
                        out.push(n.clone());
                    }
                }
                Ok(Value::List(out))
            }
            ExprKind::MaxOp { is_max, args } => {
                let nums: Vec<f64> = if args.len() == 1 {
                    self.list(&args[0], env)?
                        .iter()
                        .map(|v| v.f64_checked("max/min"))
                        .collect::<Result<_, _>>()?
                } else {
                    args.iter()
                        .map(|a| self.expr(a, env)?.f64_checked("max/min"))
                        .collect::<Result<_, _>>()?
                };
                if nums.is_empty() {
                    return Err(mismatch("max/min of an empty list"));
                }
                let pick = if *is_max { f64::max } else { f64::min };
                Ok(Value::Float(nums.into_iter().reduce(pick).unwrap_or(f64::NAN)))
            }
            ExprKind::ListOp { op, arg } => {
                let items = self.list(arg, env)?;
                match op.name.as_str() {
                    "len" => Ok(Value::Int(items.len() as i64)),
                    _ => items.iter().try_fold(Value::Int(0), |acc, v| value::add(&acc, v)),
                }
            }
            ExprKind::Method { base, method, arg } => self.method(base, *method, arg, env),
            ExprKind::Lp { .. } => Err(EvalFault::Unsupported("lp".into())),
            ExprKind::Curry { .. } => Err(EvalFault::Unsupported("curried application".into())),
            ExprKind::Call { func, args } => {
                let f = self
                    .lookup_callable(&func.name, env)
                    .ok_or_else(|| EvalFault::Unbound(func.name.clone()))?;
                let vals = args.iter().map(|a| self.expr(a, env)).collect::<Result<_, _>>()?;
                self.call(&f, vals)
            }
        }
    }

    fn binary(&self, op: BinOp, lhs: &Expr, rhs: &Expr, env: &Env) -> Result<Value, EvalFault> {
        if matches!(op, BinOp::And | BinOp::Or) {
            let a = self.condition(lhs, env)?;
            // Short-circuit so guarded sub-expressions cannot fault.
            return Ok(Value::Bool(match (op, a) {
                (BinOp::And, false) => false,
                (BinOp::Or, true) => true,
                _ => self.condition(rhs, env)?,
            }));
        }
        if op == BinOp::Within {
            return Err(EvalFault::Unsupported("`<>` outside shape constraints".into()));
        }
        let a = self.expr(lhs, env)?;
        let b = self.expr(rhs, env)?;
        match op {
            BinOp::Xor => match (a.as_bool(), b.as_bool()) {
                (Some(x), Some(y)) => Ok(Value::Bool(x ^ y)),
                _ => Err(mismatch("`xor` needs Bool operands")),
            },
            BinOp::Add => value::add(&a, &b),
            BinOp::Sub => value::sub(&a, &b),
            BinOp::Mul => value::mul(&a, &b),
            BinOp::Div => value::div(&a, &b),
            _ => value::compare(op, &a, &b).map(Value::Bool),
        }
    }

    fn method(&self, base: &Expr, method: Method, arg: &Expr, env: &Env) -> Result<Value, EvalFault> {
        let b = self.expr(base, env)?;
        let a = self.expr(arg, env)?;
        match method {
            Method::Map => {
                let Value::Func(f) = a else {
                    return Err(mismatch(format!("`.map` needs a function, found {}", a.kind())));
                };
                let e = b
                    .as_affine()
                    .ok_or_else(|| mismatch(format!("`.map` over {}", b.kind())))?;
                let mut acc = Value::Float(e.constant);
                for (&id, &c) in &e.coeffs {
                    let term = self.call(&f, vec![Value::Neuron(id), Value::Float(c)])?;
                    acc = value::add(&acc, &term)?;
                }
                Ok(acc)
            }
            Method::MapList => {
                let Value::Func(f) = a else {
                    return Err(mismatch(format!(
                        "`.map_list` needs a function, found {}",
                        a.kind()
                    )));
                };
                let Value::List(items) = b else {
                    return Err(mismatch(format!("`.map_list` over {}", b.kind())));
                };
                Ok(Value::List(
                    items
                        .into_iter()
                        .map(|v| self.call(&f, vec![v]))
                        .collect::<Result<_, _>>()?,
                ))
            }
            Method::Dot => {
                let (Value::List(xs), Value::List(ws)) = (&b, &a) else {
                    return Err(mismatch(format!("`.dot` of {} and {}", b.kind(), a.kind())));
                };
                if xs.len() != ws.len() {
                    return Err(mismatch(format!(
                        "`.dot` of lists with lengths {} and {}",
                        xs.len(),
                        ws.len()
                    )));
                }
                xs.iter()
                    .zip(ws)
                    .try_fold(Value::Int(0), |acc, (x, w)| value::add(&acc, &value::mul(x, w)?))
            }
            Method::Concat => match (b, a) {
                (Value::List(mut xs), Value::List(ys)) => {
                    xs.extend(ys);
                    Ok(Value::List(xs))
                }
                (x, y) => Err(mismatch(format!("`.concat` of {} and {}", x.kind(), y.kind()))),
            },
        }
    }
}
