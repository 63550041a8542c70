//! Deterministic pretty-printer. Re-parsing its output yields a structurally
//! equal tree, and formatting is idempotent.

use std::fmt::Write;

use super::ast::*;

const PREC_COND: u8 = 0;
const PREC_NOT: u8 = 3;
const PREC_UNARY: u8 = 7;
const PREC_POSTFIX: u8 = 8;
const PREC_ATOM: u8 = 9;

/// Formats a whole program.
pub fn format_program(prog: &Program) -> String {
    let mut out = String::new();
    if let Some(shape) = &prog.shape {
        let fields: Vec<String> = shape.fields.iter().map(format_param).collect();
        let cons: Vec<String> = shape.constraints.iter().map(format_expr).collect();
        let _ = writeln!(
            out,
            "def Shape as ({}) {{[{}]}};",
            fields.join(", "),
            cons.join(", ")
        );
        out.push('\n');
    }
    for f in &prog.funcs {
        let params: Vec<String> = f.params.iter().map(format_param).collect();
        let _ = writeln!(
            out,
            "func {}({}) = {};",
            f.name.name,
            params.join(", "),
            format_expr(&f.body)
        );
    }
    if !prog.funcs.is_empty() {
        out.push('\n');
    }
    for (i, t) in prog.transformers.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "transformer {} {{", t.name.name);
        for case in &t.cases {
            let _ = writeln!(
                out,
                "    {} ->\n        {};",
                case.op.name,
                format_trans(&case.body, 2)
            );
        }
        out.push_str("}\n");
    }
    out
}

fn format_param(p: &Param) -> String {
    format!("{} {}", format_type(&p.ty), p.name.name)
}

pub fn format_type(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Named(id) => id.name.clone(),
        TypeExpr::List(inner, _) => format!("List<{}>", format_type(inner)),
        TypeExpr::Func(args, ret, _) => {
            let args: Vec<String> = args.iter().map(format_type).collect();
            format!("({} -> {})", args.join(", "), format_type(ret))
        }
    }
}

/// Formats a case analysis; nested conditionals go on indented lines.
pub fn format_trans(t: &TransRet, indent: usize) -> String {
    let pad = "    ".repeat(indent + 1);
    match t {
        TransRet::Cond { cond, then, els, .. } => {
            format!(
                "{} ?\n{pad}{} :\n{pad}{}",
                fmt_prec(cond, 1),
                trans_branch(then, indent + 1),
                trans_branch(els, indent + 1)
            )
        }
        TransRet::Paren(inner, _) => match inner.as_ref() {
            TransRet::Tuple(..) => format_trans(inner, indent),
            _ => format!("({})", format_trans(inner, indent)),
        },
        TransRet::Tuple(items, _) => {
            let items: Vec<String> = items.iter().map(|e| fmt_prec(e, 1)).collect();
            format!("({})", items.join(", "))
        }
    }
}

fn trans_branch(t: &TransRet, indent: usize) -> String {
    match t {
        TransRet::Cond { .. } => format!("({})", format_trans(t, indent)),
        _ => format_trans(t, indent),
    }
}

/// Formats a single expression.
pub fn format_expr(e: &Expr) -> String {
    fmt_prec(e, PREC_COND)
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Cond { .. } => PREC_COND,
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Not(_) => PREC_NOT,
        ExprKind::Neg(_) | ExprKind::Curry { .. } => PREC_UNARY,
        ExprKind::GetMetadata { .. }
        | ExprKind::GetElement { .. }
        | ExprKind::BadIndex { .. }
        | ExprKind::BadAttr { .. }
        | ExprKind::Traverse { .. }
        | ExprKind::Method { .. } => PREC_POSTFIX,
        _ => PREC_ATOM,
    }
}

fn fmt_prec(e: &Expr, min: u8) -> String {
    let s = fmt_raw(e);
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn list(items: &[Expr]) -> String {
    items.iter().map(format_expr).collect::<Vec<_>>().join(", ")
}

fn fmt_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_raw(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Float(v) => fmt_float(*v),
        ExprKind::Var(name) => name.clone(),
        ExprKind::Paren(inner) => format!("({})", format_expr(inner)),
        ExprKind::List(items) => format!("[{}]", list(items)),
        ExprKind::GetMetadata { base, field } | ExprKind::GetElement { base, field } => {
            format!("{}[{}]", fmt_prec(base, PREC_POSTFIX), field.name)
        }
        ExprKind::BadIndex { base, index } => {
            format!("{}[{}]", fmt_prec(base, PREC_POSTFIX), list(index))
        }
        ExprKind::BadAttr { base, field, args } => {
            let mut s = format!("{}.{}", fmt_prec(base, PREC_POSTFIX), field.name);
            if let Some(args) = args {
                let _ = write!(s, "({})", list(args));
            }
            s
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            format!("{} {} {}", fmt_prec(lhs, p), op.as_str(), fmt_prec(rhs, p + 1))
        }
        ExprKind::Not(inner) => format!("not {}", fmt_prec(inner, PREC_NOT)),
        ExprKind::Neg(inner) => format!("-{}", fmt_prec(inner, PREC_UNARY)),
        ExprKind::Cond { cond, then, els } => {
            let branch = |b: &Expr| match b.kind {
                ExprKind::Cond { .. } => format!("({})", fmt_raw(b)),
                _ => fmt_prec(b, 1),
            };
            format!("{} ? {} : {}", fmt_prec(cond, 1), branch(then), branch(els))
        }
        ExprKind::Traverse {
            base,
            direction,
            priority,
            stop,
            replace,
            invariant,
        } => format!(
            "{}.traverse({}, {}, {}, {}){{{}}}",
            fmt_prec(base, PREC_POSTFIX),
            direction.name,
            format_expr(priority),
            format_expr(stop),
            format_expr(replace),
            format_expr(invariant)
        ),
        ExprKind::ArgOp { is_max, list, cmp } => format!(
            "{}({}, {})",
            if *is_max { "argmax" } else { "argmin" },
            format_expr(list),
            format_expr(cmp)
        ),
        ExprKind::MaxOp { is_max, args } => {
            format!("{}({})", if *is_max { "max" } else { "min" }, list(args))
        }
        ExprKind::ListOp { op, arg } => format!("{}({})", op.name, format_expr(arg)),
        ExprKind::Method { base, method, arg } => format!(
            "{}.{}({})",
            fmt_prec(base, PREC_POSTFIX),
            method.as_str(),
            format_expr(arg)
        ),
        ExprKind::Lp {
            op,
            objective,
            constraints,
        } => format!(
            "lp({}, {}, {})",
            op.name,
            format_expr(objective),
            format_expr(constraints)
        ),
        ExprKind::Call { func, args } => format!("{}({})", func.name, list(args)),
        ExprKind::Curry { func, args } => {
            let mut s = func.name.clone();
            for a in args {
                s.push(' ');
                // A bare list after a name would re-parse as indexing.
                if matches!(a.kind, ExprKind::List(_)) {
                    s.push_str(&format!("({})", format_expr(a)));
                } else {
                    s.push_str(&fmt_prec(a, PREC_POSTFIX));
                }
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::lexer::lex;
    use crate::dsl::parser::{parse_expression, parse_program};

    fn roundtrip_expr(src: &str) -> String {
        let e = parse_expression(&lex(src).unwrap()).unwrap();
        let out = format_expr(&e);
        let again = parse_expression(&lex(&out).unwrap()).unwrap();
        assert_eq!(e.canonical(), again.canonical(), "{src} -> {out}");
        assert_eq!(format_expr(&again), out);
        out
    }

    #[test]
    fn literal() {
        assert_eq!(roundtrip_expr("0"), "0");
        assert_eq!(roundtrip_expr("0.5"), "0.5");
        assert_eq!(roundtrip_expr("2."), "2.0");
    }

    #[test]
    fn nested_cond_parenthesized() {
        assert_eq!(roundtrip_expr("a ? b : c ? d : e"), "a ? b : (c ? d : e)");
        assert_eq!(roundtrip_expr("(a ? b : c) ? d : e"), "(a ? b : c) ? d : e");
    }

    #[test]
    fn minimal_parens() {
        assert_eq!(roundtrip_expr("a - (b - c)"), "a - (b - c)");
        assert_eq!(roundtrip_expr("a - b - c"), "a - b - c");
        assert_eq!(roundtrip_expr("-x[l] * 2"), "-x[l] * 2");
        assert_eq!(roundtrip_expr("not (a and b)"), "not (a and b)");
        roundtrip_expr("f a (b + 1) 3");
        roundtrip_expr("e.traverse(backward, p, s, r){e <= n}.map(g)");
        roundtrip_expr("1e-7 + 1e20");
    }

    #[test]
    fn program_roundtrip() {
        let src = "def Shape as (Float l, Float u){[curr[l] <= curr]};\n\
                   func g(List<Float> xs, (Neuron -> Bool) c) = sum(xs);\n\
                   transformer t { Relu -> (prev[l] >= 0) ? (prev[l], prev[u]) : ((prev[u] <= 0) ? (0, 0) : (0, prev[u])); }";
        let p = parse_program(&lex(src).unwrap()).unwrap();
        let out = format_program(&p);
        let q = parse_program(&lex(&out).unwrap()).unwrap();
        assert!(p.structurally_eq(&q));
        assert_eq!(format_program(&q), out);
    }
}
