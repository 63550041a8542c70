//! Static checks over a parsed program. Every independent error is reported;
//! subexpressions that already failed get type `Error` so they do not cascade.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;
use super::diagnostic::{Diagnostic, DiagnosticCode, Span};
use super::lexer::Keyword;
use crate::domain::DomainTag;
use crate::ops::OperatorKind;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Type {
    Int,
    Float,
    Bool,
    Neuron,
    PolyExp,
    ZonoExp,
    List(Box<Type>),
    Func(Vec<Type>, Box<Type>),
    /// Result of an expression that already produced a diagnostic.
    Error,
}

impl Type {
    pub fn list(t: Type) -> Type {
        Type::List(Box::new(t))
    }

    pub fn func(params: Vec<Type>, ret: Type) -> Type {
        Type::Func(params, Box::new(ret))
    }

    fn is_num(&self) -> bool {
        matches!(self, Type::Int | Type::Float)
    }

    fn is_poly(&self) -> bool {
        matches!(self, Type::Neuron | Type::PolyExp)
    }

    fn is_zono(&self) -> bool {
        matches!(self, Type::ZonoExp)
    }

    fn is_symbolic(&self) -> bool {
        self.is_poly() || self.is_zono()
    }

    fn is_error(&self) -> bool {
        matches!(self, Type::Error)
    }

    /// Whether a value of type `actual` may be used where `self` is expected.
    pub fn accepts(&self, actual: &Type) -> bool {
        match (self, actual) {
            (Type::Error, _) | (_, Type::Error) => true,
            (a, b) if a == b => true,
            (Type::Float, Type::Int) => true,
            (Type::PolyExp, t) => t.is_num() || t.is_poly(),
            (Type::ZonoExp, t) => t.is_num() || t.is_zono(),
            (Type::List(a), Type::List(b)) => a.accepts(b),
            (Type::Func(pa, ra), Type::Func(pb, rb)) => pa.len() == pb.len() && ra.accepts(rb),
            _ => false,
        }
    }

    /// Least common type of two branches, if any.
    pub fn join(&self, other: &Type) -> Option<Type> {
        match (self, other) {
            (Type::Error, t) | (t, Type::Error) => Some(t.clone()),
            (a, b) if a == b => Some(a.clone()),
            (a, b) if a.is_num() && b.is_num() => Some(Type::Float),
            (a, b) if (a.is_num() || a.is_poly()) && (b.is_num() || b.is_poly()) => Some(Type::PolyExp),
            (a, b) if (a.is_num() || a.is_zono()) && (b.is_num() || b.is_zono()) => Some(Type::ZonoExp),
            (Type::List(a), Type::List(b)) => a.join(b).map(Type::list),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("Int"),
            Type::Float => f.write_str("Float"),
            Type::Bool => f.write_str("Bool"),
            Type::Neuron => f.write_str("Neuron"),
            Type::PolyExp => f.write_str("PolyExp"),
            Type::ZonoExp => f.write_str("ZonoExp"),
            Type::List(t) => write!(f, "List<{t}>"),
            Type::Func(ps, r) => {
                f.write_str("(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, " -> {r})")
            }
            Type::Error => f.write_str("<error>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    pub params: Vec<Type>,
    pub ret: Type,
}

impl Signature {
    fn new(params: Vec<Type>, ret: Type) -> Self {
        Signature { params, ret }
    }

    pub fn as_type(&self) -> Type {
        Type::func(self.params.clone(), self.ret.clone())
    }
}

/// Names bound by the operator context inside transformer bodies.
pub const BINDING_NAMES: [&str; 6] = ["prev", "curr", "prev_0", "prev_1", "curr_list", "eps"];

/// Names with dedicated syntax.
pub const SYNTAX_NAMES: [&str; 10] = [
    "max", "min", "argmax", "argmin", "sum", "len", "map", "map_list", "dot", "concat",
];

/// Field names any built-in domain may declare.
pub const DOMAIN_FIELDS: [&str; 5] = ["l", "u", "L", "U", "z"];

/// Builtin functions, reserved names and the metadata map.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub functions: BTreeMap<String, Signature>,
    pub reserved: BTreeSet<String>,
    pub metadata: BTreeMap<String, Type>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        use Type::*;
        let mut functions = BTreeMap::new();
        let mut add = |name: &str, params: Vec<Type>, ret: Type| {
            functions.insert(name.to_string(), Signature::new(params, ret));
        };
        add("simplify_lower", vec![Neuron, Float], Float);
        add("simplify_upper", vec![Neuron, Float], Float);
        add("replace_lower", vec![Neuron, Float], PolyExp);
        add("replace_upper", vec![Neuron, Float], PolyExp);
        add("priority", vec![Neuron], Int);
        add("priority2", vec![Neuron, Float], Int);
        add("stop", vec![Neuron], Bool);
        add("stop_traverse", vec![Neuron, Float], Bool);
        add("backsubs_lower", vec![PolyExp, Neuron], Float);
        add("backsubs_upper", vec![PolyExp, Neuron], Float);
        add("f", vec![Neuron, Neuron], Bool);
        add("slope", vec![Float, Float], Float);
        add("intercept", vec![Float, Float], Float);
        add("f1", vec![Float], Float);
        add("f2", vec![Float], Float);
        add("f3", vec![Neuron], Float);
        add("compute_l", vec![Neuron, Neuron], Float);
        add("compute_u", vec![Neuron, Neuron], Float);
        add("avg", vec![Type::list(Float)], Float);
        add("gelu", vec![Float], Float);
        add("elu", vec![Float], Float);
        add("sigmoid", vec![Float], Float);

        let mut reserved: BTreeSet<String> = Keyword::ALL.iter().map(|k| k.as_str().to_string()).collect();
        reserved.extend(BINDING_NAMES.iter().map(|s| s.to_string()));
        reserved.extend(SYNTAX_NAMES.iter().map(|s| s.to_string()));
        reserved.extend(METADATA_FIELDS.iter().map(|s| s.to_string()));

        let mut metadata = BTreeMap::new();
        metadata.insert("weight".to_string(), Type::list(Float));
        metadata.insert("bias".to_string(), Float);
        metadata.insert("layer".to_string(), Int);
        metadata.insert("equations".to_string(), Error);

        SymbolTable {
            functions,
            reserved,
            metadata,
        }
    }
}

/// Field layout of the abstract shape a program's transformers return.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub fields: Vec<(String, Type)>,
}

impl ShapeSpec {
    pub fn for_domain(domain: DomainTag) -> Self {
        let f = |n: &str, t: Type| (n.to_string(), t);
        let fields = match domain {
            DomainTag::DeepPoly => vec![
                f("l", Type::Float),
                f("u", Type::Float),
                f("L", Type::PolyExp),
                f("U", Type::PolyExp),
            ],
            DomainTag::Interval => vec![f("l", Type::Float), f("u", Type::Float)],
            DomainTag::Zonotope => vec![f("l", Type::Float), f("u", Type::Float), f("z", Type::ZonoExp)],
        };
        ShapeSpec { fields }
    }

    /// Default shape when a program has no `def Shape` header, chosen from
    /// the transformer name. Unrecognized names get DeepPoly.
    pub fn for_transformer_name(name: &str) -> Self {
        let domain = match name.to_ascii_lowercase().as_str() {
            "interval" | "ibp" | "box" => DomainTag::Interval,
            "deepz" | "zonotope" => DomainTag::Zonotope,
            _ => DomainTag::DeepPoly,
        };
        Self::for_domain(domain)
    }

    pub fn field(&self, name: &str) -> Option<(usize, &Type)> {
        self.fields
            .iter()
            .enumerate()
            .find(|(_, (n, _))| n == name)
            .map(|(i, (_, t))| (i, t))
    }

    /// The built-in domain with exactly this layout, if any.
    pub fn domain(&self) -> Option<DomainTag> {
        [DomainTag::DeepPoly, DomainTag::Interval, DomainTag::Zonotope]
            .into_iter()
            .find(|d| Self::for_domain(*d) == *self)
    }
}

/// Resolves the shape a program's transformers produce.
pub fn active_shape(prog: &Program) -> ShapeSpec {
    match &prog.shape {
        Some(decl) => ShapeSpec {
            fields: decl
                .fields
                .iter()
                .map(|p| (p.name.name.clone(), resolve_type(&p.ty).unwrap_or(Type::Error)))
                .collect(),
        },
        None => prog
            .transformers
            .first()
            .map(|t| ShapeSpec::for_transformer_name(&t.name.name))
            .unwrap_or_else(|| ShapeSpec::for_domain(DomainTag::DeepPoly)),
    }
}

fn resolve_type(t: &TypeExpr) -> Result<Type, &Ident> {
    Ok(match t {
        TypeExpr::Named(id) => match id.name.as_str() {
            "Int" => Type::Int,
            "Float" | "Real" => Type::Float,
            "Bool" => Type::Bool,
            "Neuron" => Type::Neuron,
            "PolyExp" => Type::PolyExp,
            "ZonoExp" => Type::ZonoExp,
            _ => return Err(id),
        },
        TypeExpr::List(inner, _) => Type::list(resolve_type(inner)?),
        TypeExpr::Func(args, ret, _) => Type::func(
            args.iter().map(resolve_type).collect::<Result<_, _>>()?,
            resolve_type(ret)?,
        ),
    })
}

/// Operator-dependent variable bindings inside a transformer case.
pub fn case_bindings(op: Option<OperatorKind>) -> BTreeMap<String, Type> {
    let mut vars = BTreeMap::new();
    vars.insert("curr".to_string(), Type::Neuron);
    vars.insert("curr_list".to_string(), Type::list(Type::Neuron));
    vars.insert("eps".to_string(), Type::ZonoExp);
    match op {
        Some(OperatorKind::Affine) => {
            vars.insert("prev".to_string(), Type::list(Type::Neuron));
        }
        Some(OperatorKind::Add) => {
            vars.insert("prev".to_string(), Type::list(Type::Neuron));
            vars.insert("prev_0".to_string(), Type::Neuron);
            vars.insert("prev_1".to_string(), Type::Neuron);
        }
        _ => {
            vars.insert("prev".to_string(), Type::Neuron);
        }
    }
    vars
}

#[derive(Clone)]
struct Scope {
    vars: BTreeMap<String, Type>,
    /// Comparisons between symbolic values are constraints, not tests.
    symbolic_cmp: bool,
    /// Whether `curr`'s shape fields may be read.
    curr_fields: bool,
}

struct Checker<'a> {
    symbols: &'a SymbolTable,
    shape: ShapeSpec,
    user_funcs: BTreeMap<String, Signature>,
    diags: Vec<Diagnostic>,
}

/// Runs every static check; an empty result means the program is valid.
pub fn validate(prog: &Program, symbols: &SymbolTable) -> Vec<Diagnostic> {
    let mut c = Checker {
        symbols,
        shape: active_shape(prog),
        user_funcs: BTreeMap::new(),
        diags: Vec::new(),
    };
    c.program(prog);
    let mut diags = c.diags;
    diags.sort_by_key(|d| (d.span, d.code));
    diags.dedup();
    diags
}

impl Checker<'_> {
    fn report(&mut self, code: DiagnosticCode, message: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::new(code, message, span));
    }

    fn program(&mut self, prog: &Program) {
        if let Some(decl) = &prog.shape {
            self.shape_decl(decl);
        }
        for f in &prog.funcs {
            self.func_def(f);
        }
        if prog.transformers.is_empty() {
            self.report(
                DiagnosticCode::UnknownError,
                "program contains no transformer",
                Span::default(),
            );
        }
        for t in &prog.transformers {
            self.transformer(t);
        }
    }

    fn typ(&mut self, t: &TypeExpr) -> Type {
        match resolve_type(t) {
            Ok(ty) => ty,
            Err(id) => {
                self.report(
                    DiagnosticCode::UndefinedId,
                    format!("unknown type `{}`", id.name),
                    id.span,
                );
                Type::Error
            }
        }
    }

    fn shape_decl(&mut self, decl: &ShapeDecl) {
        let mut seen = BTreeSet::new();
        for p in &decl.fields {
            let ty = self.typ(&p.ty);
            if matches!(ty, Type::Neuron | Type::List(_) | Type::Func(..)) {
                self.report(
                    DiagnosticCode::ShapeMismatch,
                    format!("shape field `{}` cannot have type {ty}", p.name.name),
                    p.ty.span(),
                );
            }
            if !seen.insert(p.name.name.clone()) || self.is_reserved(&p.name.name) {
                self.report(
                    DiagnosticCode::ReservedName,
                    format!("`{}` cannot be used as a shape field", p.name.name),
                    p.name.span,
                );
            }
        }
        let mut vars = BTreeMap::new();
        vars.insert("curr".to_string(), Type::Neuron);
        let scope = Scope {
            vars,
            symbolic_cmp: true,
            curr_fields: true,
        };
        for cons in &decl.constraints {
            let t = self.expr(cons, &scope);
            if !t.is_error() && t != Type::Bool {
                self.report(
                    DiagnosticCode::ShapeMismatch,
                    format!("shape constraint must be Bool, found {t}"),
                    cons.span,
                );
            }
        }
    }

    fn is_reserved(&self, name: &str) -> bool {
        self.symbols.reserved.contains(name)
    }

    fn func_def(&mut self, f: &FuncDef) {
        let name = &f.name.name;
        let clash = self.is_reserved(name)
            || self.symbols.functions.contains_key(name)
            || self.user_funcs.contains_key(name);
        if clash {
            self.report(
                DiagnosticCode::ReservedName,
                format!("`{name}` is reserved and cannot be redefined"),
                f.name.span,
            );
        }
        let mut vars = BTreeMap::new();
        let mut params = Vec::new();
        for p in &f.params {
            let ty = self.typ(&p.ty);
            let pname = &p.name.name;
            if self.is_reserved(pname) || vars.contains_key(pname) {
                self.report(
                    DiagnosticCode::ReservedName,
                    format!("parameter name `{pname}` is reserved or already bound"),
                    p.name.span,
                );
            }
            vars.insert(pname.clone(), ty.clone());
            params.push(ty);
        }
        let scope = Scope {
            vars,
            symbolic_cmp: false,
            curr_fields: true,
        };
        let ret = self.expr(&f.body, &scope);
        if !clash {
            self.user_funcs.insert(name.clone(), Signature::new(params, ret));
        }
    }

    fn transformer(&mut self, t: &TransformerDef) {
        if t.cases.is_empty() {
            self.report(
                DiagnosticCode::UnknownError,
                format!("transformer `{}` has no cases", t.name.name),
                t.name.span,
            );
        }
        for case in &t.cases {
            let op = match OperatorKind::from_name(&case.op.name) {
                Ok(op) => Some(op),
                Err(_) => {
                    self.report(
                        DiagnosticCode::UndefinedId,
                        format!("unknown operator `{}`", case.op.name),
                        case.op.span,
                    );
                    None
                }
            };
            let scope = Scope {
                vars: case_bindings(op),
                symbolic_cmp: false,
                curr_fields: false,
            };
            self.trans_ret(&case.body, &scope);
        }
    }

    fn trans_ret(&mut self, t: &TransRet, scope: &Scope) {
        match t {
            TransRet::Cond { cond, then, els, .. } => {
                self.condition(cond, scope);
                self.trans_ret(then, scope);
                self.trans_ret(els, scope);
            }
            TransRet::Paren(inner, _) => self.trans_ret(inner, scope),
            TransRet::Tuple(items, span) => {
                let want = self.shape.fields.len();
                if items.len() != want {
                    self.report(
                        DiagnosticCode::ShapeMismatch,
                        format!(
                            "case returns {} value(s) but the shape has {want} field(s)",
                            items.len()
                        ),
                        *span,
                    );
                }
                let fields = self.shape.fields.clone();
                for (i, item) in items.iter().enumerate() {
                    let got = self.expr(item, scope);
                    if let Some((fname, fty)) = fields.get(i) {
                        let ok = match fty {
                            Type::Float | Type::Int => got.is_num() || got.is_error(),
                            other => other.accepts(&got),
                        };
                        if !ok {
                            self.report(
                                DiagnosticCode::ShapeMismatch,
                                format!("field `{fname}` expects {fty}, found {got}"),
                                item.span,
                            );
                        }
                    }
                }
            }
        }
    }

    fn condition(&mut self, cond: &Expr, scope: &Scope) {
        let t = self.expr(cond, scope);
        if !t.is_error() && t != Type::Bool {
            self.report(
                DiagnosticCode::ShapeMismatch,
                format!("condition must be Bool, found {t}"),
                cond.span,
            );
        }
    }

    fn lookup_func(&self, name: &str, scope: &Scope) -> Option<Type> {
        if let Some(t @ Type::Func(..)) = scope.vars.get(name) {
            return Some(t.clone());
        }
        self.user_funcs
            .get(name)
            .or_else(|| self.symbols.functions.get(name))
            .map(Signature::as_type)
    }

    fn expr(&mut self, e: &Expr, scope: &Scope) -> Type {
        use DiagnosticCode::*;
        match &e.kind {
            ExprKind::Bool(_) => Type::Bool,
            ExprKind::Int(_) => Type::Int,
            ExprKind::Float(_) => Type::Float,
            ExprKind::Var(name) => {
                if let Some(t) = scope.vars.get(name) {
                    return t.clone();
                }
                if let Some(t) = self.lookup_func(name, scope) {
                    return t;
                }
                self.report(UndefinedId, format!("undefined identifier `{name}`"), e.span);
                Type::Error
            }
            ExprKind::Paren(inner) => self.expr(inner, scope),
            ExprKind::List(items) => {
                let mut acc: Option<Type> = None;
                let mut failed = false;
                for item in items {
                    let t = self.expr(item, scope);
                    acc = match acc {
                        None => Some(t),
                        Some(prev) => match prev.join(&t) {
                            Some(j) => Some(j),
                            None => {
                                if !failed {
                                    self.report(
                                        ShapeMismatch,
                                        format!("list mixes {prev} and {t}"),
                                        item.span,
                                    );
                                }
                                failed = true;
                                Some(prev)
                            }
                        },
                    };
                }
                if failed {
                    Type::Error
                } else {
                    Type::list(acc.unwrap_or(Type::Error))
                }
            }
            ExprKind::GetMetadata { base, field } => {
                let bt = self.expr(base, scope);
                let Some(mt) = self.symbols.metadata.get(&field.name).cloned() else {
                    self.report(
                        UnknownMetadata,
                        format!("unknown metadata `{}`", field.name),
                        field.span,
                    );
                    return Type::Error;
                };
                if mt.is_error() {
                    self.report(
                        UnknownError,
                        format!("metadata `{}` is not supported", field.name),
                        field.span,
                    );
                    return Type::Error;
                }
                match bt {
                    Type::Error => Type::Error,
                    Type::Neuron => mt,
                    Type::List(ref inner) if **inner == Type::Neuron => Type::list(mt),
                    other => {
                        self.report(
                            UnknownMetadata,
                            format!("metadata `{}` requires a neuron, found {other}", field.name),
                            e.span,
                        );
                        Type::Error
                    }
                }
            }
            ExprKind::GetElement { base, field } => {
                let bt = self.expr(base, scope);
                let name = field.name.as_str();
                let ft = match self.shape.field(name) {
                    Some((_, t)) => t.clone(),
                    None if DOMAIN_FIELDS.contains(&name) => {
                        self.report(
                            UnknownMetadata,
                            format!("field `{name}` is not part of the declared shape"),
                            field.span,
                        );
                        return Type::Error;
                    }
                    None => {
                        self.report(UndefinedId, format!("undefined field `{name}`"), field.span);
                        return Type::Error;
                    }
                };
                if !scope.curr_fields && matches!(&base.unparen().kind, ExprKind::Var(v) if v == "curr") {
                    self.report(
                        UnknownMetadata,
                        format!("`curr[{name}]` is the value being defined and cannot be read"),
                        e.span,
                    );
                    return Type::Error;
                }
                match bt {
                    Type::Error => Type::Error,
                    Type::Neuron => ft,
                    Type::List(ref inner) if **inner == Type::Neuron => Type::list(ft),
                    other => {
                        self.report(
                            UnknownMetadata,
                            format!("field `{name}` requires a neuron, found {other}"),
                            e.span,
                        );
                        Type::Error
                    }
                }
            }
            ExprKind::BadIndex { base, index } => {
                self.expr(base, scope);
                for i in index {
                    self.expr(i, scope);
                }
                self.report(
                    UnknownMetadata,
                    "index must be a shape field or metadata name",
                    e.span,
                );
                Type::Error
            }
            ExprKind::BadAttr { base, field, args } => {
                self.expr(base, scope);
                for a in args.iter().flatten() {
                    self.expr(a, scope);
                }
                self.report(
                    UnknownMetadata,
                    format!(
                        "malformed attribute `.{}`; use `[{}]` for fields and metadata",
                        field.name, field.name
                    ),
                    e.span,
                );
                Type::Error
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let sub_scope;
                let inner_scope = if *op == BinOp::Within {
                    scope
                } else {
                    sub_scope = scope.clone();
                    &sub_scope
                };
                let a = self.expr(lhs, inner_scope);
                let b = self.expr(rhs, inner_scope);
                self.binary(*op, &a, &b, e.span, scope)
            }
            ExprKind::Not(inner) => {
                let t = self.expr(inner, scope);
                if !t.is_error() && t != Type::Bool {
                    self.report(
                        IllegalLogicalOp,
                        format!("`not` needs a Bool operand, found {t}"),
                        e.span,
                    );
                    return Type::Error;
                }
                Type::Bool
            }
            ExprKind::Neg(inner) => {
                let t = self.expr(inner, scope);
                match t {
                    Type::Error => Type::Error,
                    Type::Neuron => Type::PolyExp,
                    t if t.is_num() || t.is_symbolic() => t,
                    t => {
                        self.report(ShapeMismatch, format!("cannot negate {t}"), e.span);
                        Type::Error
                    }
                }
            }
            ExprKind::Cond { cond, then, els } => {
                self.condition(cond, scope);
                let a = self.expr(then, scope);
                let b = self.expr(els, scope);
                match a.join(&b) {
                    Some(t) => t,
                    None => {
                        self.report(
                            ShapeMismatch,
                            format!("conditional branches have types {a} and {b}"),
                            e.span,
                        );
                        Type::Error
                    }
                }
            }
            ExprKind::Traverse {
                base,
                direction,
                priority,
                stop,
                replace,
                invariant,
            } => self.traverse(e, base, direction, priority, stop, replace, invariant, scope),
            ExprKind::ArgOp { list, cmp, .. } => {
                let lt = self.expr(list, scope);
                let ct = self.expr(cmp, scope);
                let list_ok = Type::list(Type::Neuron).accepts(&lt);
                let cmp_ok = Type::func(vec![Type::Neuron, Type::Neuron], Type::Bool).accepts(&ct);
                if !list_ok || !cmp_ok {
                    self.report(
                        ShapeMismatch,
                        format!("argmax/argmin expects (List<Neuron>, (Neuron, Neuron -> Bool)), found ({lt}, {ct})"),
                        e.span,
                    );
                    return Type::Error;
                }
                Type::list(Type::Neuron)
            }
            ExprKind::MaxOp { args, .. } => {
                let ts: Vec<Type> = args.iter().map(|a| self.expr(a, scope)).collect();
                if ts.iter().any(Type::is_error) {
                    return Type::Error;
                }
                let ok = match ts.as_slice() {
                    [Type::List(inner)] => inner.is_num(),
                    [a, b] => a.is_num() && b.is_num(),
                    _ => false,
                };
                if !ok {
                    let shown: Vec<String> = ts.iter().map(Type::to_string).collect();
                    self.report(
                        ShapeMismatch,
                        format!(
                            "max/min needs numbers or a list of numbers, found ({})",
                            shown.join(", ")
                        ),
                        e.span,
                    );
                    return Type::Error;
                }
                Type::Float
            }
            ExprKind::ListOp { op, arg } => {
                let t = self.expr(arg, scope);
                match (op.name.as_str(), &t) {
                    (_, Type::Error) => Type::Error,
                    ("len", Type::List(_)) => Type::Int,
                    ("sum", Type::List(inner)) if inner.is_num() => Type::Float,
                    ("sum", Type::List(inner)) if inner.is_poly() => Type::PolyExp,
                    ("sum", Type::List(inner)) if inner.is_zono() => Type::ZonoExp,
                    _ => {
                        self.report(
                            ShapeMismatch,
                            format!("`{}` cannot be applied to {t}", op.name),
                            e.span,
                        );
                        Type::Error
                    }
                }
            }
            ExprKind::Method { base, method, arg } => {
                let bt = self.expr(base, scope);
                let at = self.expr(arg, scope);
                if bt.is_error() || at.is_error() {
                    return Type::Error;
                }
                let result = match method {
                    Method::Map => match (&bt, &at) {
                        (b, Type::Func(ps, r)) if b.is_poly() && ps.len() == 2 => {
                            if r.is_num() {
                                Some(Type::Float)
                            } else if r.is_poly() {
                                Some(Type::PolyExp)
                            } else {
                                None
                            }
                        }
                        _ => None,
                    },
                    Method::MapList => match (&bt, &at) {
                        (Type::List(inner), Type::Func(ps, r)) if ps.len() == 1 && ps[0].accepts(inner) => {
                            Some(Type::list((**r).clone()))
                        }
                        _ => None,
                    },
                    Method::Dot => match (&bt, &at) {
                        (Type::List(a), Type::List(b)) if b.is_num() => {
                            if a.is_num() {
                                Some(Type::Float)
                            } else if a.is_poly() {
                                Some(Type::PolyExp)
                            } else if a.is_zono() {
                                Some(Type::ZonoExp)
                            } else {
                                None
                            }
                        }
                        _ => None,
                    },
                    Method::Concat => match (&bt, &at) {
                        (Type::List(_), Type::List(_)) => bt.join(&at),
                        _ => None,
                    },
                };
                match result {
                    Some(t) => t,
                    None => {
                        self.report(
                            ShapeMismatch,
                            format!("`.{}` cannot combine {bt} with {at}", method.as_str()),
                            e.span,
                        );
                        Type::Error
                    }
                }
            }
            ExprKind::Lp { .. } => {
                self.report(UnknownError, "`lp` is not supported", e.span);
                Type::Error
            }
            ExprKind::Curry { func, .. } => {
                self.report(
                    UnknownError,
                    format!("curried application of `{}` is not supported", func.name),
                    e.span,
                );
                Type::Error
            }
            ExprKind::Call { func, args } => {
                let arg_types: Vec<Type> = args.iter().map(|a| self.expr(a, scope)).collect();
                let Some(Type::Func(params, ret)) = self.lookup_func(&func.name, scope) else {
                    self.report(
                        UndefinedId,
                        format!("undefined function `{}`", func.name),
                        func.span,
                    );
                    return Type::Error;
                };
                if params.len() != arg_types.len() {
                    self.report(
                        UndefinedId,
                        format!(
                            "`{}` takes {} argument(s), {} given",
                            func.name,
                            params.len(),
                            arg_types.len()
                        ),
                        e.span,
                    );
                    return Type::Error;
                }
                let mut ok = true;
                for ((p, a), arg) in params.iter().zip(&arg_types).zip(args) {
                    if !p.accepts(a) {
                        self.report(
                            ShapeMismatch,
                            format!("argument of `{}` expects {p}, found {a}", func.name),
                            arg.span,
                        );
                        ok = false;
                    }
                }
                if ok {
                    *ret
                } else {
                    Type::Error
                }
            }
        }
    }

    fn binary(&mut self, op: BinOp, a: &Type, b: &Type, span: Span, scope: &Scope) -> Type {
        use DiagnosticCode::*;
        if op.is_logical() {
            let bad = [a, b].iter().any(|t| !t.is_error() && **t != Type::Bool);
            if bad {
                self.report(
                    IllegalLogicalOp,
                    format!("`{}` needs Bool operands, found {a} and {b}", op.as_str()),
                    span,
                );
                return Type::Error;
            }
            return Type::Bool;
        }
        if a.is_error() || b.is_error() {
            return if op.is_comparison() {
                Type::Bool
            } else {
                Type::Error
            };
        }
        if op.is_comparison() {
            let ok = match op {
                BinOp::Within => scope.symbolic_cmp,
                BinOp::Eq | BinOp::Ne if *a == Type::Bool && *b == Type::Bool => true,
                _ => {
                    (a.is_num() && b.is_num())
                        || (scope.symbolic_cmp
                            && (a.is_num() || a.is_symbolic())
                            && (b.is_num() || b.is_symbolic()))
                }
            };
            if !ok {
                self.report(
                    ShapeMismatch,
                    format!("cannot compare {a} {} {b}", op.as_str()),
                    span,
                );
                return Type::Error;
            }
            return Type::Bool;
        }
        let num = |t: &Type| t.is_num();
        let result = match op {
            BinOp::Add | BinOp::Sub => {
                if num(a) && num(b) {
                    Some(if *a == Type::Int && *b == Type::Int {
                        Type::Int
                    } else {
                        Type::Float
                    })
                } else if (num(a) || a.is_poly()) && (num(b) || b.is_poly()) {
                    Some(Type::PolyExp)
                } else if (num(a) || a.is_zono()) && (num(b) || b.is_zono()) {
                    Some(Type::ZonoExp)
                } else {
                    None
                }
            }
            BinOp::Mul => {
                if num(a) && num(b) {
                    Some(if *a == Type::Int && *b == Type::Int {
                        Type::Int
                    } else {
                        Type::Float
                    })
                } else if (num(a) && b.is_poly()) || (a.is_poly() && num(b)) {
                    Some(Type::PolyExp)
                } else if (num(a) && b.is_zono()) || (a.is_zono() && num(b)) {
                    Some(Type::ZonoExp)
                } else {
                    None
                }
            }
            BinOp::Div => {
                if num(a) && num(b) {
                    Some(Type::Float)
                } else if a.is_poly() && num(b) {
                    Some(Type::PolyExp)
                } else if a.is_zono() && num(b) {
                    Some(Type::ZonoExp)
                } else {
                    None
                }
            }
            _ => None,
        };
        match result {
            Some(t) => t,
            None => {
                self.report(
                    ShapeMismatch,
                    format!("operands {a} {} {b} are incompatible", op.as_str()),
                    span,
                );
                Type::Error
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn traverse(
        &mut self,
        e: &Expr,
        base: &Expr,
        direction: &Ident,
        priority: &Expr,
        stop: &Expr,
        replace: &Expr,
        invariant: &Expr,
        scope: &Scope,
    ) -> Type {
        let bt = self.expr(base, scope);
        let mut inv_scope = scope.clone();
        inv_scope.symbolic_cmp = true;
        self.condition(invariant, &inv_scope);
        let var_name = |x: &Expr| match &x.unparen().kind {
            ExprKind::Var(n) => Some(n.clone()),
            _ => None,
        };
        let p = var_name(priority);
        let s = var_name(stop);
        let r = var_name(replace);
        let supported = direction.name == "backward"
            && matches!(p.as_deref(), Some("priority" | "priority2"))
            && matches!(s.as_deref(), Some("stop" | "stop_traverse"))
            && matches!(r.as_deref(), Some("replace_lower" | "replace_upper"));
        if !supported {
            self.report(
                DiagnosticCode::UnknownError,
                "only backward traversals with priority/stop/replace_lower|replace_upper are supported",
                e.span,
            );
            return Type::Error;
        }
        if !Type::PolyExp.accepts(&bt) {
            self.report(
                DiagnosticCode::ShapeMismatch,
                format!("traverse needs a PolyExp, found {bt}"),
                base.span,
            );
            return Type::Error;
        }
        Type::PolyExp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::lexer::lex;
    use crate::dsl::parser::parse_program;

    fn diags(src: &str) -> Vec<Diagnostic> {
        let prog = parse_program(&lex(src).unwrap()).unwrap();
        validate(&prog, &SymbolTable::default())
    }

    fn codes(src: &str) -> Vec<DiagnosticCode> {
        let mut c: Vec<_> = diags(src).into_iter().map(|d| d.code).collect();
        c.dedup();
        c
    }

    #[test]
    fn simple_valid() {
        assert!(diags("transformer deeppoly { Relu -> (prev[l] >= 0) ? (prev[l], prev[u], prev, prev) : (0, 0, 0, 0); }").is_empty());
        assert!(diags("transformer interval { Relu -> (max(prev[l], 0), max(prev[u], 0)); }").is_empty());
    }

    #[test]
    fn each_code_reachable() {
        use DiagnosticCode::*;
        assert_eq!(
            codes("transformer deeppoly { Relu -> (1 and 2, 0, 0, 0); }"),
            vec![IllegalLogicalOp]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (prev[weight], 0, 0, 0); }"),
            vec![ShapeMismatch]
        );
        assert_eq!(
            codes("transformer interval { Relu -> (prev[L], 0); }"),
            vec![UnknownMetadata]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (foo, 0, 0, 0); }"),
            vec![UndefinedId]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (0, 0, prev * prev, 0); }"),
            vec![ShapeMismatch]
        );
        assert_eq!(
            codes("func transformer(Float x) = x; transformer deeppoly { Relu -> (0, 0, 0, 0); }"),
            vec![ReservedName]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (f 1, 0, 0, 0); }"),
            vec![UnknownError]
        );
    }

    #[test]
    fn arity_and_field_types() {
        use DiagnosticCode::*;
        assert_eq!(
            codes("transformer deeppoly { Relu -> (0, 0, 0); }"),
            vec![ShapeMismatch]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (prev, 0, 0, 0); }"),
            vec![ShapeMismatch]
        );
        assert_eq!(
            codes("transformer deeppoly { Relu -> (0, 0, 0, curr[U]); }"),
            vec![UnknownMetadata]
        );
    }

    #[test]
    fn independent_errors_all_reported() {
        let d = diags("transformer deeppoly { Relu -> (a, b, prev.foo, 1 or 2); }");
        assert_eq!(d.len(), 4, "{d:?}");
    }

    #[test]
    fn functions_and_calls() {
        use DiagnosticCode::*;
        assert!(diags(
            "func g(Neuron n) = n[u] - n[l]; transformer deeppoly { Relu -> (0, g(prev), 0, 0); }"
        )
        .is_empty());
        assert_eq!(
            codes("transformer deeppoly { Relu -> (0, slope(prev[l]), 0, 0); }"),
            vec![UndefinedId]
        );
        assert_eq!(
            codes("func simplify_lower(Float x) = x; transformer deeppoly { Relu -> (0, 0, 0, 0); }"),
            vec![ReservedName]
        );
        assert_eq!(
            codes("func g(Float prev) = prev; transformer deeppoly { Relu -> (0, 0, 0, 0); }"),
            vec![ReservedName]
        );
        assert_eq!(
            codes("transformer deeppoly { Maxpool -> (0, 0, 0, 0); }"),
            vec![UndefinedId]
        );
    }

    #[test]
    fn affine_example() {
        let src = "def Shape as (Float l, Float u, PolyExp L, PolyExp U){[(curr[l]<=curr),(curr[u]>=curr),(curr[L]<=curr),(curr[U]>=curr)]};
transformer deeppoly{
    Affine -> (backsubs_lower(prev.dot(curr[weight]) + curr[bias], curr), backsubs_upper(prev.dot(curr[weight]) + curr[bias], curr), prev.dot(curr[weight]) + curr[bias], prev.dot(curr[weight]) + curr[bias]);
}";
        assert!(diags(src).is_empty(), "{:?}", diags(src));
    }

    #[test]
    fn library_bodies_typecheck() {
        let src = "func my_backsubs(PolyExp e, Neuron n) = (e.traverse(backward, priority2, stop_traverse, replace_lower){e <= n}).map(simplify_lower);
func my_cl(Neuron n1, Neuron n2) = min([n1[l]*n2[l], n1[l]*n2[u], n1[u]*n2[l], n1[u]*n2[u]]);
func my_avg(List<Float> xs) = sum(xs) / len(xs);
transformer deeppoly { Relu -> (my_cl(prev, prev), 0, 0, 0); }";
        assert!(diags(src).is_empty(), "{:?}", diags(src));
        let bad = "func t(PolyExp e) = e.traverse(forward, priority2, stop, replace_lower){true};
transformer deeppoly { Relu -> (0, 0, 0, 0); }";
        assert_eq!(codes(bad), vec![DiagnosticCode::UnknownError]);
    }

    #[test]
    fn zonotope_shape() {
        let src = "def Shape as (Float l, Float u, ZonoExp z){[(curr[l]<=curr),(curr[u]>=curr),(curr <> curr[z])]};
transformer deepz { Relu -> (prev[l] >= 0) ? (prev[l], prev[u], prev[z]) : (0, prev[u], 0.5 * prev[z] + 0.5 * eps); }";
        assert!(diags(src).is_empty(), "{:?}", diags(src));
        let shape = active_shape(&parse_program(&lex(src).unwrap()).unwrap());
        assert_eq!(shape.domain(), Some(DomainTag::Zonotope));
    }
}
