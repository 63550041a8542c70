//! Syntax tree for transformer programs.

use super::diagnostic::Span;

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Ident {
            name: name.into(),
            span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    Named(Ident),
    List(Box<TypeExpr>, Span),
    Func(Vec<TypeExpr>, Box<TypeExpr>, Span),
}

impl TypeExpr {
    pub fn span(&self) -> Span {
        match self {
            TypeExpr::Named(id) => id.span,
            TypeExpr::List(_, s) | TypeExpr::Func(_, _, s) => *s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub ty: TypeExpr,
    pub name: Ident,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeDecl {
    pub fields: Vec<Param>,
    pub constraints: Vec<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuncDef {
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpCase {
    pub op: Ident,
    pub body: TransRet,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerDef {
    pub name: Ident,
    pub cases: Vec<OpCase>,
    pub span: Span,
}

/// A whole candidate file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub shape: Option<ShapeDecl>,
    pub funcs: Vec<FuncDef>,
    pub transformers: Vec<TransformerDef>,
}

/// Case analysis returning one output tuple per leaf.
#[derive(Clone, Debug, PartialEq)]
pub enum TransRet {
    Cond {
        cond: Expr,
        then: Box<TransRet>,
        els: Box<TransRet>,
        span: Span,
    },
    Paren(Box<TransRet>, Span),
    Tuple(Vec<Expr>, Span),
}

impl TransRet {
    pub fn span(&self) -> Span {
        match self {
            TransRet::Cond { span, .. } | TransRet::Paren(_, span) | TransRet::Tuple(_, span) => *span,
        }
    }

    /// Number of leaf tuples reachable from this node.
    pub fn leaf_count(&self) -> usize {
        match self {
            TransRet::Cond { then, els, .. } => then.leaf_count() + els.leaf_count(),
            TransRet::Paren(inner, _) => inner.leaf_count(),
            TransRet::Tuple(..) => 1,
        }
    }

    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a [Expr], Span)) {
        match self {
            TransRet::Cond { then, els, .. } => {
                then.for_each_leaf(f);
                els.for_each_leaf(f);
            }
            TransRet::Paren(inner, _) => inner.for_each_leaf(f),
            TransRet::Tuple(items, span) => f(items, *span),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Within,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub fn as_str(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Within => "<>",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or | BinOp::Xor => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne | BinOp::Within => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Xor)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne | BinOp::Within
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Map,
    MapList,
    Dot,
    Concat,
}

impl Method {
    pub fn from_name(name: &str) -> Option<Method> {
        Some(match name {
            "map" => Method::Map,
            "map_list" => Method::MapList,
            "dot" => Method::Dot,
            "concat" => Method::Concat,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Map => "map",
            Method::MapList => "map_list",
            Method::Dot => "dot",
            Method::Concat => "concat",
        }
    }
}

/// Metadata fields attached to neurons by the network rather than the shape.
pub const METADATA_FIELDS: [&str; 4] = ["weight", "bias", "equations", "layer"];

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Bool(bool),
    Int(i64),
    Float(f64),
    Var(String),
    Paren(Box<Expr>),
    List(Vec<Expr>),
    /// `e[weight]`, `e[bias]`, `e[layer]`, `e[equations]`.
    GetMetadata {
        base: Box<Expr>,
        field: Ident,
    },
    /// `e[l]`, `e[U]`, ... resolved against the shape declaration.
    GetElement {
        base: Box<Expr>,
        field: Ident,
    },
    /// `e[0]`, `e[a + b]`: numeric or nested index where a field name belongs.
    BadIndex {
        base: Box<Expr>,
        index: Vec<Expr>,
    },
    /// `e.name` or `e.name(args)` that is not one of the list methods.
    BadAttr {
        base: Box<Expr>,
        field: Ident,
        args: Option<Vec<Expr>>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Cond {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Traverse {
        base: Box<Expr>,
        direction: Ident,
        priority: Box<Expr>,
        stop: Box<Expr>,
        replace: Box<Expr>,
        invariant: Box<Expr>,
    },
    ArgOp {
        is_max: bool,
        list: Box<Expr>,
        cmp: Box<Expr>,
    },
    MaxOp {
        is_max: bool,
        args: Vec<Expr>,
    },
    ListOp {
        op: Ident,
        arg: Box<Expr>,
    },
    Method {
        base: Box<Expr>,
        method: Method,
        arg: Box<Expr>,
    },
    Lp {
        op: Ident,
        objective: Box<Expr>,
        constraints: Box<Expr>,
    },
    Call {
        func: Ident,
        args: Vec<Expr>,
    },
    Curry {
        func: Ident,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Strips enclosing parentheses.
    pub fn unparen(&self) -> &Expr {
        match &self.kind {
            ExprKind::Paren(inner) => inner.unparen(),
            _ => self,
        }
    }
}

// Structural comparison: spans are positional noise and parentheses carry no
// meaning once the tree exists, so both are erased before comparing.

impl Program {
    pub fn canonical(&self) -> Program {
        Program {
            shape: self.shape.as_ref().map(|s| ShapeDecl {
                fields: s.fields.iter().map(Param::canonical).collect(),
                constraints: s.constraints.iter().map(Expr::canonical).collect(),
                span: Span::default(),
            }),
            funcs: self
                .funcs
                .iter()
                .map(|f| FuncDef {
                    name: f.name.canonical(),
                    params: f.params.iter().map(Param::canonical).collect(),
                    body: f.body.canonical(),
                    span: Span::default(),
                })
                .collect(),
            transformers: self
                .transformers
                .iter()
                .map(|t| TransformerDef {
                    name: t.name.canonical(),
                    cases: t
                        .cases
                        .iter()
                        .map(|c| OpCase {
                            op: c.op.canonical(),
                            body: c.body.canonical(),
                            span: Span::default(),
                        })
                        .collect(),
                    span: Span::default(),
                })
                .collect(),
        }
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Ident {
    fn canonical(&self) -> Ident {
        Ident::new(self.name.clone(), Span::default())
    }
}

impl Param {
    fn canonical(&self) -> Param {
        Param {
            ty: self.ty.canonical(),
            name: self.name.canonical(),
        }
    }
}

impl TypeExpr {
    fn canonical(&self) -> TypeExpr {
        match self {
            TypeExpr::Named(id) => TypeExpr::Named(id.canonical()),
            TypeExpr::List(inner, _) => TypeExpr::List(Box::new(inner.canonical()), Span::default()),
            TypeExpr::Func(args, ret, _) => TypeExpr::Func(
                args.iter().map(TypeExpr::canonical).collect(),
                Box::new(ret.canonical()),
                Span::default(),
            ),
        }
    }
}

impl TransRet {
    pub fn canonical(&self) -> TransRet {
        match self {
            TransRet::Cond { cond, then, els, .. } => TransRet::Cond {
                cond: cond.canonical(),
                then: Box::new(then.canonical()),
                els: Box::new(els.canonical()),
                span: Span::default(),
            },
            TransRet::Paren(inner, _) => inner.canonical(),
            TransRet::Tuple(items, _) => {
                TransRet::Tuple(items.iter().map(Expr::canonical).collect(), Span::default())
            }
        }
    }
}

impl Expr {
    pub fn canonical(&self) -> Expr {
        let b = |e: &Expr| Box::new(e.canonical());
        let v = |es: &[Expr]| es.iter().map(Expr::canonical).collect::<Vec<_>>();
        let kind = match &self.kind {
            ExprKind::Paren(inner) => return inner.canonical(),
            ExprKind::Bool(x) => ExprKind::Bool(*x),
            ExprKind::Int(x) => ExprKind::Int(*x),
            ExprKind::Float(x) => ExprKind::Float(*x),
            ExprKind::Var(x) => ExprKind::Var(x.clone()),
            ExprKind::List(items) => ExprKind::List(v(items)),
            ExprKind::GetMetadata { base, field } => ExprKind::GetMetadata {
                base: b(base),
                field: field.canonical(),
            },
            ExprKind::GetElement { base, field } => ExprKind::GetElement {
                base: b(base),
                field: field.canonical(),
            },
            ExprKind::BadIndex { base, index } => ExprKind::BadIndex {
                base: b(base),
                index: v(index),
            },
            ExprKind::BadAttr { base, field, args } => ExprKind::BadAttr {
                base: b(base),
                field: field.canonical(),
                args: args.as_ref().map(|a| v(a)),
            },
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op: *op,
                lhs: b(lhs),
                rhs: b(rhs),
            },
            ExprKind::Not(e) => ExprKind::Not(b(e)),
            ExprKind::Neg(e) => ExprKind::Neg(b(e)),
            ExprKind::Cond { cond, then, els } => ExprKind::Cond {
                cond: b(cond),
                then: b(then),
                els: b(els),
            },
            ExprKind::Traverse {
                base,
                direction,
                priority,
                stop,
                replace,
                invariant,
            } => ExprKind::Traverse {
                base: b(base),
                direction: direction.canonical(),
                priority: b(priority),
                stop: b(stop),
                replace: b(replace),
                invariant: b(invariant),
            },
            ExprKind::ArgOp { is_max, list, cmp } => ExprKind::ArgOp {
                is_max: *is_max,
                list: b(list),
                cmp: b(cmp),
            },
            ExprKind::MaxOp { is_max, args } => ExprKind::MaxOp {
                is_max: *is_max,
                args: v(args),
            },
            ExprKind::ListOp { op, arg } => ExprKind::ListOp {
                op: op.canonical(),
                arg: b(arg),
            },
            ExprKind::Method { base, method, arg } => ExprKind::Method {
                base: b(base),
                method: *method,
                arg: b(arg),
            },
            ExprKind::Lp {
                op,
                objective,
                constraints,
            } => ExprKind::Lp {
                op: op.canonical(),
                objective: b(objective),
                constraints: b(constraints),
            },
            ExprKind::Call { func, args } => ExprKind::Call {
                func: func.canonical(),
                args: v(args),
            },
            ExprKind::Curry { func, args } => ExprKind::Curry {
                func: func.canonical(),
                args: v(args),
            },
        };
        Expr::new(kind, Span::default())
    }
}
