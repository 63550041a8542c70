//! Recursive-descent parser. Stops at the first syntax error.
//!
//! Expression precedence, loosest first: ternary, `or`/`xor`, `and`, `not`,
//! comparisons, `+ -`, `* /`, unary minus, postfix (`[..]`, `.method(..)`),
//! primaries.

use super::ast::*;
use super::diagnostic::{Diagnostic, DiagnosticCode, Span};
use super::lexer::{Delim, Keyword, Op, Token, TokenKind};

type PResult<T> = Result<T, Diagnostic>;

/// Parses a whole program from a token stream.
pub fn parse_program(tokens: &[Token]) -> PResult<Program> {
    let mut p = Parser::new(tokens);
    p.program()
}

/// Parses a single expression; trailing tokens are an error.
pub fn parse_expression(tokens: &[Token]) -> PResult<Expr> {
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + offset)
    }

    fn peek_kind(&self) -> Option<&'t TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_span(&self) -> Span {
        let end = self.tokens.last().map_or(0, |t| t.span.end);
        Span::new(end, end)
    }

    fn here(&self) -> Span {
        self.peek().map_or_else(|| self.eof_span(), |t| t.span)
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end().max(start))
    }

    fn error(&self, expected: &str) -> Diagnostic {
        match self.peek() {
            Some(tok) => Diagnostic::new(
                DiagnosticCode::UnexpectedToken,
                format!("unexpected `{}`, expected {expected}", tok.lexeme),
                tok.span,
            ),
            None => Diagnostic::new(
                DiagnosticCode::UnexpectedToken,
                format!("unexpected end of input, expected {expected}"),
                self.eof_span(),
            ),
        }
    }

    fn at_delim(&self, d: Delim) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Delim(x)) if *x == d)
    }

    fn at_op(&self, o: Op) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Op(x)) if *x == o)
    }

    fn at_kw(&self, k: Keyword) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Keyword(x)) if *x == k)
    }

    fn eat_delim(&mut self, d: Delim) -> bool {
        if self.at_delim(d) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, o: Op) -> bool {
        if self.at_op(o) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_delim(&mut self, d: Delim) -> PResult<Span> {
        if self.at_delim(d) {
            Ok(self.bump().map(|t| t.span).unwrap_or_default())
        } else {
            Err(self.error(&format!("`{}`", d.as_str())))
        }
    }

    fn expect_op(&mut self, o: Op) -> PResult<Span> {
        if self.at_op(o) {
            Ok(self.bump().map(|t| t.span).unwrap_or_default())
        } else {
            Err(self.error(&format!("`{}`", o.as_str())))
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> PResult<Span> {
        if self.at_kw(k) {
            Ok(self.bump().map(|t| t.span).unwrap_or_default())
        } else {
            Err(self.error(&format!("`{}`", k.as_str())))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(name),
                span,
                ..
            }) => {
                self.pos += 1;
                Ok(Ident::new(name.clone(), *span))
            }
            _ => Err(self.error(what)),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.error("end of input")),
        }
    }

    // ----- items -----

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::Keyword(Keyword::Def) => {
                    if prog.shape.is_some() {
                        return Err(Diagnostic::new(
                            DiagnosticCode::UnexpectedToken,
                            "duplicate shape declaration",
                            tok.span,
                        ));
                    }
                    prog.shape = Some(self.shape_decl()?);
                }
                TokenKind::Keyword(Keyword::Func) => prog.funcs.push(self.func_def()?),
                TokenKind::Keyword(Keyword::Transformer) => prog.transformers.push(self.transformer_def()?),
                TokenKind::Delim(Delim::Semi) => {
                    self.pos += 1;
                }
                _ => return Err(self.error("`def`, `func` or `transformer`")),
            }
        }
        Ok(prog)
    }

    fn shape_decl(&mut self) -> PResult<ShapeDecl> {
        let start = self.expect_kw(Keyword::Def)?.start;
        self.expect_kw(Keyword::Shape)?;
        self.expect_kw(Keyword::As)?;
        self.expect_delim(Delim::LParen)?;
        let mut fields = Vec::new();
        if !self.at_delim(Delim::RParen) {
            loop {
                fields.push(self.param()?);
                if !self.eat_delim(Delim::Comma) {
                    break;
                }
            }
        }
        self.expect_delim(Delim::RParen)?;
        self.expect_delim(Delim::LBrace)?;
        let mut constraints = Vec::new();
        if self.eat_delim(Delim::LSqr) {
            if !self.at_delim(Delim::RSqr) {
                constraints = self.expr_list()?;
            }
            self.expect_delim(Delim::RSqr)?;
        }
        self.expect_delim(Delim::RBrace)?;
        self.eat_delim(Delim::Semi);
        Ok(ShapeDecl {
            fields,
            constraints,
            span: self.span_from(start),
        })
    }

    fn param(&mut self) -> PResult<Param> {
        let ty = self.type_expr()?;
        let name = self.expect_ident("a name")?;
        Ok(Param { ty, name })
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let start = self.here().start;
        if self.eat_delim(Delim::LParen) {
            let mut args = vec![self.type_expr()?];
            while self.eat_delim(Delim::Comma) {
                args.push(self.type_expr()?);
            }
            self.expect_op(Op::Arrow)?;
            let ret = self.type_expr()?;
            self.expect_delim(Delim::RParen)?;
            return Ok(TypeExpr::Func(args, Box::new(ret), self.span_from(start)));
        }
        let name = self.expect_ident("a type")?;
        if name.name == "List" && self.eat_op(Op::Lt) {
            let inner = self.type_expr()?;
            self.expect_op(Op::Gt)?;
            return Ok(TypeExpr::List(Box::new(inner), self.span_from(start)));
        }
        Ok(TypeExpr::Named(name))
    }

    fn func_def(&mut self) -> PResult<FuncDef> {
        let start = self.expect_kw(Keyword::Func)?.start;
        // Keywords are accepted here so that redefinitions surface as ReservedName.
        let name = match self.peek() {
            Some(Token {
                kind: TokenKind::Ident(n),
                span,
                ..
            }) => Ident::new(n.clone(), *span),
            Some(Token {
                kind: TokenKind::Keyword(k),
                span,
                ..
            }) => Ident::new(k.as_str(), *span),
            _ => return Err(self.error("a function name")),
        };
        self.pos += 1;
        self.expect_delim(Delim::LParen)?;
        let mut params = Vec::new();
        if !self.at_delim(Delim::RParen) {
            loop {
                params.push(self.param()?);
                if !self.eat_delim(Delim::Comma) {
                    break;
                }
            }
        }
        self.expect_delim(Delim::RParen)?;
        self.expect_op(Op::Assign)?;
        let body = self.expr()?;
        self.expect_delim(Delim::Semi)?;
        Ok(FuncDef {
            name,
            params,
            body,
            span: self.span_from(start),
        })
    }

    fn transformer_def(&mut self) -> PResult<TransformerDef> {
        let start = self.expect_kw(Keyword::Transformer)?.start;
        let name = self.expect_ident("a transformer name")?;
        self.expect_delim(Delim::LBrace)?;
        let mut cases = Vec::new();
        while !self.at_delim(Delim::RBrace) {
            let case_start = self.here().start;
            let op = self.expect_ident("an operator name or `}`")?;
            self.expect_op(Op::Arrow)?;
            let body = self.trans_ret()?;
            self.expect_delim(Delim::Semi)?;
            cases.push(OpCase {
                op,
                body,
                span: self.span_from(case_start),
            });
        }
        self.expect_delim(Delim::RBrace)?;
        self.eat_delim(Delim::Semi);
        Ok(TransformerDef {
            name,
            cases,
            span: self.span_from(start),
        })
    }

    // ----- trans_ret -----

    fn trans_ret(&mut self) -> PResult<TransRet> {
        if self.at_delim(Delim::LParen) {
            // `( trans_ret )` and `( expr ) ...` share a prefix; try the former
            // and keep it only if the closing paren ends the production.
            let save = self.pos;
            let trial = self.paren_trans();
            match trial {
                Ok(t) if self.ends_trans_ret() => return Ok(t),
                Ok(_) => {
                    self.pos = save;
                    return self.trans_from_expr();
                }
                Err(trial_err) => {
                    self.pos = save;
                    return match self.trans_from_expr() {
                        Ok(t) => Ok(t),
                        Err(e) if trial_err.span.start > e.span.start => Err(trial_err),
                        Err(e) => Err(e),
                    };
                }
            }
        }
        self.trans_from_expr()
    }

    fn paren_trans(&mut self) -> PResult<TransRet> {
        let start = self.expect_delim(Delim::LParen)?.start;
        let inner = self.trans_ret()?;
        self.expect_delim(Delim::RParen)?;
        Ok(TransRet::Paren(Box::new(inner), self.span_from(start)))
    }

    fn ends_trans_ret(&self) -> bool {
        matches!(
            self.peek_kind(),
            None | Some(TokenKind::Op(Op::Colon))
                | Some(TokenKind::Delim(Delim::Semi | Delim::RParen | Delim::RBrace))
        )
    }

    fn trans_from_expr(&mut self) -> PResult<TransRet> {
        let start = self.here().start;
        let first = self.or_expr()?;
        if self.eat_op(Op::Question) {
            let then = self.trans_ret()?;
            self.expect_op(Op::Colon)?;
            let els = self.trans_ret()?;
            return Ok(TransRet::Cond {
                cond: first,
                then: Box::new(then),
                els: Box::new(els),
                span: self.span_from(start),
            });
        }
        let mut items = vec![first];
        while self.eat_delim(Delim::Comma) {
            items.push(self.expr()?);
        }
        Ok(TransRet::Tuple(items, self.span_from(start)))
    }

    // ----- expressions -----

    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut items = vec![self.expr()?];
        while self.eat_delim(Delim::Comma) {
            items.push(self.expr()?);
        }
        Ok(items)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let start = self.here().start;
        let cond = self.or_expr()?;
        if self.eat_op(Op::Question) {
            let then = self.expr()?;
            self.expect_op(Op::Colon)?;
            let els = self.expr()?;
            return Ok(Expr::new(
                ExprKind::Cond {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    els: Box::new(els),
                },
                self.span_from(start),
            ));
        }
        Ok(cond)
    }

    fn binary(&self, op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = lhs.span.join(rhs.span);
        Expr::new(
            ExprKind::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        )
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        loop {
            let op = if self.at_kw(Keyword::Or) {
                BinOp::Or
            } else if self.at_kw(Keyword::Xor) {
                BinOp::Xor
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.at_kw(Keyword::And) {
            self.pos += 1;
            let rhs = self.not_expr()?;
            lhs = self.binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at_kw(Keyword::Not) {
            let start = self.here().start;
            self.pos += 1;
            let inner = self.not_expr()?;
            return Ok(Expr::new(ExprKind::Not(Box::new(inner)), self.span_from(start)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Op(Op::Lt)) => BinOp::Lt,
                Some(TokenKind::Op(Op::Le)) => BinOp::Le,
                Some(TokenKind::Op(Op::Gt)) => BinOp::Gt,
                Some(TokenKind::Op(Op::Ge)) => BinOp::Ge,
                Some(TokenKind::Op(Op::EqEq)) => BinOp::Eq,
                Some(TokenKind::Op(Op::Ne)) => BinOp::Ne,
                Some(TokenKind::Op(Op::Within)) => BinOp::Within,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.add_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Op(Op::Plus)) => BinOp::Add,
                Some(TokenKind::Op(Op::Minus)) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.mul_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Op(Op::Star)) => BinOp::Mul,
                Some(TokenKind::Op(Op::Slash)) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary_expr()?;
            lhs = self.binary(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.at_op(Op::Minus) {
            let start = self.here().start;
            self.pos += 1;
            let inner = self.unary_expr()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), self.span_from(start)));
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let start = self.here().start;
        let mut base = self.primary()?;
        loop {
            if self.eat_delim(Delim::LSqr) {
                let simple = matches!(
                    (self.peek_kind(), self.peek_at(1).map(|t| &t.kind)),
                    (Some(TokenKind::Ident(_)), Some(TokenKind::Delim(Delim::RSqr)))
                );
                if simple {
                    let field = self.expect_ident("a field name")?;
                    self.expect_delim(Delim::RSqr)?;
                    let kind = if METADATA_FIELDS.contains(&field.name.as_str()) {
                        ExprKind::GetMetadata {
                            base: Box::new(base),
                            field,
                        }
                    } else {
                        ExprKind::GetElement {
                            base: Box::new(base),
                            field,
                        }
                    };
                    base = Expr::new(kind, self.span_from(start));
                } else {
                    let index = self.expr_list()?;
                    self.expect_delim(Delim::RSqr)?;
                    base = Expr::new(
                        ExprKind::BadIndex {
                            base: Box::new(base),
                            index,
                        },
                        self.span_from(start),
                    );
                }
            } else if self.eat_op(Op::Dot) {
                base = self.dot_suffix(base, start)?;
            } else {
                return Ok(base);
            }
        }
    }

    fn dot_suffix(&mut self, base: Expr, start: usize) -> PResult<Expr> {
        if self.at_kw(Keyword::Traverse) {
            self.pos += 1;
            self.expect_delim(Delim::LParen)?;
            let direction = self.expect_ident("a traversal direction")?;
            self.expect_delim(Delim::Comma)?;
            let priority = self.expr()?;
            self.expect_delim(Delim::Comma)?;
            let stop = self.expr()?;
            self.expect_delim(Delim::Comma)?;
            let replace = self.expr()?;
            self.expect_delim(Delim::RParen)?;
            self.expect_delim(Delim::LBrace)?;
            let invariant = self.expr()?;
            self.expect_delim(Delim::RBrace)?;
            return Ok(Expr::new(
                ExprKind::Traverse {
                    base: Box::new(base),
                    direction,
                    priority: Box::new(priority),
                    stop: Box::new(stop),
                    replace: Box::new(replace),
                    invariant: Box::new(invariant),
                },
                self.span_from(start),
            ));
        }
        let field = self.expect_ident("a method name")?;
        if let Some(method) = Method::from_name(&field.name) {
            self.expect_delim(Delim::LParen)?;
            let arg = self.expr()?;
            self.expect_delim(Delim::RParen)?;
            return Ok(Expr::new(
                ExprKind::Method {
                    base: Box::new(base),
                    method,
                    arg: Box::new(arg),
                },
                self.span_from(start),
            ));
        }
        let args = if self.eat_delim(Delim::LParen) {
            let args = if self.at_delim(Delim::RParen) {
                Vec::new()
            } else {
                self.expr_list()?
            };
            self.expect_delim(Delim::RParen)?;
            Some(args)
        } else {
            None
        };
        Ok(Expr::new(
            ExprKind::BadAttr {
                base: Box::new(base),
                field,
                args,
            },
            self.span_from(start),
        ))
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek_kind(),
            Some(
                TokenKind::Int(_)
                    | TokenKind::Float(_)
                    | TokenKind::Ident(_)
                    | TokenKind::Keyword(Keyword::True | Keyword::False)
            )
        )
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_delim(Delim::LParen)?;
        let args = if self.at_delim(Delim::RParen) {
            Vec::new()
        } else {
            self.expr_list()?
        };
        self.expect_delim(Delim::RParen)?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return Err(self.error("an expression"));
        };
        let start = tok.span.start;
        match &tok.kind {
            TokenKind::Int(v) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Int(*v), tok.span))
            }
            TokenKind::Float(v) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Float(*v), tok.span))
            }
            TokenKind::Keyword(Keyword::True) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Bool(true), tok.span))
            }
            TokenKind::Keyword(Keyword::False) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Bool(false), tok.span))
            }
            TokenKind::Delim(Delim::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_delim(Delim::RParen)?;
                Ok(Expr::new(ExprKind::Paren(Box::new(inner)), self.span_from(start)))
            }
            TokenKind::Delim(Delim::LSqr) => {
                self.pos += 1;
                let items = self.expr_list()?;
                self.expect_delim(Delim::RSqr)?;
                Ok(Expr::new(ExprKind::List(items), self.span_from(start)))
            }
            TokenKind::Keyword(Keyword::Lp) => {
                self.pos += 1;
                self.expect_delim(Delim::LParen)?;
                let op = self.expect_ident("`maximize` or `minimize`")?;
                self.expect_delim(Delim::Comma)?;
                let objective = self.expr()?;
                self.expect_delim(Delim::Comma)?;
                let constraints = self.expr()?;
                self.expect_delim(Delim::RParen)?;
                Ok(Expr::new(
                    ExprKind::Lp {
                        op,
                        objective: Box::new(objective),
                        constraints: Box::new(constraints),
                    },
                    self.span_from(start),
                ))
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                let ident = Ident::new(name.clone(), tok.span);
                self.ident_expr(ident)
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn ident_expr(&mut self, ident: Ident) -> PResult<Expr> {
        let start = ident.span.start;
        if self.at_delim(Delim::LParen) {
            let args_start = self.here();
            let args = self.call_args()?;
            let kind = match ident.name.as_str() {
                "max" | "min" => {
                    if args.is_empty() || args.len() > 2 {
                        return Err(Diagnostic::new(
                            DiagnosticCode::UnexpectedToken,
                            format!("`{}` takes one or two arguments", ident.name),
                            args_start.join(self.span_from(start)),
                        ));
                    }
                    ExprKind::MaxOp {
                        is_max: ident.name == "max",
                        args,
                    }
                }
                "argmax" | "argmin" => {
                    let [list, cmp]: [Expr; 2] = args.try_into().map_err(|_| {
                        Diagnostic::new(
                            DiagnosticCode::UnexpectedToken,
                            format!("`{}` takes two arguments", ident.name),
                            args_start.join(self.span_from(start)),
                        )
                    })?;
                    ExprKind::ArgOp {
                        is_max: ident.name == "argmax",
                        list: Box::new(list),
                        cmp: Box::new(cmp),
                    }
                }
                "sum" | "len" => {
                    let [arg]: [Expr; 1] = args.try_into().map_err(|_| {
                        Diagnostic::new(
                            DiagnosticCode::UnexpectedToken,
                            format!("`{}` takes one argument", ident.name),
                            args_start.join(self.span_from(start)),
                        )
                    })?;
                    ExprKind::ListOp {
                        op: ident,
                        arg: Box::new(arg),
                    }
                }
                _ => ExprKind::Call { func: ident, args },
            };
            return Ok(Expr::new(kind, self.span_from(start)));
        }
        // `name [..]` is always indexing, so a curried argument list starts with an atom.
        if self.starts_atom() {
            let mut args = Vec::new();
            while self.starts_atom() || self.at_delim(Delim::LParen) {
                args.push(self.postfix_expr()?);
            }
            return Ok(Expr::new(
                ExprKind::Curry { func: ident, args },
                self.span_from(start),
            ));
        }
        Ok(Expr::new(ExprKind::Var(ident.name), ident.span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::lexer::lex;

    fn expr(src: &str) -> Expr {
        parse_expression(&lex(src).unwrap()).unwrap()
    }

    fn program(src: &str) -> PResult<Program> {
        parse_program(&lex(src).unwrap())
    }

    #[test]
    fn paren_metadata() {
        let e = expr("(prev[l])");
        match e.kind {
            ExprKind::Paren(inner) => assert!(matches!(inner.kind, ExprKind::GetElement { .. })),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(expr("curr[weight]").kind, ExprKind::GetMetadata { .. }));
    }

    #[test]
    fn precedence() {
        let e = expr("a + b * c");
        let ExprKind::Binary { op, rhs, .. } = e.kind else {
            panic!()
        };
        assert_eq!(op, BinOp::Add);
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinOp::Mul, .. }));

        let e = expr("a < b and not c or d");
        assert!(matches!(e.kind, ExprKind::Binary { op: BinOp::Or, .. }));

        let e = expr("a ? b : c ? d : e");
        let ExprKind::Cond { els, .. } = e.kind else {
            panic!()
        };
        assert!(matches!(els.kind, ExprKind::Cond { .. }));
    }

    #[test]
    fn unmatched_delimiter_points_at_brace() {
        let src = "transformer t { Relu -> (1, }";
        let err = program(src).unwrap_err();
        assert_eq!(err.code, DiagnosticCode::UnexpectedToken);
        assert_eq!(&src[err.span.start..err.span.end], "}");
    }

    #[test]
    fn trans_ret_forms() {
        let p = program("transformer t { Relu -> (prev[l] >= 0) ? (prev[l], prev[u]) : (0, 0); }").unwrap();
        assert!(matches!(p.transformers[0].cases[0].body, TransRet::Cond { .. }));

        let p = program("transformer t { Relu -> (prev[l]), (prev[u]); }").unwrap();
        assert!(matches!(&p.transformers[0].cases[0].body, TransRet::Tuple(v, _) if v.len() == 2));

        let p = program("transformer t { Relu -> ((0, 1)); }").unwrap();
        assert!(matches!(p.transformers[0].cases[0].body, TransRet::Paren(..)));
    }

    #[test]
    fn traverse_and_methods() {
        let e = expr(
            "(e.traverse(backward, priority2, stop_traverse, replace_lower){e <= n}).map(simplify_lower)",
        );
        let ExprKind::Method { base, method, .. } = e.kind else {
            panic!()
        };
        assert_eq!(method, Method::Map);
        assert!(matches!(base.unparen().kind, ExprKind::Traverse { .. }));
        assert!(matches!(
            expr("prev.dot(curr[weight])").kind,
            ExprKind::Method {
                method: Method::Dot,
                ..
            }
        ));
        assert!(matches!(expr("prev.foo").kind, ExprKind::BadAttr { .. }));
        assert!(matches!(expr("prev[0]").kind, ExprKind::BadIndex { .. }));
    }

    #[test]
    fn builtins_and_curry() {
        assert!(matches!(
            expr("max(a, b)").kind,
            ExprKind::MaxOp { is_max: true, .. }
        ));
        assert!(matches!(
            expr("min([a, b])").kind,
            ExprKind::MaxOp { is_max: false, .. }
        ));
        assert!(matches!(expr("sum(xs)").kind, ExprKind::ListOp { .. }));
        assert!(matches!(expr("f(a, b)").kind, ExprKind::Call { .. }));
        assert!(matches!(expr("f a 2").kind, ExprKind::Curry { .. }));
        assert!(matches!(expr("lp(maximize, a, b)").kind, ExprKind::Lp { .. }));
    }

    #[test]
    fn func_with_keyword_name_parses() {
        let p = program("func transformer(Float x) = x;").unwrap();
        assert_eq!(p.funcs[0].name.name, "transformer");
    }

    #[test]
    fn shape_declaration() {
        let p = program(
            "def Shape as (Float l, Float u, PolyExp L, PolyExp U){[(curr[l]<=curr),(curr[u]>=curr)]};",
        )
        .unwrap();
        let shape = p.shape.unwrap();
        assert_eq!(shape.fields.len(), 4);
        assert_eq!(shape.constraints.len(), 2);
    }

    #[test]
    fn types() {
        let p = program("func g(List<Float> xs, (Neuron, Neuron -> Bool) c) = 1;").unwrap();
        assert!(matches!(p.funcs[0].params[0].ty, TypeExpr::List(..)));
        assert!(matches!(p.funcs[0].params[1].ty, TypeExpr::Func(..)));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(program("transformer t { Relu -> 0, 0; } )").is_err());
        assert!(program("transformer t { Relu -> 0, 0 }").is_err());
    }
}
