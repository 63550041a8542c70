//! The transformer DSL: lexer, recursive-descent parser, AST, pretty printer
//! and static validator.
//!
//! Parsing stops at the first syntax error. Validation accumulates every
//! independent diagnostic in one pass.

pub mod ast;
pub mod diagnostic;
pub mod format;
pub mod lexer;
pub mod parser;
pub mod validate;

pub use ast::{Expr, ExprKind, Program, TransRet};
pub use diagnostic::{Diagnostic, DiagnosticCode, Span};
pub use format::{format_expr, format_program};
pub use lexer::{lex, Token, TokenKind};
pub use parser::{parse_expression, parse_program};
pub use validate::{active_shape, validate, ShapeSpec, SymbolTable, Type};

/// Lexes and parses `source`. Lexer diagnostics are returned as a set; a
/// parse failure yields exactly one diagnostic.
pub fn parse(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let tokens = lex(source)?;
    parse_program(&tokens).map_err(|d| vec![d])
}

/// Lexes, parses and validates `source` against the default symbol table.
pub fn check(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let prog = parse(source)?;
    let diags = validate(&prog, &SymbolTable::default());
    if diags.is_empty() {
        Ok(prog)
    } else {
        Err(diags)
    }
}
