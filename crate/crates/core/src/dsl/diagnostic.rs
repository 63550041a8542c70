use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open byte range into the candidate source.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// Smallest span covering both.
    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// The static error predicates a candidate can violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticCode {
    UnexpectedToken,
    IllegalLogicalOp,
    UnknownMetadata,
    UndefinedId,
    ShapeMismatch,
    ReservedName,
    UnknownError,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnexpectedToken => "UnexpectedToken",
            DiagnosticCode::IllegalLogicalOp => "IllegalLogicalOp",
            DiagnosticCode::UnknownMetadata => "UnknownMetadata",
            DiagnosticCode::UndefinedId => "UndefinedId",
            DiagnosticCode::ShapeMismatch => "ShapeMismatch",
            DiagnosticCode::ReservedName => "ReservedName",
            DiagnosticCode::UnknownError => "UnknownError",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, message: impl Into<String>, span: Span) -> Self {
        Diagnostic {
            code,
            message: message.into(),
            span,
        }
    }

    /// Renders `CODE at start..end: message` followed by the offending source excerpt.
    pub fn render(&self, source: &str) -> String {
        let excerpt = source
            .get(self.span.start..self.span.end.min(source.len()))
            .unwrap_or("");
        if excerpt.is_empty() {
            format!(
                "{} at {}..{}: {}",
                self.code, self.span.start, self.span.end, self.message
            )
        } else {
            format!(
                "{} at {}..{}: {} (in `{}`)",
                self.code, self.span.start, self.span.end, self.message, excerpt
            )
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {}..{}: {}",
            self.code, self.span.start, self.span.end, self.message
        )
    }
}
