//! Offline repairers for candidates that fail validation.

use crate::dsl::validate::{BINDING_NAMES, DOMAIN_FIELDS, SYNTAX_NAMES};
use crate::dsl::{Diagnostic, DiagnosticCode, SymbolTable};

use super::Repairer;

/// Leaves the source untouched; invalid candidates are discarded.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoRepair;

impl Repairer for NoRepair {
    fn repair(&mut self, source: &str, _diagnostics: &[Diagnostic]) -> String {
        source.to_string()
    }
}

/// Mechanical fixes: C-style logical operators, misspelled known names
/// (edit distance ≤ 2), and missing closing delimiters at the end.
#[derive(Clone, Debug, Default)]
pub struct RuleRepairer;

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for j in 0..b.len() {
            let cur = row[j + 1];
            row[j + 1] = (prev + usize::from(ca != b[j])).min(row[j] + 1).min(cur + 1);
            prev = cur;
        }
    }
    row[b.len()]
}

fn vocabulary() -> Vec<String> {
    let table = SymbolTable::default();
    let mut words: Vec<String> = table.functions.keys().cloned().collect();
    words.extend(table.metadata.keys().cloned());
    for w in BINDING_NAMES.iter().chain(&SYNTAX_NAMES).chain(&DOMAIN_FIELDS) {
        words.push(w.to_string());
    }
    words.sort();
    words.dedup();
    words
}

/// Closest known name, unique at its distance.
fn suggest(word: &str, vocab: &[String]) -> Option<String> {
    let mut scored: Vec<(usize, &String)> = vocab
        .iter()
        .map(|v| (edit_distance(word, v), v))
        .filter(|(d, v)| *d > 0 && *d <= 2 && *d < word.len().min(v.len()))
        .collect();
    scored.sort();
    match scored.as_slice() {
        [(d, v), rest @ ..] if rest.first().is_none_or(|(d2, _)| d2 > d) => Some(v.to_string()),
        _ => None,
    }
}

fn close_delimiters(source: &str) -> String {
    let mut stack = Vec::new();
    for c in source.chars() {
        match c {
            '(' => stack.push(')'),
            '[' => stack.push(']'),
            '{' => stack.push('}'),
            ')' | ']' | '}' if stack.last() == Some(&c) => {
                stack.pop();
            }
            _ => {}
        }
    }
    let mut out = source.trim_end().to_string();
    while let Some(c) = stack.pop() {
        if c == '}' && !out.ends_with(';') {
            out.push(';');
        }
        out.push(c);
    }
    out.push('\n');
    out
}

impl Repairer for RuleRepairer {
    fn repair(&mut self, source: &str, diagnostics: &[Diagnostic]) -> String {
        let vocab = vocabulary();
        let mut edits: Vec<(usize, usize, String)> = Vec::new();
        for d in diagnostics {
            let (s, e) = (d.span.start, d.span.end);
            let Some(text) = source.get(s..e) else { continue };
            match d.code {
                DiagnosticCode::IllegalLogicalOp => {
                    let with = if text == "&&" { " and " } else { " or " };
                    edits.push((s, e, with.to_string()));
                }
                DiagnosticCode::UndefinedId => {
                    if let Some(fix) = suggest(text, &vocab) {
                        edits.push((s, e, fix));
                    }
                }
                _ => {}
            }
        }
        edits.sort_by_key(|e| std::cmp::Reverse(e.0));
        edits.dedup_by_key(|e| e.0);
        let mut out = source.to_string();
        for (s, e, with) in edits {
            out.replace_range(s..e, &with);
        }
        if diagnostics
            .iter()
            .any(|d| d.code == DiagnosticCode::UnexpectedToken && d.span.start >= source.trim_end().len())
        {
            out = close_delimiters(&out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;

    fn fix(src: &str) -> String {
        let diags = dsl::check(src).expect_err("invalid");
        RuleRepairer.repair(src, &diags)
    }

    #[test]
    fn logical_operators() {
        let src =
            "transformer deeppoly { Relu -> (prev[l] >= 0 && prev[u] >= 0) ? (0, 0, 0, 0) : (0, 0, 0, 0); }";
        assert!(dsl::check(&fix(src)).is_ok());
    }

    #[test]
    fn misspelled_names() {
        let src = "transformer deeppoly { Relu -> (0, prev[u], 0, backsubs_uper(prev, curr)); }";
        assert!(dsl::check(&fix(src)).is_ok(), "{}", fix(src));
    }

    #[test]
    fn unclosed_block() {
        let src = "transformer deeppoly { Relu -> (0, prev[u], 0, prev)";
        assert!(dsl::check(&fix(src)).is_ok(), "{}", fix(src));
    }

    #[test]
    fn unknown_names_stay() {
        let src = "transformer deeppoly { Relu -> (attr, 0, 0, 0); }";
        assert_eq!(fix(src), src);
    }

    #[test]
    fn distance() {
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "ab"), 2);
    }
}
