//! Generation and repair prompts, and extraction of DSL blocks from completions.

use std::fmt::Write;

use crate::domain::DomainTag;
use crate::dsl::Diagnostic;
use crate::ops::OperatorKind;
use crate::soundness::Counterexample;

use crate::reference;

/// What the previous rounds learned: the best unsound candidate so far.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub best_source: String,
    pub counterexamples: Vec<Counterexample>,
    pub cost: f64,
}

const GRAMMAR: &str = r#"program    ::= shape? func* transformer+
shape      ::= "def Shape as (" type name ("," type name)* ")" "{[" constraint ("," constraint)* "]};"
func       ::= "func" name "(" type name ("," type name)* ")" "=" expr ";"
transformer::= "transformer" name "{" (Op "->" ret ";")* "}"
ret        ::= "(" expr ("," expr)* ")" | "(" ret ")" | expr "?" ret ":" ret
expr       ::= number | name | "prev" | "curr" | "eps" | expr "[" field "]"
             | expr binop expr | "-" expr | "!" expr | expr "?" expr ":" expr
             | name "(" args ")" | expr "." ("map" | "map_list" | "dot" | "concat") "(" args ")"
             | "[" expr ("," expr)* "]" | "(" expr ")"
binop      ::= + - * / < <= > >= == != and or
field      ::= a shape field (l, u, L, U, z) or metadata (weight, bias, layer)
type       ::= Int | Float | Bool | Neuron | PolyExp | ZonoExp | List<type>"#;

const LIBRARY: &str = r#"max(a, b), min(a, b), max(list), min(list), sum(list), len(list), avg(list)
argmax(list, cmp), argmin(list, cmp)
simplify_lower(Neuron n, Float c), simplify_upper(Neuron n, Float c): c·n bounded by n[l] or n[u]
replace_lower(Neuron n, Float c), replace_upper(Neuron n, Float c): c·n replaced by n[L] or n[U]
backsubs_lower(PolyExp e, Neuron curr), backsubs_upper(PolyExp e, Neuron curr): scalar bound of e by back-substitution
priority(Neuron n), stop(Neuron n)
gelu(x), elu(x), sigmoid(x): the activation value at a scalar"#;

fn domain_header(domain: DomainTag) -> &'static str {
    match domain {
        DomainTag::DeepPoly => {
            "Each neuron carries scalar bounds l, u and affine bounds L, U over earlier neurons.\n\
             A case returns (l, u, L, U) for curr in terms of prev."
        }
        DomainTag::Interval => {
            "Each neuron carries scalar bounds l, u.\nA case returns (l, u) for curr in terms of prev."
        }
        DomainTag::Zonotope => {
            "Each neuron carries scalar bounds l, u and an affine form z over noise symbols in [-1, 1].\n\
             `eps` is a fresh noise symbol. A case returns (l, u, z) for curr in terms of prev."
        }
    }
}

/// The deterministic generation prompt for `op` in `domain`.
pub fn build_prompt(op: OperatorKind, domain: DomainTag, history: Option<&History>) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "You write sound abstract transformers for neural-network operators in a small DSL.\n\
         A transformer is sound when every concrete output of the operator on inputs inside the\n\
         abstract input satisfies every constraint of the abstract output.\n"
    );
    let _ = writeln!(p, "## Domain: {}\n{}\n", domain.name(), domain_header(domain));
    let _ = writeln!(p, "## Grammar\n{GRAMMAR}\n");
    let _ = writeln!(p, "## Functions\n{LIBRARY}\n");
    let _ = writeln!(p, "## Examples");
    for (name, src) in [
        ("abs", reference::source(domain, "abs")),
        ("affine", reference::source(domain, "affine")),
    ] {
        if let Some(src) = src {
            let _ = writeln!(
                p,
                "Generate the transformer for `{name}` operator\n\"\"\"\n{}\n\"\"\"\n",
                src.trim()
            );
        }
    }
    if let Some(h) = history {
        let _ = writeln!(
            p,
            "## Previous attempt\nThe best candidate so far is unsound with cost {:.4}:\n\"\"\"\n{}\n\"\"\"",
            h.cost,
            h.best_source.trim()
        );
        let _ = writeln!(p, "It is violated on these abstract elements:");
        for c in &h.counterexamples {
            let _ = writeln!(p, "{}", serde_json::to_string(&c.summary()).unwrap_or_default());
        }
        let _ = writeln!(p, "Fix the violated cases and keep the rest.\n");
    }
    let _ = writeln!(
        p,
        "## Task\nGenerate the transformer for `{}` operator\n\
         Answer with the program only, wrapped in triple quotes (\"\"\").",
        op.name()
    );
    p
}

/// Prompt asking a model to fix the reported static errors.
pub fn build_repair_prompt(source: &str, diagnostics: &[Diagnostic]) -> String {
    let mut p = String::from(
        "The DSL program below does not compile. Fix only the reported errors and keep the\n\
         semantics. Answer with the corrected program wrapped in triple quotes (\"\"\").\n\n[ERROR]:\n",
    );
    for d in diagnostics {
        let _ = writeln!(p, "{}", d);
    }
    let _ = write!(p, "\n[CODE]:\n{}\n", source.trim());
    p
}

/// The first DSL block in `completion`: a `"""` block, else a ``` fence with
/// an optional language tag. Returns `None` when no non-empty block exists.
pub fn extract_dsl(completion: &str) -> Option<String> {
    fenced(completion, "\"\"\"", false).or_else(|| fenced(completion, "```", true))
}

fn fenced(text: &str, fence: &str, tagged: bool) -> Option<String> {
    let start = text.find(fence)? + fence.len();
    let rest = &text[start..];
    let rest = if tagged {
        match rest.find('\n') {
            Some(nl)
                if rest[..nl]
                    .trim()
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') =>
            {
                &rest[nl + 1..]
            }
            _ => rest,
        }
    } else {
        rest
    };
    let end = rest.find(fence)?;
    let body = rest[..end].trim();
    (!body.is_empty()).then(|| body.to_string())
}
