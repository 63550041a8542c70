//! Candidate sources: a recorded corpus, an in-memory script, and a
//! chat-completion endpoint.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{build_repair_prompt, extract_dsl};
use super::{CandidateProvider, Repairer, SynthError};
use crate::dsl::Diagnostic;

/// Wraps raw DSL in the quote fence completions are expected to use.
fn as_completion(text: &str) -> String {
    if text.contains("\"\"\"") || text.contains("```") {
        text.to_string()
    } else {
        format!("\"\"\"\n{}\n\"\"\"", text.trim())
    }
}

/// Replays the files of a directory in lexicographic order, `n` per call.
#[derive(Clone, Debug)]
pub struct CorpusProvider {
    queue: VecDeque<String>,
}

impl CorpusProvider {
    pub fn from_dir(dir: &Path) -> Result<Self, SynthError> {
        let read = |e: std::io::Error| SynthError::Corpus(format!("{}: {e}", dir.display()));
        let mut paths = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(read)? {
            let path = entry.map_err(read)?.path();
            if path.is_file() {
                paths.push(path);
            }
        }
        paths.sort();
        let mut queue = VecDeque::with_capacity(paths.len());
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(read)?;
            queue.push_back(as_completion(&text));
        }
        Ok(CorpusProvider { queue })
    }

    pub fn from_sources(sources: impl IntoIterator<Item = String>) -> Self {
        CorpusProvider {
            queue: sources.into_iter().map(|s| as_completion(&s)).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl CandidateProvider for CorpusProvider {
    fn generate(&mut self, _prompt: &str, n: usize) -> Vec<String> {
        let k = n.min(self.queue.len());
        self.queue.drain(..k).collect()
    }
}

/// Returns a fixed list of completions per call and records every prompt.
#[derive(Clone, Debug, Default)]
pub struct ScriptedProvider {
    rounds: VecDeque<Vec<String>>,
    pub prompts: Vec<String>,
}

impl ScriptedProvider {
    pub fn new(rounds: Vec<Vec<String>>) -> Self {
        ScriptedProvider {
            rounds: rounds.into(),
            prompts: Vec::new(),
        }
    }
}

impl CandidateProvider for ScriptedProvider {
    fn generate(&mut self, prompt: &str, n: usize) -> Vec<String> {
        self.prompts.push(prompt.to_string());
        let mut out = self.rounds.pop_front().unwrap_or_default();
        out.truncate(n);
        out
    }
}

/// Endpoint settings for a chat-completion service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: "ABSYNTH_API_KEY".into(),
            temperature: 0.7,
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    n: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Chat-completion client used both for generation and repair.
pub struct LlmProvider {
    cfg: LlmConfig,
    client: reqwest::blocking::Client,
}

impl LlmProvider {
    pub fn new(cfg: LlmConfig) -> Result<Self, SynthError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| SynthError::Transport(e.to_string()))?;
        Ok(LlmProvider { cfg, client })
    }

    fn complete(&self, prompt: &str, n: usize) -> Result<Vec<String>, SynthError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: vec![Message {
                role: "user",
                content: prompt,
            }],
            n,
            temperature: self.cfg.temperature,
        };
        let mut req = self.client.post(&self.cfg.endpoint).json(&body);
        if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| SynthError::Transport(e.to_string()))?;
        let parsed: ChatResponse = resp.json().map_err(|e| SynthError::Transport(e.to_string()))?;
        let mut out: Vec<String> = parsed
            .choices
            .into_iter()
            .filter_map(|c| c.message.content)
            .collect();
        out.truncate(n);
        Ok(out)
    }
}

impl CandidateProvider for LlmProvider {
    fn generate(&mut self, prompt: &str, n: usize) -> Vec<String> {
        self.complete(prompt, n).unwrap_or_else(|e| {
            tracing::warn!(error = %e, "completion request failed");
            Vec::new()
        })
    }
}

impl Repairer for LlmProvider {
    fn repair(&mut self, source: &str, diagnostics: &[Diagnostic]) -> String {
        let prompt = build_repair_prompt(source, diagnostics);
        match self.complete(&prompt, 1) {
            Ok(c) => c
                .first()
                .and_then(|t| extract_dsl(t))
                .unwrap_or_else(|| source.to_string()),
            Err(e) => {
                tracing::warn!(error = %e, "repair request failed");
                source.to_string()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_chunks() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.cf", "a.cf", "e.cf", "b.cf", "d.cf"] {
            std::fs::write(dir.path().join(name), name).unwrap();
        }
        let mut p = CorpusProvider::from_dir(dir.path()).unwrap();
        let r1 = p.generate("", 3);
        assert_eq!(r1.len(), 3);
        assert!(r1[0].contains("a.cf") && r1[2].contains("c.cf"));
        assert_eq!(p.generate("", 3).len(), 2);
        assert!(p.generate("", 3).is_empty());
        assert_eq!(extract_dsl(&r1[1]).as_deref(), Some("b.cf"));
    }

    #[test]
    fn empty_and_missing_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = CorpusProvider::from_dir(dir.path()).unwrap();
        assert!(p.generate("", 4).is_empty());
        assert!(CorpusProvider::from_dir(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn unreachable_endpoint_yields_nothing() {
        let mut p = LlmProvider::new(LlmConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            timeout_secs: 2,
            ..Default::default()
        })
        .unwrap();
        assert!(p.generate("prompt", 4).is_empty());
        assert_eq!(p.repair("src", &[]), "src");
    }

    #[test]
    fn scripted_provider_caps_at_n() {
        let mut p = ScriptedProvider::new(vec![vec!["a".into(), "b".into(), "c".into()]]);
        assert_eq!(p.generate("x", 2).len(), 2);
        assert!(p.generate("y", 2).is_empty());
        assert_eq!(p.prompts, ["x", "y"]);
    }
}
