//! The multi-round synthesis loop: generate candidates, validate and repair
//! them, falsify, score unsound ones, and keep the best under a minimum
//! progress rule.

mod prompt;
mod providers;
mod repair;

pub use prompt::{build_prompt, build_repair_prompt, extract_dsl, History};
pub use providers::{CorpusProvider, LlmConfig, LlmProvider, ScriptedProvider};
pub use repair::{NoRepair, RuleRepairer};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DomainTag;
use crate::dsl::{self, Diagnostic};
use crate::interp::Transformer;
use crate::ops::OperatorKind;
use crate::soundness::{counterexample_cost, Aggregation, FalsifyBudget, SamplingVerifier, Verifier};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("transport: {0}")]
    Transport(String),
}

/// Produces raw completions for a prompt. Transport failures are reported
/// as an empty list.
pub trait CandidateProvider {
    fn generate(&mut self, prompt: &str, n: usize) -> Vec<String>;
}

/// Attempts to fix a candidate that failed validation.
pub trait Repairer {
    fn repair(&mut self, source: &str, diagnostics: &[Diagnostic]) -> String;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Minimum cost decrease for a new best candidate.
    pub lambda: f64,
    pub max_rounds: usize,
    pub candidates_per_round: usize,
    pub repair_attempts: usize,
    pub budget: FalsifyBudget,
    pub aggregation: Aggregation,
    pub seed: u64,
    /// Halve `lambda` after this many consecutive rounds without an
    /// accepted improvement. Disabled when `None`.
    pub stall_rounds: Option<usize>,
    /// Counterexamples carried into the next prompt.
    pub history_counterexamples: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            lambda: 1e-4,
            max_rounds: 5,
            candidates_per_round: 4,
            repair_attempts: 2,
            budget: FalsifyBudget::default(),
            aggregation: Aggregation::Max,
            seed: 0,
            stall_rounds: None,
            history_counterexamples: 4,
        }
    }
}

impl SynthesisConfig {
    pub fn check(&self) -> Result<(), SynthError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SynthError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        for (name, v) in [
            ("max_rounds", self.max_rounds),
            ("candidates_per_round", self.candidates_per_round),
            ("repair_attempts", self.repair_attempts),
        ] {
            if v == 0 {
                return Err(SynthError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.stall_rounds == Some(0) {
            return Err(SynthError::Config("stall_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// `score < best − λ`, the strict minimum-progress rule.
pub fn improves(score: f64, best: f64, lambda: f64) -> bool {
    score < best - lambda
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Sound,
    Unsound {
        cost: f64,
    },
    /// Still failing validation after every repair attempt.
    Invalid {
        diagnostics: Vec<Diagnostic>,
    },
    /// Not evaluated: no DSL block, wrong domain, or a verifier failure.
    Discarded {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    /// Extracted source after repairs; empty when nothing was extracted.
    pub source: String,
    pub valid: bool,
    pub verdict: Verdict,
    pub repair_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub candidates: Vec<CandidateLog>,
    /// `None` until some unsound candidate has been scored.
    pub best_cost_so_far: Option<f64>,
    pub accepted_improvement: bool,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub result: bool,
    pub code: String,
    pub logs: Vec<RoundLog>,
    /// Accepted best costs in order, ending with 0 on success.
    pub best_cost_trajectory: Vec<f64>,
}

/// The final-result record printed after the round logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalResult {
    pub result: bool,
    pub code: String,
    pub rounds: usize,
    pub best_cost_trajectory: Vec<f64>,
}

impl SynthesisOutcome {
    pub fn final_result(&self) -> FinalResult {
        FinalResult {
            result: self.result,
            code: self.code.clone(),
            rounds: self.logs.len(),
            best_cost_trajectory: self.best_cost_trajectory.clone(),
        }
    }

    /// One JSON object per round, newline-terminated.
    pub fn ndjson(&self) -> String {
        self.logs
            .iter()
            .map(|l| serde_json::to_string(l).unwrap_or_default() + "\n")
            .collect()
    }

    /// Number of accepted best-cost updates of unsound candidates.
    pub fn accepted_updates(&self) -> usize {
        self.best_cost_trajectory.iter().filter(|c| **c > 0.0).count()
    }

    /// Checks the termination bound for a fixed `lambda`: accepted updates
    /// ≤ ⌈L₀/λ⌉ where L₀ is the first accepted cost.
    pub fn within_termination_bound(&self, lambda: f64) -> bool {
        match self.best_cost_trajectory.first() {
            Some(&l0) if l0 > 0.0 => self.accepted_updates() as f64 <= (l0 / lambda).ceil(),
            _ => true,
        }
    }
}

struct Prepared {
    source: String,
    valid: bool,
    repair_count: usize,
    verdict: Option<Verdict>,
}

fn prepare(
    completion: &str,
    domain: DomainTag,
    repair_attempts: usize,
    repairer: &mut dyn Repairer,
) -> Prepared {
    let Some(mut source) = extract_dsl(completion) else {
        return Prepared {
            source: String::new(),
            valid: false,
            repair_count: 0,
            verdict: Some(Verdict::Discarded {
                reason: "no DSL block in completion".into(),
            }),
        };
    };
    let mut repair_count = 0;
    loop {
        match dsl::check(&source) {
            Ok(prog) => {
                let verdict = match Transformer::from_program(prog) {
                    Ok(t) if t.domain == domain => None,
                    Ok(t) => Some(Verdict::Discarded {
                        reason: format!("candidate targets {}, not {}", t.domain, domain),
                    }),
                    Err(e) => Some(Verdict::Discarded {
                        reason: e.to_string(),
                    }),
                };
                return Prepared {
                    source,
                    valid: true,
                    repair_count,
                    verdict,
                };
            }
            Err(diagnostics) if repair_count >= repair_attempts => {
                return Prepared {
                    source,
                    valid: false,
                    repair_count,
                    verdict: Some(Verdict::Invalid { diagnostics }),
                };
            }
            Err(diagnostics) => {
                let fixed = repairer.repair(&source, &diagnostics);
                repair_count += 1;
                if fixed == source {
                    // No repairer progress; further attempts would repeat.
                    return Prepared {
                        source,
                        valid: false,
                        repair_count,
                        verdict: Some(Verdict::Invalid { diagnostics }),
                    };
                }
                source = fixed;
            }
        }
    }
}

struct Scored {
    verdict: Verdict,
    counterexamples: Vec<crate::soundness::Counterexample>,
}

fn score(source: &str, op: OperatorKind, verifier: &dyn Verifier, agg: Aggregation) -> Scored {
    match verifier.verify(source, op) {
        Ok(v) if v.sound => Scored {
            verdict: Verdict::Sound,
            counterexamples: Vec::new(),
        },
        Ok(v) => Scored {
            verdict: Verdict::Unsound {
                cost: counterexample_cost(&v.counterexamples, agg),
            },
            counterexamples: v.counterexamples,
        },
        Err(e) => Scored {
            verdict: Verdict::Discarded {
                reason: format!("verifier: {e}"),
            },
            counterexamples: Vec::new(),
        },
    }
}

/// Runs the loop with the built-in sampling falsifier.
pub fn run_synthesis(
    cfg: &SynthesisConfig,
    provider: &mut dyn CandidateProvider,
    repairer: &mut dyn Repairer,
    op: OperatorKind,
    domain: DomainTag,
) -> Result<SynthesisOutcome, SynthError> {
    let verifier = SamplingVerifier {
        budget: FalsifyBudget {
            seed: cfg.seed,
            ..cfg.budget.clone()
        },
    };
    run_synthesis_with(cfg, provider, repairer, &verifier, op, domain)
}

/// Runs the loop with an arbitrary verifier.
pub fn run_synthesis_with(
    cfg: &SynthesisConfig,
    provider: &mut dyn CandidateProvider,
    repairer: &mut dyn Repairer,
    verifier: &dyn Verifier,
    op: OperatorKind,
    domain: DomainTag,
) -> Result<SynthesisOutcome, SynthError> {
    cfg.check()?;
    let mut lambda = cfg.lambda;
    let mut best: Option<(f64, String, Vec<crate::soundness::Counterexample>)> = None;
    let mut trajectory = Vec::new();
    let mut logs = Vec::new();
    let mut stalled = 0;
    for round in 1..=cfg.max_rounds {
        let history = best.as_ref().map(|(cost, src, cexs)| History {
            best_source: src.clone(),
            counterexamples: cexs.iter().take(cfg.history_counterexamples).cloned().collect(),
            cost: *cost,
        });
        let prompt = build_prompt(op, domain, history.as_ref());
        let completions = provider.generate(&prompt, cfg.candidates_per_round);
        let prepared: Vec<Prepared> = completions
            .iter()
            .take(cfg.candidates_per_round)
            .map(|c| prepare(c, domain, cfg.repair_attempts, repairer))
            .collect();
        let scored: Vec<Option<Scored>> = prepared
            .par_iter()
            .map(|p| {
                p.verdict
                    .is_none()
                    .then(|| score(&p.source, op, verifier, cfg.aggregation))
            })
            .collect();
        let mut candidates = Vec::new();
        let mut accepted = false;
        for (p, s) in prepared.into_iter().zip(scored) {
            let (verdict, cexs) = match s {
                Some(s) => (s.verdict, s.counterexamples),
                None => (p.verdict.clone().unwrap_or(Verdict::Sound), Vec::new()),
            };
            tracing::info!(round, verdict = ?verdict, "candidate evaluated");
            candidates.push(CandidateLog {
                source: p.source.clone(),
                valid: p.valid,
                verdict: verdict.clone(),
                repair_count: p.repair_count,
            });
            match verdict {
                Verdict::Sound => {
                    trajectory.push(0.0);
                    logs.push(RoundLog {
                        round,
                        candidates,
                        best_cost_so_far: Some(0.0),
                        accepted_improvement: true,
                        lambda,
                    });
                    return Ok(SynthesisOutcome {
                        result: true,
                        code: p.source,
                        logs,
                        best_cost_trajectory: trajectory,
                    });
                }
                Verdict::Unsound { cost } => {
                    let current = best.as_ref().map_or(f64::INFINITY, |b| b.0);
                    if improves(cost, current, lambda) {
                        best = Some((cost, p.source, cexs));
                        trajectory.push(cost);
                        accepted = true;
                    }
                }
                _ => {}
            }
        }
        logs.push(RoundLog {
            round,
            candidates,
            best_cost_so_far: best.as_ref().map(|b| b.0),
            accepted_improvement: accepted,
            lambda,
        });
        if accepted {
            stalled = 0;
        } else {
            stalled += 1;
            if cfg.stall_rounds.is_some_and(|k| stalled >= k) {
                lambda /= 2.0;
                stalled = 0;
            }
        }
    }
    Ok(SynthesisOutcome {
        result: false,
        code: best.map(|b| b.1).unwrap_or_default(),
        logs,
        best_cost_trajectory: trajectory,
    })
}
