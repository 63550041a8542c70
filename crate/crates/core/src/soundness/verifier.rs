use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{Transformer, TransformerError};
use crate::ops::OperatorKind;

use super::{falsify, Counterexample, FalsifyBudget, SoundnessError};

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error(transparent)]
    Soundness(#[from] SoundnessError),
    #[error("verifier command is empty")]
    EmptyCommand,
    #[error("failed to run verifier: {0}")]
    Io(#[from] std::io::Error),
    #[error("verifier exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("verifier output is not a verdict: {0}")]
    BadOutput(#[from] serde_json::Error),
}

/// Outcome of a soundness check. `sound` from a sampling verifier only means
/// no violation was observed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub sound: bool,
    #[serde(default)]
    pub counterexamples: Vec<Counterexample>,
}

/// Anything that can judge a candidate transformer for one operator.
pub trait Verifier: Send + Sync {
    fn verify(&self, source: &str, op: OperatorKind) -> Result<Verdict, VerifierError>;
}

/// The built-in sampling falsifier.
#[derive(Clone, Debug, Default)]
pub struct SamplingVerifier {
    pub budget: FalsifyBudget,
}

impl Verifier for SamplingVerifier {
    fn verify(&self, source: &str, op: OperatorKind) -> Result<Verdict, VerifierError> {
        let t = Transformer::from_source(source)?;
        let counterexamples = falsify(&t, op, &self.budget)?;
        Ok(Verdict {
            sound: counterexamples.is_empty(),
            counterexamples,
        })
    }
}

/// Runs an external program on the candidate. Arguments may contain the
/// placeholders `{file}`, `{op}` and `{domain}`; the program must print a
/// JSON [`Verdict`] on stdout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalVerifier {
    pub command: Vec<String>,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

struct TempFile(PathBuf);

impl Drop for TempFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl Verifier for ExternalVerifier {
    fn verify(&self, source: &str, op: OperatorKind) -> Result<Verdict, VerifierError> {
        let (program, args) = self.command.split_first().ok_or(VerifierError::EmptyCommand)?;
        let domain = Transformer::from_source(source)
            .map(|t| t.domain.name())
            .unwrap_or("unknown");
        let path = std::env::temp_dir().join(format!(
            "absynth-{}-{}.cf",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&path, source)?;
        let file = TempFile(path);
        let args: Vec<String> = args
            .iter()
            .map(|a| {
                a.replace("{file}", &file.0.to_string_lossy())
                    .replace("{op}", op.name())
                    .replace("{domain}", domain)
            })
            .collect();
        let out = Command::new(program).args(&args).output()?;
        if !out.status.success() {
            return Err(VerifierError::Failed {
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(serde_json::from_slice(&out.stdout)?)
    }
}
