//! `absynth` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid usage, 2 file errors, 3 an unsound,
//! invalid or failed outcome.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use absynth::certify::{self, Network, RobustnessQuery, TransformerSet};
use absynth::domain::{AbstractElement, DomainTag, GridSpec, NeuronShape};
use absynth::dsl;
use absynth::interp::Transformer;
use absynth::ops::OperatorKind;
use absynth::soundness::{self, structured_boxes, Aggregation, FalsifyBudget};
use absynth::synth::{
    self, CandidateProvider, CorpusProvider, LlmConfig, LlmProvider, NoRepair, Repairer, RuleRepairer,
    SynthesisConfig,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "absynth",
    version,
    about = "Synthesize and check abstract transformers"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Log filter for stderr, e.g. `info` or `absynth=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the diagnostics of a transformer file.
    Validate { file: PathBuf },
    /// Print the cost report of a transformer over a set of elements.
    Cost {
        file: PathBuf,
        #[arg(long, value_parser = parse_op)]
        op: OperatorKind,
        #[arg(long, value_parser = parse_domain)]
        domain: Option<DomainTag>,
        /// JSON array of abstract elements. Defaults to the structured box
        /// lattice around the operator's breakpoints.
        #[arg(long)]
        elements: Option<PathBuf>,
        /// Grid step used to sample each box.
        #[arg(long, default_value_t = 1.0)]
        grid_step: f64,
        #[arg(long, value_enum, default_value_t = Agg::Max)]
        aggregation: Agg,
    },
    /// Search for counterexamples and print them as JSON.
    Falsify {
        file: PathBuf,
        #[arg(long, value_parser = parse_op)]
        op: OperatorKind,
        #[arg(long, value_parser = parse_domain)]
        domain: Option<DomainTag>,
        /// Number of elements tried.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        max_counterexamples: Option<usize>,
    },
    /// Run the synthesis loop.
    Synthesize {
        #[arg(long, value_parser = parse_op)]
        op: OperatorKind,
        #[arg(long, value_parser = parse_domain, default_value = "deeppoly")]
        domain: DomainTag,
        /// `corpus:DIR` or `llm:URL`.
        #[arg(long)]
        provider: String,
        /// TOML file with synthesis settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        candidates: Option<usize>,
        /// Number of elements the falsifier tries per candidate.
        #[arg(long)]
        budget: Option<usize>,
        /// Model name sent to an `llm:` provider.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum)]
        repair: Option<RepairMode>,
    },
    /// Certify robustness queries and print a CSV table.
    Certify {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_parser = parse_domain, default_value = "deeppoly")]
        domain: DomainTag,
        /// Directory of `*.cf` files overriding the reference transformers.
        #[arg(long)]
        transformers: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Agg {
    Max,
    Mean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RepairMode {
    None,
    Rule,
    Llm,
}

/// Settings file for `synthesize`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    synthesis: SynthesisConfig,
    llm: LlmConfig,
}

fn parse_op(s: &str) -> Result<OperatorKind, String> {
    OperatorKind::from_name(s).map_err(|e| e.to_string())
}

fn parse_domain(s: &str) -> Result<DomainTag, String> {
    DomainTag::from_name(s).ok_or_else(|| format!("unknown domain `{s}`"))
}

enum Failure {
    Usage(String),
    File(String),
    Outcome,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::File(_) => 2,
            Failure::Outcome => 3,
        }
    }
}

type Run = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::File(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::File(format!("{}: {e}", path.display())))
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Loads a transformer, printing diagnostics when it does not validate.
fn load(path: &Path, op: OperatorKind, domain: Option<DomainTag>) -> Result<Transformer, Failure> {
    let src = read(path)?;
    let t = match Transformer::from_source(&src) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Err(Failure::Outcome);
        }
    };
    if let Some(d) = domain.filter(|d| *d != t.domain) {
        return Err(Failure::Usage(format!(
            "{} is a {} transformer, not {d}",
            path.display(),
            t.domain
        )));
    }
    if !t.handles(op) {
        return Err(Failure::Usage(format!(
            "{} has no case for `{op}`",
            path.display()
        )));
    }
    Ok(t)
}

fn default_elements(op: OperatorKind, domain: DomainTag) -> Result<Vec<AbstractElement>, Failure> {
    let n = match op {
        OperatorKind::Add | OperatorKind::Affine => 2,
        _ => 1,
    };
    structured_boxes(op)
        .into_iter()
        .map(|(l, u)| {
            let shapes = (0..n).map(|i| NeuronShape::from_box(domain, l, u, i)).collect();
            AbstractElement::new(domain, shapes).map_err(|e| Failure::Usage(e.to_string()))
        })
        .collect()
}

fn validate(file: &Path) -> Run {
    let src = read(file)?;
    match dsl::check(&src) {
        Ok(_) => {
            emit("ok\n");
            Ok(())
        }
        Err(diags) => {
            for d in diags {
                emit(&format!("{d}\n"));
            }
            Err(Failure::Outcome)
        }
    }
}

fn cost_cmd(
    file: &Path,
    op: OperatorKind,
    domain: Option<DomainTag>,
    elements: Option<&Path>,
    grid_step: f64,
    agg: Agg,
    seed: u64,
) -> Run {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Failure::Usage(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let t = load(file, op, domain)?;
    let elems = match elements {
        Some(p) => read_json(p)?,
        None => default_elements(op, t.domain)?,
    };
    let aggregation = match agg {
        Agg::Max => Aggregation::Max,
        Agg::Mean => Aggregation::Mean,
    };
    let report = soundness::cost(&t, &elems, op, &GridSpec::with_step(grid_step), seed, aggregation)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    emit(&(to_json(&report) + "\n"));
    if report.total > 0.0 {
        Err(Failure::Outcome)
    } else {
        Ok(())
    }
}

fn falsify_cmd(
    file: &Path,
    op: OperatorKind,
    domain: Option<DomainTag>,
    n_elements: Option<usize>,
    max_cex: Option<usize>,
    seed: u64,
) -> Run {
    let t = load(file, op, domain)?;
    let defaults = FalsifyBudget::default();
    let budget = FalsifyBudget {
        n_elements: n_elements.unwrap_or(defaults.n_elements),
        max_counterexamples: max_cex.unwrap_or(defaults.max_counterexamples),
        seed,
        ..defaults
    };
    let cexs = soundness::falsify(&t, op, &budget).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(&(to_json(&cexs) + "\n"));
    if cexs.is_empty() {
        Ok(())
    } else {
        Err(Failure::Outcome)
    }
}

struct SynthArgs {
    op: OperatorKind,
    domain: DomainTag,
    provider: String,
    config: Option<PathBuf>,
    lambda: Option<f64>,
    rounds: Option<usize>,
    candidates: Option<usize>,
    budget: Option<usize>,
    model: Option<String>,
    repair: Option<RepairMode>,
}

fn synthesize(a: SynthArgs, seed: u64) -> Run {
    let file: FileConfig = match &a.config {
        Some(p) => toml::from_str(&read(p)?).map_err(|e| Failure::File(format!("{}: {e}", p.display())))?,
        None => FileConfig::default(),
    };
    let mut cfg = file.synthesis;
    cfg.seed = seed;
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(r) = a.rounds {
        cfg.max_rounds = r;
    }
    if let Some(c) = a.candidates {
        cfg.candidates_per_round = c;
    }
    if let Some(b) = a.budget {
        cfg.budget.n_elements = b;
    }
    cfg.check().map_err(|e| Failure::Usage(e.to_string()))?;

    let (kind, target) = a.provider.split_once(':').ok_or_else(|| {
        Failure::Usage(format!(
            "provider must be corpus:DIR or llm:URL, got `{}`",
            a.provider
        ))
    })?;
    let mut llm = file.llm;
    if let Some(m) = a.model {
        llm.model = m;
    }
    let new_llm = |endpoint: &str| {
        LlmProvider::new(LlmConfig {
            endpoint: endpoint.to_string(),
            ..llm.clone()
        })
        .map_err(|e| Failure::Usage(e.to_string()))
    };
    let (mut provider, default_repair): (Box<dyn CandidateProvider>, RepairMode) = match kind {
        "corpus" => (
            Box::new(CorpusProvider::from_dir(Path::new(target)).map_err(|e| Failure::File(e.to_string()))?),
            RepairMode::Rule,
        ),
        "llm" => (Box::new(new_llm(target)?), RepairMode::Llm),
        other => return Err(Failure::Usage(format!("unknown provider kind `{other}`"))),
    };
    let mut repairer: Box<dyn Repairer> = match a.repair.unwrap_or(default_repair) {
        RepairMode::None => Box::new(NoRepair),
        RepairMode::Rule => Box::new(RuleRepairer),
        RepairMode::Llm if kind == "llm" => Box::new(new_llm(target)?),
        RepairMode::Llm => return Err(Failure::Usage("--repair llm needs an llm: provider".into())),
    };
    let out = synth::run_synthesis(&cfg, provider.as_mut(), repairer.as_mut(), a.op, a.domain)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    emit(&out.ndjson());
    emit(&(serde_json::to_string(&out.final_result()).expect("serializable") + "\n"));
    if out.result {
        Ok(())
    } else {
        Err(Failure::Outcome)
    }
}

fn certify_cmd(net: &Path, queries: &Path, domain: DomainTag, transformers: Option<&Path>) -> Run {
    let network: Network = read_json(net)?;
    let qs: Vec<RobustnessQuery> = read_json(queries)?;
    let set = match transformers {
        Some(dir) => TransformerSet::with_dir(domain, dir).map_err(|e| Failure::File(e.to_string()))?,
        None => TransformerSet::reference(domain),
    };
    let results = certify::certify_all(&network, &qs, &set).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(&certify::to_csv(&qs, &results));
    let precision = certify::precision(&network, &qs, &set).map_err(|e| Failure::Usage(e.to_string()))?;
    tracing::info!(precision, "certified fraction of baseline-correct queries");
    Ok(())
}

fn run(cli: Cli) -> Run {
    let seed = cli.seed;
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Cost {
            file,
            op,
            domain,
            elements,
            grid_step,
            aggregation,
        } => cost_cmd(
            &file,
            op,
            domain,
            elements.as_deref(),
            grid_step,
            aggregation,
            seed,
        ),
        Command::Falsify {
            file,
            op,
            domain,
            budget,
            max_counterexamples,
        } => falsify_cmd(&file, op, domain, budget, max_counterexamples, seed),
        Command::Synthesize {
            op,
            domain,
            provider,
            config,
            lambda,
            rounds,
            candidates,
            budget,
            model,
            repair,
        } => synthesize(
            SynthArgs {
                op,
                domain,
                provider,
                config,
                lambda,
                rounds,
                candidates,
                budget,
                model,
                repair,
            },
            seed,
        ),
        Command::Certify {
            net,
            queries,
            domain,
            transformers,
        } => certify_cmd(&net, &queries, domain, transformers.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into());
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::File(m) => eprintln!("error: {m}"),
                Failure::Outcome => {}
            }
            ExitCode::from(f.code())
        }
    }
}
