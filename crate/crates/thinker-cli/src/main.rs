//! `thinker`: command-line front end for the plan-based deep search engine.
//!
//! Subcommands cover the full loop: `parse` checks logical-form actions,
//! `plan` decomposes a question without executing it, `run` answers a single
//! question, `eval` scores a JSONL dataset, and `export-sft` converts run
//! traces into masked training samples.
//!
//! Exit codes: 0 on success, 1 when the requested operation ran and failed
//! (parse error, invalid plan, run failure), 2 for usage or configuration
//! problems.

mod config;

use clap::{Args, Parser, Subcommand};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use thinker_core::eval::{export_sft, load_dataset, run_eval, write_sft_jsonl, SftSample};
use thinker_core::llm::ChatMessage;
use thinker_core::logical_form::{parse_action, render_action};
use thinker_core::planning::{decomposition_preamble, parse_decomposition, plan_dag, validate_plan};
use thinker_core::solver::{RunTrace, Solver};

use config::{load_config, Config, LlmKind, RetrieverKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration; the operation never started.
    #[error("{0}")]
    Config(String),
    /// The operation ran and failed.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "thinker",
    version,
    about = "Plan-based deep search: decompose questions, solve sub-problems with \
             boundary-gated retrieval, and evaluate the results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a logical-form action and print its canonical rendering
    Parse(ParseArgs),
    /// Decompose a question into a validated plan without executing it
    Plan(PlanArgs),
    /// Answer one question end to end and write the run trace
    Run(RunArgs),
    /// Score a JSONL question dataset and report EM/F1
    Eval(EvalArgs),
    /// Convert run trace files into loss-masked SFT samples
    ExportSft(ExportSftArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Action text, e.g. 'Retrieval(s=s1:film, p=p1:director)'
    action: String,
    /// Also dump the parsed syntax tree
    #[arg(long)]
    ast: bool,
}

/// Flags shared by every command that builds an engine. Values given here
/// override the config file; selector flags also switch the backend kind.
#[derive(Args)]
struct CommonArgs {
    /// JSON config file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Reply script file; selects the scripted LLM backend
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
    /// Chat completion URL; selects the HTTP LLM backend
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Model name for the HTTP LLM backend
    #[arg(long, value_name = "NAME")]
    model: Option<String>,
    /// Document JSONL file; selects the lexical retriever
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Retrieval service URL; selects the HTTP retriever
    #[arg(long, value_name = "URL")]
    search_endpoint: Option<String>,
    /// Depth budget per retrieval sub-problem [default: 5]
    #[arg(long, value_name = "N")]
    max_depth: Option<usize>,
    /// Documents fetched per retrieval call [default: 3]
    #[arg(long, value_name = "N")]
    top_k: Option<usize>,
    /// Confidence threshold for answering without retrieval [default: 0.95]
    #[arg(long, value_name = "P")]
    tau: Option<f64>,
    /// Knowledge-boundary gate [default: on]
    #[arg(long, value_name = "on|off", value_parser = ["on", "off"])]
    kbd: Option<String>,
    /// Directory receiving trace JSON files
    #[arg(long, value_name = "DIR")]
    trace_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Question to decompose
    question: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Question to answer
    question: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset JSONL file: {"id", "question", "golden_answers"} per line
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Concurrent solver threads
    #[arg(long, value_name = "N", default_value_t = 1)]
    workers: usize,
    /// Write loss-masked samples for the successful items to this JSONL file
    #[arg(long, value_name = "FILE")]
    export_sft: Option<PathBuf>,
    /// Report destination; overrides paths.report_path from the config
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExportSftArgs {
    /// Trace JSON files, or directories scanned for *.json
    #[arg(required = true, value_name = "TRACE")]
    inputs: Vec<PathBuf>,
    /// Output JSONL file, one sample per line
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse(args) => cmd_parse(&args),
        Command::Plan(args) => cmd_plan(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::ExportSft(args) => cmd_export_sft(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// Config file overlaid with command-line flags; flags win.
fn merged_config(common: &CommonArgs) -> Result<Config, CliError> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };

    if common.script.is_some() && common.endpoint.is_some() {
        return Err(CliError::Config(
            "--script and --endpoint select different backends; pass one".to_owned(),
        ));
    }
    if let Some(script) = &common.script {
        config.llm.kind = LlmKind::Scripted;
        config.llm.script = Some(script.clone());
    }
    if let Some(endpoint) = &common.endpoint {
        config.llm.kind = LlmKind::Http;
        config.llm.endpoint = Some(endpoint.clone());
    }
    if let Some(model) = &common.model {
        config.llm.model = Some(model.clone());
    }

    if common.corpus.is_some() && common.search_endpoint.is_some() {
        return Err(CliError::Config(
            "--corpus and --search-endpoint select different retrievers; pass one".to_owned(),
        ));
    }
    if let Some(corpus) = &common.corpus {
        config.retriever.kind = RetrieverKind::Lexical;
        config.retriever.corpus = Some(corpus.clone());
    }
    if let Some(endpoint) = &common.search_endpoint {
        config.retriever.kind = RetrieverKind::Http;
        config.retriever.endpoint = Some(endpoint.clone());
    }

    if let Some(max_depth) = common.max_depth {
        config.solve.max_depth = max_depth;
    }
    if let Some(top_k) = common.top_k {
        config.solve.top_k = top_k;
    }
    if let Some(tau) = common.tau {
        config.solve.tau = tau;
    }
    if let Some(kbd) = &common.kbd {
        config.solve.kbd_enabled = kbd == "on";
    }
    if let Some(trace_dir) = &common.trace_dir {
        config.paths.trace_dir = Some(trace_dir.clone());
    }

    if config.solve.max_depth < 1 {
        return Err(CliError::Config("max_depth must be at least 1".to_owned()));
    }
    if config.solve.top_k < 1 {
        return Err(CliError::Config("top_k must be at least 1".to_owned()));
    }
    if !(0.0..=1.0).contains(&config.solve.tau) {
        return Err(CliError::Config("tau must lie in [0, 1]".to_owned()));
    }
    Ok(config)
}

fn cmd_parse(args: &ParseArgs) -> Result<(), CliError> {
    match parse_action(&args.action) {
        Ok(form) => {
            println!("{}", render_action(&form));
            if args.ast {
                println!("{form:#?}");
            }
            Ok(())
        }
        Err(err) => {
            // Caret under the offending character; the offset is in bytes.
            let column = args
                .action
                .get(..err.position())
                .map_or(err.position(), |prefix| prefix.chars().count());
            eprintln!("{}", args.action);
            eprintln!("{}^", " ".repeat(column));
            Err(CliError::Domain(format!("parse failed: {err}")))
        }
    }
}

fn cmd_plan(args: &PlanArgs) -> Result<(), CliError> {
    let question = args.question.trim();
    if question.is_empty() {
        return Err(CliError::Config("the question is empty".to_owned()));
    }
    let config = merged_config(&args.common)?;
    let backend = config.backend()?.for_run();

    let messages = vec![
        ChatMessage::system(decomposition_preamble()),
        ChatMessage::user(format!("Question: {question}")),
    ];
    let completion = backend
        .complete(&messages, &config.solve_config().gen)
        .map_err(|e| CliError::Domain(format!("decomposition request failed: {e}")))?;
    let plan = parse_decomposition(question, &completion.text)
        .map_err(|e| CliError::Domain(format!("decomposition reply is unusable: {e}")))?;

    let violations = validate_plan(&plan);
    if !violations.is_empty() {
        for violation in &violations {
            eprintln!("violation: {violation}");
        }
        return Err(CliError::Domain(format!(
            "plan has {} violation(s)",
            violations.len()
        )));
    }

    for sub in &plan.subs {
        println!("Step {}: {}", sub.index, sub.step);
        println!("Action {}: {}", sub.index, render_action(&sub.action));
    }
    let edges = plan_dag(&plan);
    if edges.is_empty() {
        println!("Dependencies: none");
    } else {
        let rendered: Vec<String> = edges
            .iter()
            .map(|(from, to)| format!("#{from} -> #{to}"))
            .collect();
        println!("Dependencies: {}", rendered.join(", "));
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let question = args.question.trim();
    if question.is_empty() {
        return Err(CliError::Config("the question is empty".to_owned()));
    }
    let config = merged_config(&args.common)?;
    let backend = config.backend()?.for_run();
    let retriever = config.retriever()?;

    let solver = Solver::new(backend, retriever, config.solve_config());
    let stem = format!("run-{:016x}", stable_hash(question));
    match solver.run_question(question) {
        Ok(trace) => {
            println!("{}", trace.final_answer.as_deref().unwrap_or(""));
            report_counters(&trace);
            if let Some(dir) = &config.paths.trace_dir {
                let path = write_trace(dir, &stem, &trace)?;
                eprintln!("trace: {}", path.display());
            }
            Ok(())
        }
        Err(failure) => {
            report_counters(&failure.trace);
            if let Some(dir) = &config.paths.trace_dir {
                let path = write_trace(dir, &stem, &failure.trace)?;
                eprintln!("partial trace: {}", path.display());
            }
            Err(CliError::Domain(format!("run failed: {}", failure.error)))
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let config = merged_config(&args.common)?;
    let backend = config.backend()?;
    let retriever = config.retriever()?;
    let dataset = load_dataset(&args.dataset).map_err(|e| {
        CliError::Config(format!("cannot load dataset {}: {e}", args.dataset.display()))
    })?;

    let eval = run_eval(&dataset, &backend, &retriever, &config.solve_config(), args.workers);
    let report = &eval.report;
    println!(
        "n={} avg_em={} avg_f1={} avg_retrievals={} kbd_skip_rate={}",
        report.n,
        fmt_avg(report.avg_em),
        fmt_avg(report.avg_f1),
        fmt_avg(report.avg_retrievals_per_sample),
        fmt_avg(report.kbd_skip_rate),
    );

    let report_path = args.report.as_ref().or(config.paths.report_path.as_ref());
    match report_path {
        Some(path) => {
            let json = serde_json::to_string_pretty(report).expect("report is plain data");
            std::fs::write(path, json + "\n").map_err(|e| {
                CliError::Domain(format!("cannot write report {}: {e}", path.display()))
            })?;
            eprintln!("report: {}", path.display());
        }
        None => eprintln!("full report discarded; pass --report or set paths.report_path"),
    }

    if let Some(dir) = &config.paths.trace_dir {
        for (item, trace) in report.per_item.iter().zip(&eval.traces) {
            write_trace(dir, &sanitize_stem(&item.id), trace)?;
        }
        eprintln!("traces: {}", dir.display());
    }

    if let Some(path) = &args.export_sft {
        let mut samples: Vec<SftSample> = Vec::new();
        for (item, trace) in report.per_item.iter().zip(&eval.traces) {
            if item.error.is_none() {
                let sample = export_sft(trace).map_err(|e| {
                    CliError::Domain(format!("cannot export item {}: {e}", item.id))
                })?;
                samples.push(sample);
            }
        }
        write_sft_jsonl(path, &samples).map_err(|e| {
            CliError::Domain(format!("cannot write samples {}: {e}", path.display()))
        })?;
        eprintln!("sft samples: {} ({})", path.display(), samples.len());
    }
    Ok(())
}

fn cmd_export_sft(args: &ExportSftArgs) -> Result<(), CliError> {
    let mut files = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            let entries = std::fs::read_dir(input).map_err(|e| {
                CliError::Config(format!("cannot read directory {}: {e}", input.display()))
            })?;
            for entry in entries {
                let path = entry
                    .map_err(|e| {
                        CliError::Config(format!("cannot read directory {}: {e}", input.display()))
                    })?
                    .path();
                if path.extension().is_some_and(|ext| ext == "json") {
                    found.push(path);
                }
            }
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::Config(format!("no such trace: {}", input.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Config("the inputs contain no trace files".to_owned()));
    }

    let mut samples = Vec::new();
    for file in &files {
        let text = std::fs::read_to_string(file).map_err(|e| {
            CliError::Config(format!("cannot read trace {}: {e}", file.display()))
        })?;
        let trace: RunTrace = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("malformed trace {}: {e}", file.display()))
        })?;
        let sample = export_sft(&trace).map_err(|e| {
            CliError::Domain(format!("cannot export {}: {e}", file.display()))
        })?;
        samples.push(sample);
    }
    write_sft_jsonl(&args.out, &samples).map_err(|e| {
        CliError::Domain(format!("cannot write samples {}: {e}", args.out.display()))
    })?;
    println!("wrote {} sample(s) to {}", samples.len(), args.out.display());
    Ok(())
}

fn report_counters(trace: &RunTrace) {
    eprintln!(
        "llm_calls={} retrievals={} kbd_skips={}",
        trace.counters.llm_calls, trace.counters.retrievals, trace.counters.kbd_skips
    );
}

fn write_trace(dir: &Path, stem: &str, trace: &RunTrace) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Domain(format!("cannot create trace dir {}: {e}", dir.display()))
    })?;
    let path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(trace).expect("traces are plain data");
    std::fs::write(&path, json + "\n")
        .map_err(|e| CliError::Domain(format!("cannot write trace {}: {e}", path.display())))?;
    Ok(path)
}

/// Deterministic across processes, unlike a `RandomState` map hash.
fn stable_hash(text: &str) -> u64 {
    let mut hasher = DefaultHasher::new();
    text.hash(&mut hasher);
    hasher.finish()
}

/// Dataset ids become file stems; anything outside [A-Za-z0-9._-] is mapped
/// to '-' so ids cannot escape the trace directory.
fn sanitize_stem(id: &str) -> String {
    let cleaned: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect();
    let trimmed = cleaned.trim_matches('.');
    if trimmed.is_empty() {
        "item".to_owned()
    } else {
        trimmed.to_owned()
    }
}

fn fmt_avg(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "n/a".to_owned(),
    }
}
