//! Plan execution: dispatch each sub-problem to the depth-search loop
//! (Retrieval, gated on the knowledge-boundary check), the deduction
//! executor, the deterministic math executor, or output assembly, threading
//! answers through a write-once binding environment and recording every
//! prompt, reply and retrieval in a run trace.

mod env;
mod math;

pub use env::{BindingEnv, EnvError};
pub use math::{
    detect_pattern, deterministic_math, eval_expression, extract_numbers, format_number,
    MathError, MathPattern,
};

use crate::boundary::{self, ConfidenceReport, DEFAULT_TAU};
use crate::llm::{ChatBackend, ChatMessage, Completion, GatewayError, GenParams};
use crate::logical_form::{
    parse_action, substitute_refs, Alias, ContentItem, DeduceOp, LogicalForm, SubstError, TextAtom,
};
use crate::planning::{
    decomposition_preamble, parse_decomposition, render_decomposition, validate_plan, Plan,
    PlanViolation, SubProblem,
};
use crate::prompt::{self, tag_block};
use crate::retrieval::{Document, RetrievalQuery, Retriever, SpoQuery};
use serde::{Deserialize, Serialize};

/// Tunables for a question run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Depth-search turn budget M per Retrieval sub-problem (at least 1).
    pub max_depth: usize,
    /// Documents requested per retrieval call.
    pub top_k: usize,
    /// Likelihood threshold of the knowledge-boundary check.
    pub tau: f64,
    /// Gate Retrieval sub-problems on the knowledge-boundary check.
    pub kbd_enabled: bool,
    /// Generation parameters applied to every LLM call.
    pub gen: GenParams,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_depth: 5,
            top_k: 3,
            tau: DEFAULT_TAU,
            kbd_enabled: true,
            gen: GenParams::default(),
        }
    }
}

/// How a sub-problem's answer was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    /// The knowledge-boundary check passed; answered from internal knowledge.
    Direct,
    /// Depth search emitted the answer at the recorded turn.
    Depth(usize),
    Deduce,
    Math,
    Output,
}

fn is_false(flag: &bool) -> bool {
    !*flag
}

/// One turn of the depth-search loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthTurn {
    /// 1-based turn number.
    pub turn_index: usize,
    pub search_query: String,
    pub retrieved: Vec<Document>,
    pub focus_verdict: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub focus_reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitted_answer: Option<String>,
    /// The answer was forced by the turn budget, not a Yes verdict.
    #[serde(default, skip_serializing_if = "is_false")]
    pub forced: bool,
}

/// A solved sub-problem.
///
/// Invariants: `via == Direct` implies `turns` is empty; `via == Depth(t)`
/// implies `turns.len() == t` and `1 <= t <= max_depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAnswer {
    pub index: usize,
    pub step: String,
    pub action: LogicalForm,
    pub via: Via,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub turns: Vec<DepthTurn>,
    /// Knowledge-boundary report, present when the gate ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbd: Option<ConfidenceReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Chat completions issued, decomposition included.
    pub llm_calls: usize,
    /// Retrieval calls issued.
    pub retrievals: usize,
    /// Retrieval sub-problems answered directly thanks to the gate.
    pub kbd_skips: usize,
}

/// Everything a question run produced, failed runs included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    pub subs: Vec<SubAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    pub counters: Counters,
    /// Full chat transcript behind the run, for export and replay.
    pub conversation: Vec<ChatMessage>,
}

impl RunTrace {
    fn new(question: &str) -> Self {
        RunTrace {
            question: question.to_owned(),
            plan: None,
            subs: Vec::new(),
            final_answer: None,
            counters: Counters::default(),
            conversation: Vec::new(),
        }
    }

    /// Number of Retrieval sub-problems solved (the gate's domain).
    pub fn retrieval_sub_count(&self) -> usize {
        self.subs
            .iter()
            .filter(|sub| matches!(sub.action, LogicalForm::Retrieval { .. }))
            .count()
    }
}

/// A run that aborted, with whatever the trace had captured by then.
#[derive(Debug)]
pub struct RunFailure {
    pub error: SolveError,
    pub trace: RunTrace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        std::error::Error::source(&self.error)
    }
}

fn format_violations(violations: &[PlanViolation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Decompose(#[from] crate::planning::DecomposeError),
    #[error("plan failed validation: {}", format_violations(.violations))]
    PlanInvalid { violations: Vec<PlanViolation> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("sub-problem {index}: {source}")]
    Math { index: usize, source: MathError },
    #[error("sub-problem {index} step references #{reference}, which holds no answer")]
    UnboundStepRef { index: usize, reference: usize },
    #[error("sub-problem {index} references alias `{alias}`, which holds no value")]
    UnboundAlias { index: usize, alias: Alias },
}

fn run_failure(error: SolveError, trace: RunTrace) -> Box<RunFailure> {
    Box::new(RunFailure { error, trace })
}

/// References rendered for focusing and answering prompts: one line per
/// document, numbered from 0.
pub fn format_references(docs: &[Document]) -> String {
    docs.iter()
        .enumerate()
        .map(|(i, doc)| format!("{i}. \"{}\" {}", doc.title, doc.body))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The reference-focusing prompt for a question over the given documents.
pub fn focusing_prompt(question: &str, refs: &[Document]) -> String {
    prompt::fill(
        prompt::REFERENCE_FOCUSING,
        &[("references", &format_references(refs)), ("question", question)],
    )
}

/// Parses a focusing reply: the verdict is the first word of the
/// `<answer>` block (Yes/No, case-insensitive), the reason the `<reason>`
/// block, tolerated missing as empty. `None` when no verdict is present.
pub fn parse_focus_reply(text: &str) -> Option<(bool, String)> {
    let answer = tag_block(text, "answer")?;
    let word: String =
        answer.trim().chars().take_while(char::is_ascii_alphabetic).collect();
    let verdict = if word.eq_ignore_ascii_case("yes") {
        true
    } else if word.eq_ignore_ascii_case("no") {
        false
    } else {
        return None;
    };
    let reason = tag_block(text, "reason").map_or("", str::trim).to_owned();
    Some((verdict, reason))
}

/// A follow-up retrieval directive from a `<search>` block: free text, or a
/// `Step: ... Action: ...` pair whose action refreshes the structured hints.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDirective {
    pub query: String,
    pub spo: Option<SpoQuery>,
}

/// `None` when the text carries no `<search>` block or an empty one.
pub fn parse_search_directive(text: &str) -> Option<SearchDirective> {
    let inner = tag_block(text, "search")?.trim();
    if inner.is_empty() {
        return None;
    }
    if let Some(step_at) = inner.find("Step:") {
        if let Some(action_off) = inner[step_at..].find("Action:") {
            let query = inner[step_at + "Step:".len()..step_at + action_off].trim();
            let action_src = inner[step_at + action_off + "Action:".len()..].trim();
            if !query.is_empty() {
                // A malformed action still leaves a usable text query.
                let spo = parse_action(action_src).ok().map(|a| SpoQuery::from_action(&a));
                return Some(SearchDirective { query: query.to_owned(), spo });
            }
        }
    }
    Some(SearchDirective { query: inner.to_owned(), spo: None })
}

/// Structured hints for the first depth turn: the action's own hints, with
/// back-referenced subject/predicate slots resolved to their bound answers.
fn build_spo_query(action: &LogicalForm, env: &BindingEnv) -> SpoQuery {
    let mut spo = SpoQuery::from_action(action);
    if let LogicalForm::Retrieval { s, p, .. } = action {
        for (slot, hint) in [(s, &mut spo.s), (p, &mut spo.p)] {
            if slot.is_back_reference() {
                if let Some(value) = env.alias(&slot.alias) {
                    *hint = Some(crate::retrieval::SpoEntityQuery {
                        type_name: None,
                        name: Some(value.to_owned()),
                    });
                }
            }
        }
    }
    spo
}

fn resolve_content(
    index: usize,
    content: &[ContentItem],
    env: &BindingEnv,
) -> Result<Vec<String>, SolveError> {
    content
        .iter()
        .map(|item| match item {
            ContentItem::Alias(alias) => env
                .alias(alias)
                .map(str::to_owned)
                .ok_or_else(|| SolveError::UnboundAlias { index, alias: alias.clone() }),
            ContentItem::Literal(atom) => Ok(atom.text.clone()),
        })
        .collect()
}

fn format_content(items: &[String]) -> String {
    items.iter().map(|item| format!("- {item}")).collect::<Vec<_>>().join("\n")
}

fn boxed_or_whole(reply: &str, what: &str, notes: &mut Vec<String>) -> String {
    match boundary::extract_boxed(reply) {
        Some((content, _)) => content,
        None => {
            notes.push(format!("{what} reply carried no boxed span, whole reply adopted"));
            reply.trim().to_owned()
        }
    }
}

struct Ctx<'a> {
    conversation: &'a mut Vec<ChatMessage>,
    counters: &'a mut Counters,
}

/// The engine: a chat backend, a retriever and a config.
#[derive(Debug, Clone)]
pub struct Solver<B, R> {
    backend: B,
    retriever: R,
    config: SolveConfig,
}

impl<B: ChatBackend, R: Retriever> Solver<B, R> {
    pub fn new(backend: B, retriever: R, config: SolveConfig) -> Self {
        Solver { backend, retriever, config }
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    /// One LLM turn: the prompt joins the conversation as a user message,
    /// the whole history goes to the backend, the reply joins as an
    /// assistant message.
    fn ask(
        &self,
        ctx: &mut Ctx<'_>,
        prompt: &str,
        want_probs: bool,
    ) -> Result<Completion, GatewayError> {
        ctx.conversation.push(ChatMessage::user(prompt));
        let mut params = self.config.gen.clone();
        params.logprobs = want_probs;
        let completion = self.backend.complete(ctx.conversation, &params)?;
        ctx.conversation.push(ChatMessage::assistant(completion.text.clone()));
        ctx.counters.llm_calls += 1;
        Ok(completion)
    }

    /// Full pipeline: decompose the question, validate the plan, execute it.
    /// Failures keep the partial trace.
    pub fn run_question(&self, question: &str) -> Result<RunTrace, Box<RunFailure>> {
        let mut trace = RunTrace::new(question);
        trace.conversation.push(ChatMessage::system(decomposition_preamble()));
        let reply = {
            let mut ctx =
                Ctx { conversation: &mut trace.conversation, counters: &mut trace.counters };
            self.ask(&mut ctx, &format!("Question: {question}"), false)
        };
        let reply = match reply {
            Ok(completion) => completion,
            Err(e) => return Err(run_failure(e.into(), trace)),
        };
        let plan = match parse_decomposition(question, &reply.text) {
            Ok(plan) => plan,
            Err(e) => return Err(run_failure(e.into(), trace)),
        };
        let violations = validate_plan(&plan);
        trace.plan = Some(plan.clone());
        if !violations.is_empty() {
            return Err(run_failure(SolveError::PlanInvalid { violations }, trace));
        }
        let mut env = BindingEnv::new();
        match self.execute_subs(&plan, &mut trace, &mut env) {
            Ok(()) => Ok(trace),
            Err(e) => Err(run_failure(e, trace)),
        }
    }

    /// Executes a plan against a caller-provided environment, pre-seeded
    /// bindings honored. No validation runs here, so the caller vouches that
    /// every reference is either plan-internal and backward or pre-seeded.
    /// The conversation is seeded with the planner exchange the plan encodes.
    pub fn execute_plan(
        &self,
        plan: &Plan,
        env: &mut BindingEnv,
    ) -> Result<RunTrace, Box<RunFailure>> {
        let mut trace = RunTrace::new(&plan.question);
        trace.plan = Some(plan.clone());
        trace.conversation.push(ChatMessage::system(decomposition_preamble()));
        trace.conversation.push(ChatMessage::user(format!("Question: {}", plan.question)));
        trace.conversation.push(ChatMessage::assistant(render_decomposition(plan)));
        match self.execute_subs(plan, &mut trace, env) {
            Ok(()) => Ok(trace),
            Err(e) => Err(run_failure(e, trace)),
        }
    }

    fn execute_subs(
        &self,
        plan: &Plan,
        trace: &mut RunTrace,
        env: &mut BindingEnv,
    ) -> Result<(), SolveError> {
        for sub in &plan.subs {
            // Fresh named subject/predicate slots carry their display name as
            // a known value; later steps may reference them.
            if let LogicalForm::Retrieval { s, p, .. } = &sub.action {
                for slot in [s, p] {
                    if let (false, Some(name)) = (slot.is_back_reference(), &slot.display_name) {
                        env.bind_alias_if_absent(&slot.alias, &name.text);
                    }
                }
            }
            let resolved_step = substitute_refs(&sub.step, |k| env.index(k).map(str::to_owned))
                .map_err(|SubstError::UnboundReference { index }| SolveError::UnboundStepRef {
                    index: sub.index,
                    reference: index,
                })?;
            let mut ctx =
                Ctx { conversation: &mut trace.conversation, counters: &mut trace.counters };
            let solved = match &sub.action {
                LogicalForm::Retrieval { .. } => {
                    self.solve_retrieval(sub, &resolved_step, env, &mut ctx)?
                }
                LogicalForm::Deduce { op, content, target, .. } => {
                    self.solve_deduce(sub, *op, content, target, env, &mut ctx)?
                }
                LogicalForm::Math { content, target, .. } => {
                    self.solve_math(sub, content, target, env, &mut ctx)?
                }
                LogicalForm::Output { args } => solve_output(sub, args, env)?,
            };
            if let Some(alias) = sub.action.output_alias() {
                env.bind_alias(alias, solved.answer.clone())?;
            }
            env.bind_index(sub.index, solved.answer.clone())?;
            trace.subs.push(solved);
        }
        trace.final_answer = trace.subs.last().map(|sub| sub.answer.clone());
        Ok(())
    }

    /// Depth search with the knowledge-boundary gate: answer directly when
    /// the gate passes, otherwise loop retrieve / focus / reason for at most
    /// `max_depth` turns, forcing a best-effort answer at the last turn.
    fn solve_retrieval(
        &self,
        sub: &SubProblem,
        resolved_step: &str,
        env: &BindingEnv,
        ctx: &mut Ctx<'_>,
    ) -> Result<SubAnswer, SolveError> {
        let mut notes: Vec<String> = Vec::new();
        let mut kbd = None;
        if self.config.kbd_enabled {
            let report = {
                let mut ask = |prompt: &str, probs: bool| self.ask(ctx, prompt, probs);
                boundary::knowledge_boundary(resolved_step, self.config.tau, &mut ask)?
            };
            if report.final_verdict {
                let answer = report.boxed.clone().unwrap_or_default();
                ctx.counters.kbd_skips += 1;
                return Ok(SubAnswer {
                    index: sub.index,
                    step: sub.step.clone(),
                    action: sub.action.clone(),
                    via: Via::Direct,
                    answer,
                    turns: Vec::new(),
                    kbd: Some(report),
                    notes,
                });
            }
            kbd = Some(report);
        }

        let max_depth = self.config.max_depth.max(1);
        let base_spo = build_spo_query(&sub.action, env);
        let mut query = resolved_step.to_owned();
        let mut spo = base_spo.clone();
        let mut turns: Vec<DepthTurn> = Vec::new();
        // Accumulated distinct references, in first-seen order.
        let mut references: Vec<Document> = Vec::new();

        for turn_index in 1..=max_depth {
            let retrieved = self.retriever.retrieve(&RetrievalQuery {
                query: query.clone(),
                spo: spo.clone(),
                top_k: self.config.top_k,
            })?;
            ctx.counters.retrievals += 1;
            for doc in &retrieved {
                if references.iter().all(|seen| seen.id != doc.id) {
                    references.push(doc.clone());
                }
            }

            let focus_reply = self.ask(ctx, &focusing_prompt(resolved_step, &references), false)?;
            let (focus_verdict, focus_reason) = match parse_focus_reply(&focus_reply.text) {
                Some(parsed) => parsed,
                None => {
                    notes.push(format!("turn {turn_index}: focus reply unparsable, treated as No"));
                    (false, String::new())
                }
            };
            let mut turn = DepthTurn {
                turn_index,
                search_query: query.clone(),
                retrieved,
                focus_verdict,
                focus_reason,
                emitted_answer: None,
                forced: false,
            };

            if focus_verdict || turn_index == max_depth {
                let answer =
                    self.answer_from_references(ctx, resolved_step, &references, &mut notes)?;
                turn.forced = !focus_verdict;
                turn.emitted_answer = Some(answer.clone());
                turns.push(turn);
                return Ok(SubAnswer {
                    index: sub.index,
                    step: sub.step.clone(),
                    action: sub.action.clone(),
                    via: Via::Depth(turn_index),
                    answer,
                    turns,
                    kbd,
                    notes,
                });
            }

            // Next query: a directive embedded in the focus reply, failing
            // that one asked for explicitly, failing that the step text.
            let mut directive = parse_search_directive(&focus_reply.text);
            if directive.is_none() {
                let next_reply = self.ask(
                    ctx,
                    &prompt::fill(prompt::NEXT_SEARCH, &[("question", resolved_step)]),
                    false,
                )?;
                directive = parse_search_directive(&next_reply.text);
            }
            match directive {
                Some(found) => {
                    query = found.query;
                    spo = found.spo.unwrap_or_default();
                }
                None => {
                    notes.push(format!(
                        "turn {turn_index}: no usable search directive, reusing the step text"
                    ));
                    query = resolved_step.to_owned();
                    spo = base_spo.clone();
                }
            }
            turns.push(turn);
        }
        unreachable!("the final turn always returns");
    }

    fn answer_from_references(
        &self,
        ctx: &mut Ctx<'_>,
        question: &str,
        references: &[Document],
        notes: &mut Vec<String>,
    ) -> Result<String, GatewayError> {
        let reply = self.ask(
            ctx,
            &prompt::fill(
                prompt::REFERENCE_ANSWER,
                &[("references", &format_references(references)), ("question", question)],
            ),
            false,
        )?;
        Ok(boxed_or_whole(&reply.text, "reference answer", notes))
    }

    fn solve_deduce(
        &self,
        sub: &SubProblem,
        op: DeduceOp,
        content: &[ContentItem],
        target: &TextAtom,
        env: &BindingEnv,
        ctx: &mut Ctx<'_>,
    ) -> Result<SubAnswer, SolveError> {
        let items = resolve_content(sub.index, content, env)?;
        let reply = self.ask(
            ctx,
            &prompt::fill(
                prompt::DEDUCE_TASK,
                &[
                    ("op", op.name()),
                    ("content", &format_content(&items)),
                    ("target", &target.text),
                ],
            ),
            false,
        )?;
        let mut notes = Vec::new();
        let answer = boxed_or_whole(&reply.text, "deduce", &mut notes);
        Ok(SubAnswer {
            index: sub.index,
            step: sub.step.clone(),
            action: sub.action.clone(),
            via: Via::Deduce,
            answer,
            turns: Vec::new(),
            kbd: None,
            notes,
        })
    }

    /// Deterministic evaluation when the target matches a known pattern,
    /// otherwise one LLM call for an arithmetic expression, evaluated
    /// exactly either way.
    fn solve_math(
        &self,
        sub: &SubProblem,
        content: &[ContentItem],
        target: &TextAtom,
        env: &BindingEnv,
        ctx: &mut Ctx<'_>,
    ) -> Result<SubAnswer, SolveError> {
        let items = resolve_content(sub.index, content, env)?;
        let mut numbers: Vec<String> =
            items.iter().flat_map(|item| extract_numbers(item)).collect();
        if numbers.is_empty() {
            numbers = extract_numbers(&target.text);
        }
        let mut notes = Vec::new();
        let value = match deterministic_math(&numbers, &target.text) {
            Some(result) => result.map_err(|source| SolveError::Math { index: sub.index, source })?,
            None => {
                let reply = self.ask(
                    ctx,
                    &prompt::fill(
                        prompt::MATH_EXPRESSION,
                        &[("content", &format_content(&items)), ("target", &target.text)],
                    ),
                    false,
                )?;
                let expr = boxed_or_whole(&reply.text, "expression", &mut notes);
                eval_expression(&expr).map_err(|source| SolveError::Math {
                    index: sub.index,
                    source: match source {
                        MathError::DivisionByZero => MathError::DivisionByZero,
                        // An unparsable generated expression means the task
                        // has no usable arithmetic form.
                        _ => MathError::ExpressionInvalid,
                    },
                })?
            }
        };
        Ok(SubAnswer {
            index: sub.index,
            step: sub.step.clone(),
            action: sub.action.clone(),
            via: Via::Math,
            answer: format_number(&value),
            turns: Vec::new(),
            kbd: None,
            notes,
        })
    }
}

fn solve_output(
    sub: &SubProblem,
    args: &[Alias],
    env: &BindingEnv,
) -> Result<SubAnswer, SolveError> {
    let values = args
        .iter()
        .map(|alias| {
            env.alias(alias)
                .ok_or_else(|| SolveError::UnboundAlias { index: sub.index, alias: alias.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubAnswer {
        index: sub.index,
        step: sub.step.clone(),
        action: sub.action.clone(),
        via: Via::Output,
        answer: values.join("; "),
        turns: Vec::new(),
        kbd: None,
        notes: Vec::new(),
    })
}
