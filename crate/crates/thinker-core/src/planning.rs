//! Breadth decomposition: build the planner prompt, parse the planner's
//! reply into an ordered list of Step/Action sub-problems, validate the
//! dependency structure, and expose it as a DAG.

use crate::logical_form::{parse_action, step_refs, Alias, EntityRef, LogicalForm, ParseError};
use crate::prompt::{self, tag_block};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

/// One atomic sub-problem in dual representation: `step` phrases it in
/// natural language (earlier results appear as `#k`), `action` phrases it as
/// a logical form (earlier results appear as aliases).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubProblem {
    /// 1-based position in the plan.
    pub index: usize,
    pub step: String,
    pub action: LogicalForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub question: String,
    /// Planner's free-form reasoning; empty when the reply carried none.
    #[serde(default)]
    pub think: String,
    pub subs: Vec<SubProblem>,
}

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error("reply carries no <answer>...</answer> block")]
    MissingAnswerBlock,
    #[error("expected Step{index}/Action{index} next; step and action numbering must be paired and contiguous")]
    StepActionMismatch { index: usize },
    #[error("Action{index} `{line}`: {source}")]
    Action { index: usize, line: String, source: ParseError },
}

/// Planner instructions without the question line, usable as a conversation's
/// system message.
pub fn decomposition_preamble() -> &'static str {
    prompt::DECOMPOSITION_PREAMBLE.trim_end_matches('\n')
}

/// Full single-string prompt: the function catalog and Step/Action
/// instructions, then the question.
pub fn build_decomposition_prompt(question: &str) -> String {
    format!("{}\nQuestion: {question}", decomposition_preamble())
}

static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(Step|Action)\s*(\d+)\s*:").expect("valid pattern"));

/// Parses a planner reply of the form
/// `<think>...</think> <answer>Step1: ... Action1: ... Step2: ...</answer>`.
/// Step and action markers must alternate with matching contiguous numbers.
pub fn parse_decomposition(question: &str, response: &str) -> Result<Plan, DecomposeError> {
    let think = tag_block(response, "think").unwrap_or("").trim().to_owned();
    let answer = tag_block(response, "answer").ok_or(DecomposeError::MissingAnswerBlock)?;

    struct Marker<'a> {
        is_step: bool,
        number: usize,
        content: &'a str,
    }
    let mut markers: Vec<Marker<'_>> = Vec::new();
    let positions: Vec<(usize, usize, bool, usize)> = MARKER
        .captures_iter(answer)
        .filter_map(|caps| {
            let whole = caps.get(0).expect("group 0 always present");
            let number: usize = caps[2].parse().ok()?;
            Some((whole.start(), whole.end(), &caps[1] == "Step", number))
        })
        .collect();
    for (i, &(_, content_start, is_step, number)) in positions.iter().enumerate() {
        let content_end = positions.get(i + 1).map_or(answer.len(), |next| next.0);
        markers.push(Marker { is_step, number, content: answer[content_start..content_end].trim() });
    }

    let mut subs = Vec::new();
    let mut iter = markers.into_iter();
    loop {
        let index = subs.len() + 1;
        let Some(step) = iter.next() else { break };
        if !step.is_step || step.number != index {
            return Err(DecomposeError::StepActionMismatch { index });
        }
        let action = iter
            .next()
            .filter(|m| !m.is_step && m.number == index)
            .ok_or(DecomposeError::StepActionMismatch { index })?;
        let form = parse_action(action.content).map_err(|source| DecomposeError::Action {
            index,
            line: action.content.to_owned(),
            source,
        })?;
        subs.push(SubProblem { index, step: step.content.to_owned(), action: form });
    }
    Ok(Plan { question: question.to_owned(), think, subs })
}

/// Inverse of `parse_decomposition` up to whitespace: a reply string whose
/// re-parse yields an equal plan.
pub fn render_decomposition(plan: &Plan) -> String {
    let mut out = String::new();
    if !plan.think.is_empty() {
        out.push_str("<think>");
        out.push_str(&plan.think);
        out.push_str("</think>\n\n");
    }
    out.push_str("<answer>");
    for (i, sub) in plan.subs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("Step{}: {}\nAction{}: {}", sub.index, sub.step, sub.index, sub.action));
    }
    out.push_str("</answer>");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanViolation {
    #[error("sub-problem {index} references #{reference}, which is not answered by an earlier sub-problem")]
    ForwardRef { index: usize, reference: usize },
    #[error("sub-problem {index} references alias `{alias}`, which no earlier sub-problem defines")]
    UndefinedAlias { index: usize, alias: Alias },
    #[error("sub-problem {index} redefines alias `{alias}`")]
    DuplicateAlias { index: usize, alias: Alias },
    #[error("sub-problem at position {position} carries index {found}; expected {position}")]
    NonContiguousIndex { position: usize, found: usize },
    #[error("plan has no sub-problems")]
    EmptyPlan,
    #[error("sub-problem {index} is an Output form but not the last sub-problem")]
    OutputNotLast { index: usize },
}

/// Aliases a sub-problem's action makes available to later sub-problems: the
/// output alias, plus fresh s/p entities that carry a display name (the
/// runtime binds their name text). Typed or bare s/p aliases without a name
/// bind nothing and are inert.
pub fn defined_aliases(action: &LogicalForm) -> Vec<&Alias> {
    let fresh_named = |e: &EntityRef| !e.is_back_reference() && e.display_name.is_some();
    match action {
        LogicalForm::Retrieval { s, p, o, .. } => {
            let mut defined: Vec<&Alias> = [s, p]
                .into_iter()
                .filter(|e| fresh_named(e))
                .map(|e| &e.alias)
                .collect();
            defined.push(&o.alias);
            defined
        }
        LogicalForm::Deduce { out, .. } | LogicalForm::Math { out, .. } => vec![out],
        LogicalForm::Output { .. } => Vec::new(),
    }
}

/// Checks every plan invariant, reporting one violation per breach in
/// sub-problem order. An empty result certifies the plan executable: no
/// resolution step can hit an unbound `#k` or alias.
pub fn validate_plan(plan: &Plan) -> Vec<PlanViolation> {
    let mut violations = Vec::new();
    if plan.subs.is_empty() {
        violations.push(PlanViolation::EmptyPlan);
        return violations;
    }
    let mut defined: HashSet<&Alias> = HashSet::new();
    let last = plan.subs.len();
    for (position, sub) in plan.subs.iter().enumerate() {
        let position = position + 1;
        if sub.index != position {
            violations.push(PlanViolation::NonContiguousIndex { position, found: sub.index });
        }
        for reference in step_refs(&sub.step) {
            if reference == 0 || reference >= position {
                violations.push(PlanViolation::ForwardRef { index: position, reference });
            }
        }
        match &sub.action {
            LogicalForm::Retrieval { s, p, .. } => {
                // A bare undefined s/p alias is inert rather than an error:
                // planners emit placeholder aliases in these slots.
                let _ = (s, p);
            }
            LogicalForm::Deduce { content, .. } | LogicalForm::Math { content, .. } => {
                for alias in content.iter().filter_map(crate::logical_form::ContentItem::alias) {
                    if !defined.contains(alias) {
                        violations.push(PlanViolation::UndefinedAlias {
                            index: position,
                            alias: alias.clone(),
                        });
                    }
                }
            }
            LogicalForm::Output { args } => {
                for alias in args {
                    if !defined.contains(alias) {
                        violations.push(PlanViolation::UndefinedAlias {
                            index: position,
                            alias: alias.clone(),
                        });
                    }
                }
                if position != last {
                    violations.push(PlanViolation::OutputNotLast { index: position });
                }
            }
        }
        for alias in defined_aliases(&sub.action) {
            if !defined.insert(alias) {
                violations
                    .push(PlanViolation::DuplicateAlias { index: position, alias: alias.clone() });
            }
        }
    }
    violations
}

/// Dependency edges (i, j) with i < j: sub j's step mentions `#i`, or sub
/// j's action references an alias defined at i. Sorted and deduplicated;
/// acyclic because every edge points forward.
pub fn plan_dag(plan: &Plan) -> Vec<(usize, usize)> {
    let mut def_site: HashMap<&Alias, usize> = HashMap::new();
    for sub in &plan.subs {
        for alias in defined_aliases(&sub.action) {
            def_site.entry(alias).or_insert(sub.index);
        }
    }
    let mut edges = BTreeSet::new();
    for sub in &plan.subs {
        for reference in step_refs(&sub.step) {
            if reference >= 1 && reference < sub.index {
                edges.insert((reference, sub.index));
            }
        }
        for alias in sub.action.referenced_aliases() {
            if let Some(&site) = def_site.get(alias) {
                if site < sub.index {
                    edges.insert((site, sub.index));
                }
            }
        }
    }
    edges.into_iter().collect()
}
