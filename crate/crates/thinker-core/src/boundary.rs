//! Knowledge boundary determination. A sub-problem is answerable from the
//! model's internal knowledge only when a direct answer attempt survives two
//! independent gates: the model's own True/False assessment of its answer,
//! and a minimum per-token probability over the boxed answer span of at
//! least τ. Anything less falls through to retrieval.

use crate::llm::{Completion, GatewayError};
use crate::prompt;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Default confidence threshold τ.
pub const DEFAULT_TAU: f64 = 0.95;

/// Phrase the direct-answer prompt instructs the model to reply with when it
/// cannot answer from internal knowledge.
pub const REFUSAL_MARKER: &str = "I can't answer this question";

/// Callback issuing one chat turn: `(prompt, want_token_probs) -> completion`.
/// The caller owns conversation state and transcript recording.
pub type Ask<'a> = dyn FnMut(&str, bool) -> Result<Completion, GatewayError> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ConfidenceError {
    #[error("reply carries no parsable boxed True/False verdict")]
    VerdictUnparsable,
    #[error("completion carries no token probabilities")]
    NoTokenProbs,
    #[error("no token piece overlaps the boxed answer span")]
    BoxedSpanNotAligned,
}

#[derive(Debug, thiserror::Error)]
pub enum BoundaryError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
}

/// Outcome of both confidence gates over one direct answer attempt.
///
/// Invariants: `final_verdict == prompt_verdict && likelihood_verdict`;
/// `likelihood_verdict == (min_token_prob >= threshold)` when
/// `min_token_prob` is present; refusal or a missing boxed answer forces
/// `final_verdict` false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub question: String,
    pub direct_answer: String,
    pub boxed: Option<String>,
    pub refused: bool,
    pub prompt_verdict: bool,
    pub min_token_prob: Option<f64>,
    pub threshold: f64,
    pub likelihood_verdict: bool,
    pub final_verdict: bool,
    /// Human-readable records of coerced verdicts (unparsable replies,
    /// missing probabilities, misaligned spans).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn direct_answer_prompt(question: &str) -> String {
    prompt::fill(prompt::DIRECT_ANSWER, &[("question", question)])
}

pub fn assessment_prompt(question: &str, answer: &str) -> String {
    prompt::fill(prompt::ANSWER_ASSESSMENT, &[("question", question), ("answer", answer)])
}

/// Innermost `\boxed{...}` content and its byte range, searched inside the
/// first `<answer>...</answer>` block when one exists, anywhere otherwise.
/// Braces inside the box may nest; an unbalanced box yields nothing.
pub fn extract_boxed(text: &str) -> Option<(String, Range<usize>)> {
    let scope = match text.find("<answer>") {
        Some(open) => {
            let start = open + "<answer>".len();
            let end = text[start..].find("</answer>").map_or(text.len(), |i| start + i);
            start..end
        }
        None => 0..text.len(),
    };
    boxed_in(text, scope)
}

fn boxed_in(text: &str, scope: Range<usize>) -> Option<(String, Range<usize>)> {
    const MARKER: &str = "\\boxed{";
    let open = text[scope.clone()].find(MARKER)? + scope.start;
    let content_start = open + MARKER.len();
    let mut depth = 1usize;
    let mut end = None;
    for (off, c) in text[content_start..scope.end].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(content_start + off);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end?;
    // Prefer a box nested inside this one.
    if let Some(inner) = boxed_in(text, content_start..end) {
        return Some(inner);
    }
    Some((text[content_start..end].to_owned(), content_start..end))
}

/// Direct answer attempt: the first half of the boundary check.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectAnswer {
    pub completion: Completion,
    pub boxed: Option<String>,
    pub refused: bool,
}

pub fn attempt_direct_answer(
    question: &str,
    ask: &mut Ask<'_>,
) -> Result<DirectAnswer, GatewayError> {
    let completion = ask(&direct_answer_prompt(question), true)?;
    let boxed = extract_boxed(&completion.text).map(|(content, _)| content);
    let refused = boxed.is_none() && completion.text.contains(REFUSAL_MARKER);
    Ok(DirectAnswer { completion, boxed, refused })
}

/// Asks the model to judge its own answer; true iff the boxed verdict equals
/// "True" case-insensitively.
pub fn prompt_confidence(
    question: &str,
    answer: &str,
    ask: &mut Ask<'_>,
) -> Result<bool, BoundaryError> {
    let completion = ask(&assessment_prompt(question, answer), false)?;
    Ok(parse_assessment_verdict(&completion.text)?)
}

pub fn parse_assessment_verdict(text: &str) -> Result<bool, ConfidenceError> {
    let (content, _) = extract_boxed(text).ok_or(ConfidenceError::VerdictUnparsable)?;
    let verdict = content.trim();
    if verdict.eq_ignore_ascii_case("true") {
        Ok(true)
    } else if verdict.eq_ignore_ascii_case("false") {
        Ok(false)
    } else {
        Err(ConfidenceError::VerdictUnparsable)
    }
}

/// Minimum per-token probability C over the answer span and the verdict
/// C ≥ τ. Tokens align with the span by byte-offset overlap against the
/// completion text; `boxed_span` is located via its boxed range when the
/// completion still carries one, by substring search otherwise.
pub fn likelihood_confidence(
    completion: &Completion,
    boxed_span: &str,
    tau: f64,
) -> Result<(f64, bool), ConfidenceError> {
    let probs = match &completion.token_probs {
        Some(probs) if !probs.is_empty() => probs,
        _ => return Err(ConfidenceError::NoTokenProbs),
    };
    let range = match extract_boxed(&completion.text) {
        Some((content, range)) if content == boxed_span => range,
        _ => {
            let start = completion
                .text
                .find(boxed_span)
                .ok_or(ConfidenceError::BoxedSpanNotAligned)?;
            start..start + boxed_span.len()
        }
    };
    let mut offset = 0usize;
    let mut min: Option<f64> = None;
    for token in probs {
        let token_range = offset..offset + token.text.len();
        offset = token_range.end;
        if token_range.start < range.end && range.start < token_range.end {
            min = Some(min.map_or(token.prob, |m: f64| m.min(token.prob)));
        }
    }
    let c = min.ok_or(ConfidenceError::BoxedSpanNotAligned)?;
    Ok((c, c >= tau))
}

/// Generate first, then assess: attempt a direct answer, gate it with the
/// prompt-based and likelihood-based checks, and AND the verdicts. Gateway
/// failures propagate; confidence failures coerce their verdict to false and
/// are recorded in the report's notes.
pub fn knowledge_boundary(
    question: &str,
    tau: f64,
    ask: &mut Ask<'_>,
) -> Result<ConfidenceReport, GatewayError> {
    let direct = attempt_direct_answer(question, ask)?;
    let mut report = ConfidenceReport {
        question: question.to_owned(),
        direct_answer: direct.completion.text.clone(),
        boxed: direct.boxed.clone(),
        refused: direct.refused,
        prompt_verdict: false,
        min_token_prob: None,
        threshold: tau,
        likelihood_verdict: false,
        final_verdict: false,
        notes: Vec::new(),
    };
    let Some(answer) = direct.boxed else {
        report.notes.push(if direct.refused {
            "model declined to answer from internal knowledge".to_owned()
        } else {
            "direct reply carries no boxed answer".to_owned()
        });
        return Ok(report);
    };
    match likelihood_confidence(&direct.completion, &answer, tau) {
        Ok((c, verdict)) => {
            report.min_token_prob = Some(c);
            report.likelihood_verdict = verdict;
        }
        Err(e) => report.notes.push(format!("likelihood check skipped: {e}")),
    }
    let assessment = ask(&assessment_prompt(question, &answer), false)?;
    match parse_assessment_verdict(&assessment.text) {
        Ok(verdict) => report.prompt_verdict = verdict,
        Err(e) => report.notes.push(format!("assessment check failed: {e}")),
    }
    report.final_verdict = report.prompt_verdict && report.likelihood_verdict;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::TokenProb;
    use std::collections::VecDeque;

    fn probs(pairs: &[(&str, f64)]) -> Vec<TokenProb> {
        pairs.iter().map(|(t, p)| TokenProb { text: (*t).into(), prob: *p }).collect()
    }

    fn scripted(replies: Vec<Completion>) -> impl FnMut(&str, bool) -> Result<Completion, GatewayError> {
        let mut queue: VecDeque<Completion> = replies.into();
        move |_, _| queue.pop_front().ok_or(GatewayError::ScriptExhausted)
    }

    #[test]
    fn boxed_inside_answer_tags() {
        let (content, range) =
            extract_boxed("<answer>\\boxed{Herman Melville}</answer>").unwrap();
        assert_eq!(content, "Herman Melville");
        assert_eq!(&"<answer>\\boxed{Herman Melville}</answer>"[range], "Herman Melville");
    }

    #[test]
    fn boxed_without_tags_falls_back_to_whole_text() {
        let (content, _) = extract_boxed("The result is \\boxed{42}.").unwrap();
        assert_eq!(content, "42");
    }

    #[test]
    fn nested_braces_stay_balanced() {
        let (content, _) = extract_boxed("\\boxed{a{b}c}").unwrap();
        assert_eq!(content, "a{b}c");
    }

    #[test]
    fn innermost_box_wins() {
        let (content, _) = extract_boxed("\\boxed{outer \\boxed{inner}}").unwrap();
        assert_eq!(content, "inner");
    }

    #[test]
    fn unbalanced_or_absent_box_yields_nothing() {
        assert!(extract_boxed("\\boxed{never closed").is_none());
        assert!(extract_boxed("no box at all").is_none());
        // A box outside the answer tags is out of scope once tags exist.
        assert!(extract_boxed("\\boxed{outside} <answer>plain</answer>").is_none());
    }

    #[test]
    fn assessment_verdict_is_case_insensitive() {
        assert_eq!(parse_assessment_verdict("<answer>\\boxed{True}</answer>"), Ok(true));
        assert_eq!(parse_assessment_verdict("<answer>\\boxed{false}</answer>"), Ok(false));
        assert_eq!(
            parse_assessment_verdict("maybe"),
            Err(ConfidenceError::VerdictUnparsable)
        );
        assert_eq!(
            parse_assessment_verdict("<answer>\\boxed{perhaps}</answer>"),
            Err(ConfidenceError::VerdictUnparsable)
        );
    }

    #[test]
    fn likelihood_is_min_over_boxed_tokens_only() {
        let completion = Completion {
            text: "<answer>\\boxed{Paris is}</answer>".into(),
            token_probs: Some(probs(&[
                ("<answer>", 0.10),
                ("\\boxed{", 0.20),
                ("Paris", 0.99),
                (" is", 0.97),
                ("}</answer>", 0.30),
            ])),
        };
        let (c, verdict) = likelihood_confidence(&completion, "Paris is", 0.95).unwrap();
        assert_eq!(c, 0.97);
        assert!(verdict);
        let (_, verdict) = likelihood_confidence(&completion, "Paris is", 0.98).unwrap();
        assert!(!verdict);
    }

    #[test]
    fn token_straddling_the_span_boundary_counts() {
        let completion = Completion {
            text: "\\boxed{42}".into(),
            token_probs: Some(probs(&[("\\boxed{4", 0.40), ("2}", 0.90)])),
        };
        let (c, _) = likelihood_confidence(&completion, "42", 0.95).unwrap();
        assert_eq!(c, 0.40);
    }

    #[test]
    fn missing_probs_and_unlocatable_span_are_distinct_errors() {
        let bare = Completion::text_only("\\boxed{42}");
        assert_eq!(
            likelihood_confidence(&bare, "42", 0.95),
            Err(ConfidenceError::NoTokenProbs)
        );
        let misaligned = Completion {
            text: "something else".into(),
            token_probs: Some(probs(&[("something else", 0.9)])),
        };
        assert_eq!(
            likelihood_confidence(&misaligned, "42", 0.95),
            Err(ConfidenceError::BoxedSpanNotAligned)
        );
    }

    #[test]
    fn double_true_passes_the_boundary() {
        let direct = Completion {
            text: "<answer>\\boxed{Herman Melville}</answer>".into(),
            token_probs: Some(probs(&[
                ("<answer>\\boxed{", 0.50),
                ("Herman", 0.99),
                (" Melville", 0.97),
                ("}</answer>", 0.60),
            ])),
        };
        let assess = Completion::text_only("<answer>\\boxed{True}</answer>");
        let mut ask = scripted(vec![direct, assess]);
        let report = knowledge_boundary("Who wrote Moby-Dick?", 0.95, &mut ask).unwrap();
        assert_eq!(report.boxed.as_deref(), Some("Herman Melville"));
        assert!(report.prompt_verdict);
        assert_eq!(report.min_token_prob, Some(0.97));
        assert!(report.likelihood_verdict);
        assert!(report.final_verdict);
        assert!(!report.refused);
    }

    #[test]
    fn low_likelihood_blocks_even_with_prompt_true() {
        let direct = Completion {
            text: "<answer>\\boxed{X}</answer>".into(),
            token_probs: Some(probs(&[("<answer>\\boxed{", 0.9), ("X", 0.80), ("}</answer>", 0.9)])),
        };
        let assess = Completion::text_only("<answer>\\boxed{True}</answer>");
        let mut ask = scripted(vec![direct, assess]);
        let report = knowledge_boundary("q", 0.95, &mut ask).unwrap();
        assert!(report.prompt_verdict);
        assert_eq!(report.min_token_prob, Some(0.80));
        assert!(!report.likelihood_verdict);
        assert!(!report.final_verdict);
    }

    #[test]
    fn refusal_short_circuits_without_assessment() {
        let refusal = Completion::text_only(
            "based on my internal knowledge, I can't answer this question, I need to retrieve external knowledge.",
        );
        let mut calls = 0;
        let mut ask = |_: &str, _: bool| {
            calls += 1;
            Ok(refusal.clone())
        };
        let report = knowledge_boundary("q", 0.95, &mut ask).unwrap();
        assert!(report.refused);
        assert!(!report.final_verdict);
        assert!(report.boxed.is_none());
        assert_eq!(calls, 1, "no assessment call after a refusal");
    }

    #[test]
    fn missing_probs_coerce_likelihood_false_with_note() {
        let direct = Completion::text_only("<answer>\\boxed{X}</answer>");
        let assess = Completion::text_only("<answer>\\boxed{True}</answer>");
        let mut ask = scripted(vec![direct, assess]);
        let report = knowledge_boundary("q", 0.95, &mut ask).unwrap();
        assert!(report.prompt_verdict);
        assert!(!report.likelihood_verdict);
        assert!(report.min_token_prob.is_none());
        assert!(!report.final_verdict);
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn unparsable_assessment_coerces_prompt_false_with_note() {
        let direct = Completion {
            text: "<answer>\\boxed{X}</answer>".into(),
            token_probs: Some(probs(&[("<answer>\\boxed{", 0.99), ("X", 0.99), ("}</answer>", 0.99)])),
        };
        let assess = Completion::text_only("hard to say");
        let mut ask = scripted(vec![direct, assess]);
        let report = knowledge_boundary("q", 0.95, &mut ask).unwrap();
        assert!(!report.prompt_verdict);
        assert!(report.likelihood_verdict);
        assert!(!report.final_verdict);
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn gateway_errors_propagate() {
        let mut ask =
            |_: &str, _: bool| Err::<Completion, _>(GatewayError::Unavailable("down".into()));
        assert!(knowledge_boundary("q", 0.95, &mut ask).is_err());
    }

    #[test]
    fn prompts_embed_question_and_answer() {
        let direct = direct_answer_prompt("Who is the author of The Pequod?");
        assert!(direct.starts_with("Can you answer the following question step by step?"));
        assert!(direct.ends_with("Question: Who is the author of The Pequod?"));
        assert!(direct.contains("<answer>\\boxed{your answer}</answer>"));
        let assess = assessment_prompt("Who is the author of The Pequod?", "Herman Melville");
        assert!(assess.contains("Wrap your answer with <answer>\\boxed{answer}</answer>."));
        assert!(assess.ends_with("Answer: Herman Melville"));
    }
}
