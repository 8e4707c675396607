//! Versioned prompt templates and the placeholder filler shared by the
//! planning, boundary and solver modules.

pub(crate) const DECOMPOSITION_PREAMBLE: &str =
    include_str!("../assets/decomposition_preamble.txt");
pub(crate) const DIRECT_ANSWER: &str = include_str!("../assets/direct_answer.txt");
pub(crate) const ANSWER_ASSESSMENT: &str = include_str!("../assets/answer_assessment.txt");
pub(crate) const REFERENCE_FOCUSING: &str = include_str!("../assets/reference_focusing.txt");
pub(crate) const REFERENCE_ANSWER: &str = include_str!("../assets/reference_answer.txt");
pub(crate) const NEXT_SEARCH: &str = include_str!("../assets/next_search.txt");
pub(crate) const DEDUCE_TASK: &str = include_str!("../assets/deduce_task.txt");
pub(crate) const MATH_EXPRESSION: &str = include_str!("../assets/math_expression.txt");

/// Content of the first `<tag>...</tag>` block, unterminated blocks running
/// to the end of the text.
pub(crate) fn tag_block<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close).map_or(text.len(), |i| start + i);
    Some(&text[start..end])
}

/// Substitutes `{key}` placeholders. `{{` and `}}` escape literal braces;
/// braced text that matches no key stays verbatim, so instruction text like
/// `\boxed{your answer}` needs no escaping. Substituted values are never
/// rescanned. The template's trailing newline, an artifact of storing one
/// template per file, is dropped.
pub(crate) fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let template = template.strip_suffix('\n').unwrap_or(template);
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(c) = rest.chars().next() {
        if let Some(after) = rest.strip_prefix("{{") {
            out.push('{');
            rest = after;
            continue;
        }
        if let Some(after) = rest.strip_prefix("}}") {
            out.push('}');
            rest = after;
            continue;
        }
        if c == '{' {
            if let Some(end) = rest.find('}') {
                let key = &rest[1..end];
                if let Some((_, value)) = pairs.iter().find(|(k, _)| *k == key) {
                    out.push_str(value);
                    rest = &rest[end + 1..];
                    continue;
                }
            }
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}
