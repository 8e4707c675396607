use regex::Regex;
use std::sync::LazyLock;

static STEP_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"#(\d+)").expect("valid pattern"));

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstError {
    #[error("step text references #{index}, which has no bound answer")]
    UnboundReference { index: usize },
}

/// Step indices referenced as `#n` in natural-language step text, in order of
/// appearance, duplicates kept.
pub fn step_refs(text: &str) -> Vec<usize> {
    STEP_REF
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// Replaces each `#n` with `lookup(n)`. References `lookup` cannot resolve
/// fail the whole substitution, keeping partially rewritten text out of
/// prompts.
pub fn substitute_refs(
    text: &str,
    mut lookup: impl FnMut(usize) -> Option<String>,
) -> Result<String, SubstError> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for caps in STEP_REF.captures_iter(text) {
        let whole = caps.get(0).expect("group 0 always present");
        let index: usize = match caps[1].parse() {
            Ok(i) => i,
            // Digit runs longer than usize stay verbatim, like any other text.
            Err(_) => continue,
        };
        let replacement =
            lookup(index).ok_or(SubstError::UnboundReference { index })?;
        out.push_str(&text[last..whole.start()]);
        out.push_str(&replacement);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}
