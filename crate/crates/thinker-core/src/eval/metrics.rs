use std::collections::HashMap;

/// Standard QA answer normalization: lowercase, drop ASCII punctuation,
/// drop the articles "a", "an", "the" as whole words, collapse whitespace.
/// Idempotent.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String =
        text.to_lowercase().chars().filter(|c| !c.is_ascii_punctuation()).collect();
    lowered
        .split_whitespace()
        .filter(|word| !matches!(*word, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact match under normalization against any gold answer, as 0.0 or 1.0.
pub fn em<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    let normalized = normalize_answer(pred);
    if golds.iter().any(|gold| normalize_answer(gold.as_ref()) == normalized) {
        1.0
    } else {
        0.0
    }
}

/// Token-level F1 on normalized whitespace tokens, maximized over the gold
/// answers. Both sides empty scores 1, exactly one side empty scores 0.
pub fn f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> f64 {
    golds.iter().map(|gold| pair_f1(pred, gold.as_ref())).fold(0.0, f64::max)
}

fn pair_f1(pred: &str, gold: &str) -> f64 {
    let pred_norm = normalize_answer(pred);
    let gold_norm = normalize_answer(gold);
    let pred_tokens: Vec<&str> = pred_norm.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold_norm.split_whitespace().collect();
    match (pred_tokens.is_empty(), gold_tokens.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    // Multiset overlap: each gold token matches at most once.
    let mut budget: HashMap<&str, usize> = HashMap::new();
    for token in &gold_tokens {
        *budget.entry(token).or_default() += 1;
    }
    let mut overlap = 0usize;
    for token in &pred_tokens {
        if let Some(left) = budget.get_mut(token) {
            if *left > 0 {
                *left -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
