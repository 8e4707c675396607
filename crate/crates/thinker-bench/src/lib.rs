//! Seeded fixture builders for the engine benchmarks: synthetic corpora,
//! queries, action strings, answer pairs, and arithmetic expressions.
//! Everything is deterministic per seed so timings compare like with like.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use thinker_core::Document;

const VOCAB: &[&str] = &[
    "archive", "ballad", "basin", "beacon", "bridge", "canal", "capital", "census", "charter",
    "cinema", "colony", "comet", "council", "criterion", "delta", "derby", "director", "dynasty",
    "editor", "empire", "festival", "fortress", "gallery", "glacier", "harbor", "island",
    "journal", "lagoon", "league", "market", "meadow", "monarch", "museum", "northern", "opera",
    "orchard", "parliament", "pioneer", "port", "premiere", "quarry", "railway", "reservoir",
    "river", "saga", "senate", "southern", "stadium", "summit", "theatre", "treaty", "tunnel",
    "valley", "village", "vineyard", "voyage",
];

fn phrase(rng: &mut StdRng, words: usize) -> String {
    (0..words).map(|_| *VOCAB.choose(rng).expect("vocab nonempty")).collect::<Vec<_>>().join(" ")
}

/// A synthetic corpus with unique ids, short titles, and paragraph bodies.
pub fn corpus_documents(count: usize, seed: u64) -> Vec<Document> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let title_words = rng.gen_range(2..=3);
            let body_words = rng.gen_range(12..=40);
            Document {
                id: format!("doc-{i:04}"),
                title: phrase(&mut rng, title_words),
                body: phrase(&mut rng, body_words),
                score: 0.0,
            }
        })
        .collect()
}

/// Free-text queries drawn from the same vocabulary as the corpus so that
/// retrieval scoring exercises real term overlap rather than all-miss paths.
pub fn query_strings(count: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let words = rng.gen_range(2..=6);
            phrase(&mut rng, words)
        })
        .collect()
}

/// Representative action strings covering every operation shape the parser
/// handles: fresh and back-referencing retrievals, constraints, deductions,
/// arithmetic, and a terminal output.
pub fn action_strings() -> Vec<String> {
    [
        "Retrieval(s=s1:film[`Men in Black II'], p=p1:director, o=o1:person)",
        "Retrieval(s=s2:film[`Men in Black II'], p=p2:release year, o=o2:year, o.Year=2002)",
        "Retrieval(s=o1, p=p3:place of birth, o=o3:city)",
        "Retrieval(s=s4:studio[`Amblin'], p=p4:founded by, o=o4:person)",
        "Deduce(op=extract, content=[o1, o3, `the findings above'], target=`name the director born there')->d1",
        "Deduce(op=judgement, content=[d1, `both clues agree'], target=`is the claim supported')->d2",
        "Deduce(op=entailment, content=[o4], target=`does the studio connect them')->d3",
        "Deduce(op=choice, content=[d2, d3], target=`pick the stronger conclusion')->d4",
        "Math(content=[o2], target=`total of the known figures')->m1",
        "Math(content=[m1, `offset by a decade'], target=`figure the adjusted year')->m2",
        "Output(d4, m2)",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect()
}

/// Prediction/gold pairs with the decorations the metric normalizer strips:
/// articles, case flips, terminal punctuation, and doubled spaces.
pub fn answer_pairs(count: usize, seed: u64) -> Vec<(String, Vec<String>)> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let base_words = rng.gen_range(1..=4);
            let base = phrase(&mut rng, base_words);
            let gold_count = rng.gen_range(1..=3);
            let golds = (0..gold_count).map(|_| decorate(&mut rng, &base)).collect();
            let pred = if rng.gen_bool(0.7) {
                decorate(&mut rng, &base)
            } else {
                let other_words = rng.gen_range(1..=4);
                phrase(&mut rng, other_words)
            };
            (pred, golds)
        })
        .collect()
}

fn decorate(rng: &mut StdRng, base: &str) -> String {
    let mut out = base.to_owned();
    if rng.gen_bool(0.4) {
        out = format!("{} {out}", ["the", "a", "an"].choose(rng).expect("nonempty"));
    }
    if rng.gen_bool(0.3) {
        out.push('.');
    }
    if rng.gen_bool(0.3) {
        out = out.to_uppercase();
    }
    if rng.gen_bool(0.2) {
        out = out.replacen(' ', "  ", 1);
    }
    out
}

/// Fully parenthesized arithmetic over integers and short decimals. Divisors
/// are nonzero integer literals, so every string evaluates cleanly.
pub fn expression_strings(count: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut out = String::new();
            write_expr(&mut rng, 3, &mut out);
            out
        })
        .collect()
}

fn write_expr(rng: &mut StdRng, depth: u32, out: &mut String) {
    if depth == 0 || rng.gen_bool(0.3) {
        if rng.gen_bool(0.25) {
            let whole = rng.gen_range(0..500);
            let frac = rng.gen_range(0..100);
            out.push_str(&format!("{whole}.{frac:02}"));
        } else {
            out.push_str(&rng.gen_range(0..5000).to_string());
        }
        return;
    }
    let op = *['+', '-', '*', '/'].choose(rng).expect("nonempty");
    out.push('(');
    write_expr(rng, depth - 1, out);
    out.push(op);
    if op == '/' {
        out.push_str(&rng.gen_range(1..400).to_string());
    } else {
        write_expr(rng, depth - 1, out);
    }
    out.push(')');
}
