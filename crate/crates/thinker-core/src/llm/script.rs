use super::types::{
    segment_text, ChatBackend, ChatMessage, Completion, GatewayError, GenParams, Role, TokenProb,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Mutex;

/// One canned reply. `match_on` narrows which requests the entry may answer:
/// when set, the entry only fires if the substring occurs in the latest user
/// message; when unset, the entry answers any request that no matching entry
/// claimed first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub match_on: Option<String>,
    pub reply: String,
    pub token_probs: Option<Vec<TokenProb>>,
}

impl ScriptEntry {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptEntry { match_on: None, reply: text.into(), token_probs: None }
    }

    pub fn on(match_on: impl Into<String>, reply: impl Into<String>) -> Self {
        ScriptEntry { match_on: Some(match_on.into()), reply: reply.into(), token_probs: None }
    }

    pub fn with_probs(mut self, probs: Vec<TokenProb>) -> Self {
        self.token_probs = Some(probs);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed script JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("script entry {index}: {message}")]
    Entry { index: usize, message: String },
}

#[derive(Deserialize)]
struct RawEntry {
    #[serde(rename = "match", default)]
    match_on: Option<String>,
    reply: String,
    #[serde(default)]
    token_probs: Option<RawTokenProbs>,
}

/// Probabilities may be written as bare numbers, one per whitespace-attached
/// piece of the reply, or as explicit `[text, prob]` pairs that concatenate
/// to the reply.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawTokenProbs {
    Bare(Vec<f64>),
    Pairs(Vec<(String, f64)>),
}

fn entry_from_raw(index: usize, raw: RawEntry) -> Result<ScriptEntry, ScriptError> {
    let err = |message: String| ScriptError::Entry { index, message };
    let token_probs = match raw.token_probs {
        None => None,
        Some(RawTokenProbs::Bare(probs)) => {
            let pieces = segment_text(&raw.reply);
            if pieces.len() != probs.len() {
                return Err(err(format!(
                    "{} bare probabilities for {} reply pieces",
                    probs.len(),
                    pieces.len()
                )));
            }
            Some(
                pieces
                    .into_iter()
                    .zip(probs)
                    .map(|(text, prob)| TokenProb { text, prob })
                    .collect::<Vec<_>>(),
            )
        }
        Some(RawTokenProbs::Pairs(pairs)) => {
            let concat: String = pairs.iter().map(|(t, _)| t.as_str()).collect();
            if concat != raw.reply {
                return Err(err(
                    "token pair texts do not concatenate to the reply".to_owned(),
                ));
            }
            Some(pairs.into_iter().map(|(text, prob)| TokenProb { text, prob }).collect())
        }
    };
    if let Some(probs) = &token_probs {
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(&p.prob)) {
            return Err(err(format!("probability {} outside [0, 1]", bad.prob)));
        }
    }
    Ok(ScriptEntry { match_on: raw.match_on, reply: raw.reply, token_probs })
}

/// Deterministic backend replaying a fixed list of entries. Each entry is
/// consumed at most once; selection prefers the first unconsumed entry whose
/// `match_on` occurs in the latest user message, then the first unconsumed
/// entry without a matcher.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn from_entries(entries: Vec<ScriptEntry>) -> Self {
        let consumed = Mutex::new(vec![false; entries.len()]);
        ScriptedBackend { entries, consumed }
    }

    /// Parses a JSON array of `{"match"?, "reply", "token_probs"?}` objects.
    pub fn from_json(json: &str) -> Result<Self, ScriptError> {
        let raw: Vec<RawEntry> = serde_json::from_str(json)?;
        let entries = raw
            .into_iter()
            .enumerate()
            .map(|(i, raw)| entry_from_raw(i, raw))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fresh replay of the same script with every entry unspent.
    pub fn fork(&self) -> Self {
        Self::from_entries(self.entries.clone())
    }

    pub fn remaining(&self) -> usize {
        self.consumed.lock().expect("no panics while locked").iter().filter(|c| !**c).count()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenParams,
    ) -> Result<Completion, GatewayError> {
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let mut consumed = self.consumed.lock().expect("no panics while locked");
        let matched = self.entries.iter().enumerate().find(|(i, e)| {
            !consumed[*i]
                && e.match_on.as_deref().is_some_and(|needle| last_user.contains(needle))
        });
        let fallback = || {
            self.entries
                .iter()
                .enumerate()
                .find(|(i, e)| !consumed[*i] && e.match_on.is_none())
        };
        let (index, entry) = matched.or_else(fallback).ok_or(GatewayError::ScriptExhausted)?;
        consumed[index] = true;
        Ok(Completion {
            text: entry.reply.clone(),
            token_probs: if params.logprobs { entry.token_probs.clone() } else { None },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(text: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::user(text)]
    }

    #[test]
    fn matching_entry_wins_over_earlier_unmatched() {
        let backend = ScriptedBackend::from_entries(vec![
            ScriptEntry::reply("generic"),
            ScriptEntry::on("capital of France", "Paris"),
        ]);
        let first = backend.complete(&user("What is the capital of France?"), &GenParams::default());
        assert_eq!(first.unwrap().text, "Paris");
        let second = backend.complete(&user("anything else"), &GenParams::default());
        assert_eq!(second.unwrap().text, "generic");
    }

    #[test]
    fn entries_are_consumed_in_order_and_once() {
        let backend = ScriptedBackend::from_entries(vec![
            ScriptEntry::reply("first"),
            ScriptEntry::reply("second"),
        ]);
        let params = GenParams::default();
        assert_eq!(backend.complete(&user("q"), &params).unwrap().text, "first");
        assert_eq!(backend.complete(&user("q"), &params).unwrap().text, "second");
        assert!(matches!(
            backend.complete(&user("q"), &params),
            Err(GatewayError::ScriptExhausted)
        ));
    }

    #[test]
    fn matching_checks_only_the_latest_user_message() {
        let backend = ScriptedBackend::from_entries(vec![
            ScriptEntry::on("older", "from-older"),
            ScriptEntry::reply("fallback"),
        ]);
        let messages = vec![
            ChatMessage::user("older text"),
            ChatMessage::assistant("reply"),
            ChatMessage::user("newer text"),
        ];
        let got = backend.complete(&messages, &GenParams::default()).unwrap();
        assert_eq!(got.text, "fallback");
    }

    #[test]
    fn fork_replays_from_scratch() {
        let backend = ScriptedBackend::from_entries(vec![ScriptEntry::reply("only")]);
        let params = GenParams::default();
        backend.complete(&user("q"), &params).unwrap();
        assert_eq!(backend.remaining(), 0);
        let fork = backend.fork();
        assert_eq!(fork.remaining(), 1);
        assert_eq!(fork.complete(&user("q"), &params).unwrap().text, "only");
        assert_eq!(backend.remaining(), 0);
    }

    #[test]
    fn bare_probs_pair_with_reply_pieces() {
        let backend = ScriptedBackend::from_json(
            r#"[{"reply": "The answer", "token_probs": [0.5, 0.75]}]"#,
        )
        .unwrap();
        let got = backend
            .complete(&user("q"), &GenParams::default().with_logprobs())
            .unwrap();
        let probs = got.token_probs.unwrap();
        assert_eq!(probs.len(), 2);
        assert_eq!(probs[0], TokenProb { text: "The".into(), prob: 0.5 });
        assert_eq!(probs[1], TokenProb { text: " answer".into(), prob: 0.75 });
    }

    #[test]
    fn probs_withheld_unless_requested() {
        let backend =
            ScriptedBackend::from_json(r#"[{"reply": "hi", "token_probs": [0.9]}]"#).unwrap();
        let got = backend.complete(&user("q"), &GenParams::default()).unwrap();
        assert!(got.token_probs.is_none());
    }

    #[test]
    fn pair_probs_must_concatenate_to_reply() {
        let err = ScriptedBackend::from_json(
            r#"[{"reply": "ab", "token_probs": [["a", 0.9], ["c", 0.8]]}]"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::Entry { index: 0, .. }), "{err}");
    }

    #[test]
    fn bare_prob_count_must_match_piece_count() {
        let err = ScriptedBackend::from_json(
            r#"[{"reply": "one two three", "token_probs": [0.9]}]"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::Entry { index: 0, .. }), "{err}");
    }

    #[test]
    fn probabilities_outside_unit_interval_are_rejected() {
        let err =
            ScriptedBackend::from_json(r#"[{"reply": "x", "token_probs": [1.5]}]"#).unwrap_err();
        assert!(matches!(err, ScriptError::Entry { index: 0, .. }), "{err}");
    }

    #[test]
    fn match_field_deserializes() {
        let backend = ScriptedBackend::from_json(
            r#"[{"match": "needle", "reply": "found"}, {"reply": "other"}]"#,
        )
        .unwrap();
        let got = backend.complete(&user("hay needle stack"), &GenParams::default()).unwrap();
        assert_eq!(got.text, "found");
    }
}
