use crate::llm::Role;
use crate::solver::RunTrace;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One conversation turn of a training sample. `loss` marks the turns the
/// trainer should compute loss over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftTurn {
    pub role: Role,
    pub content: String,
    pub loss: bool,
}

/// A full multi-turn training sample: the system preamble, then alternating
/// user/assistant turns. Loss is on exactly the assistant turns; references
/// and questions live in user turns and are excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSample {
    pub turns: Vec<SftTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SftError {
    #[error("trace conversation is incomplete: {0}")]
    TraceIncomplete(String),
}

/// Converts a run's conversation into a training sample, flagging assistant
/// turns for loss.
pub fn export_sft(trace: &RunTrace) -> Result<SftSample, SftError> {
    if trace.conversation.first().map(|turn| turn.role) != Some(Role::System) {
        return Err(SftError::TraceIncomplete(
            "conversation does not begin with the system preamble".to_owned(),
        ));
    }
    let turns: Vec<SftTurn> = trace
        .conversation
        .iter()
        .map(|message| SftTurn {
            role: message.role,
            content: message.content.clone(),
            loss: message.role == Role::Assistant,
        })
        .collect();
    if !turns.iter().any(|turn| turn.loss) {
        return Err(SftError::TraceIncomplete("no assistant turns to train on".to_owned()));
    }
    Ok(SftSample { turns })
}

/// Writes samples as JSON Lines, one sample per line.
pub fn write_sft_jsonl(path: impl AsRef<Path>, samples: &[SftSample]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for sample in samples {
        let line = serde_json::to_string(sample).expect("samples are plain data");
        writeln!(file, "{line}")?;
    }
    file.flush()
}
