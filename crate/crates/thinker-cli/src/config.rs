//! JSON run configuration: backend and retriever selection, solve tunables,
//! and output paths. Command-line flags override file values.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thinker_core::llm::{BackendHandle, HttpBackend, ScriptedBackend};
use thinker_core::retrieval::{Corpus, HttpRetriever, LexicalRetriever, Retriever};
use thinker_core::solver::SolveConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub llm: LlmConfig,
    pub retriever: RetrieverConfig,
    pub solve: SolveConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    /// Deterministic replay from a script file.
    #[default]
    Scripted,
    /// Live chat-completion service.
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub kind: LlmKind,
    /// Reply script path (scripted backend).
    pub script: Option<PathBuf>,
    /// Chat endpoint URL (HTTP backend).
    pub endpoint: Option<String>,
    /// Model name (HTTP backend).
    pub model: Option<String>,
    /// Sampling temperature; folded into the solve generation parameters.
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    /// In-memory lexical scoring over a JSONL corpus.
    #[default]
    Lexical,
    /// External retrieval service.
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrieverConfig {
    pub kind: RetrieverKind,
    /// Corpus JSONL path (lexical retriever).
    pub corpus: Option<PathBuf>,
    /// Retrieval service URL (HTTP retriever).
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Directory receiving one trace JSON per run.
    pub trace_dir: Option<PathBuf>,
    /// Evaluation report destination.
    pub report_path: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

impl Config {
    /// Solve tunables with the LLM temperature folded in.
    pub fn solve_config(&self) -> SolveConfig {
        let mut solve = self.solve.clone();
        if let Some(temperature) = self.llm.temperature {
            solve.gen.temperature = temperature;
        }
        solve
    }

    pub fn backend(&self) -> Result<BackendHandle, CliError> {
        match self.llm.kind {
            LlmKind::Scripted => {
                let path = self.llm.script.as_ref().ok_or_else(|| {
                    CliError::Config("scripted backend needs llm.script (--script)".to_owned())
                })?;
                let script = ScriptedBackend::load(path).map_err(|e| {
                    CliError::Config(format!("cannot load script {}: {e}", path.display()))
                })?;
                Ok(BackendHandle::Scripted(script))
            }
            LlmKind::Http => {
                let endpoint = self.llm.endpoint.clone().ok_or_else(|| {
                    CliError::Config("http backend needs llm.endpoint (--endpoint)".to_owned())
                })?;
                let model = self.llm.model.clone().ok_or_else(|| {
                    CliError::Config("http backend needs llm.model (--model)".to_owned())
                })?;
                let backend = HttpBackend::new(endpoint, model)
                    .map_err(|e| CliError::Config(format!("cannot build http backend: {e}")))?;
                Ok(BackendHandle::Http(Arc::new(backend)))
            }
        }
    }

    pub fn retriever(&self) -> Result<Arc<dyn Retriever>, CliError> {
        match self.retriever.kind {
            RetrieverKind::Lexical => {
                let path = self.retriever.corpus.as_ref().ok_or_else(|| {
                    CliError::Config("lexical retriever needs retriever.corpus (--corpus)".to_owned())
                })?;
                let corpus = Corpus::load_jsonl(path).map_err(|e| {
                    CliError::Config(format!("cannot load corpus {}: {e}", path.display()))
                })?;
                Ok(Arc::new(LexicalRetriever::new(corpus)))
            }
            RetrieverKind::Http => {
                let endpoint = self.retriever.endpoint.clone().ok_or_else(|| {
                    CliError::Config(
                        "http retriever needs retriever.endpoint (--search-endpoint)".to_owned(),
                    )
                })?;
                let retriever = HttpRetriever::new(endpoint)
                    .map_err(|e| CliError::Config(format!("cannot build http retriever: {e}")))?;
                Ok(Arc::new(retriever))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_values() {
        let config = Config::default();
        assert_eq!(config.solve.max_depth, 5);
        assert_eq!(config.solve.top_k, 3);
        assert_eq!(config.solve.tau, 0.95);
        assert!(config.solve.kbd_enabled);
        assert_eq!(config.llm.kind, LlmKind::Scripted);
        assert_eq!(config.retriever.kind, RetrieverKind::Lexical);
    }

    #[test]
    fn partial_files_fill_in_defaults_and_unknown_keys_fail() {
        let config: Config =
            serde_json::from_str(r#"{"solve": {"top_k": 7}, "llm": {"kind": "http"}}"#).unwrap();
        assert_eq!(config.solve.top_k, 7);
        assert_eq!(config.solve.max_depth, 5);
        assert_eq!(config.llm.kind, LlmKind::Http);

        let err = serde_json::from_str::<Config>(r#"{"lmm": {}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn temperature_folds_into_the_solve_config() {
        let config: Config =
            serde_json::from_str(r#"{"llm": {"temperature": 0.7}}"#).unwrap();
        assert_eq!(config.solve_config().gen.temperature, 0.7);
        assert_eq!(Config::default().solve_config().gen.temperature, 0.0);
    }

    #[test]
    fn missing_kind_specific_fields_are_config_errors() {
        let config = Config::default();
        assert!(matches!(config.backend(), Err(CliError::Config(_))));
        assert!(matches!(config.retriever(), Err(CliError::Config(_))));
    }
}
