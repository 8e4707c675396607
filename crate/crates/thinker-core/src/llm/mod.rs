//! Chat-completion gateway: a narrow synchronous backend trait, a scripted
//! backend for deterministic tests, and an HTTP client for live services.

mod http;
mod script;
mod types;

pub use http::{HttpBackend, TOKEN_ENV};
pub use script::{ScriptEntry, ScriptError, ScriptedBackend};
pub use types::{
    segment_text, ChatBackend, ChatMessage, Completion, GatewayError, GenParams, Role, TokenProb,
};

use std::sync::Arc;

/// Owner of the backend chosen at startup. Evaluation runs need one isolated
/// backend per item; `for_run` answers how to get it for each flavor.
pub enum BackendHandle {
    /// Replayed script; each run gets a fresh fork with all entries unspent.
    Scripted(ScriptedBackend),
    /// Live service; stateless between calls, so runs share it.
    Http(Arc<HttpBackend>),
    /// Caller-managed backend, shared as-is.
    Shared(Arc<dyn ChatBackend>),
}

impl BackendHandle {
    /// Backend instance for one question run.
    pub fn for_run(&self) -> Arc<dyn ChatBackend> {
        match self {
            BackendHandle::Scripted(script) => Arc::new(script.fork()),
            BackendHandle::Http(http) => http.clone(),
            BackendHandle::Shared(backend) => backend.clone(),
        }
    }
}

impl std::fmt::Debug for BackendHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendHandle::Scripted(_) => f.write_str("BackendHandle::Scripted"),
            BackendHandle::Http(_) => f.write_str("BackendHandle::Http"),
            BackendHandle::Shared(_) => f.write_str("BackendHandle::Shared"),
        }
    }
}
