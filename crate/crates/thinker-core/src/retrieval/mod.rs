//! Document retrieval: a backend-agnostic query shape, a deterministic
//! lexical scorer over an in-memory corpus, and an HTTP client for external
//! search services.

mod http;
mod lexical;

pub use http::HttpRetriever;
pub use lexical::{tokenize, Corpus, CorpusError, LexicalRetriever};

use crate::logical_form::LogicalForm;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
    #[serde(default)]
    pub score: f64,
}

/// Typed entity slot forwarded to structure-aware retrievers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SpoEntityQuery {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoConstraintQuery {
    pub target: String,
    pub prop: String,
    pub value: String,
}

/// Subject/predicate/object hints extracted from a retrieval action. Aliases
/// are dropped; only human-readable names, types and constraints survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SpoQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<SpoEntityQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<SpoEntityQuery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub o: Option<SpoEntityQuery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<SpoConstraintQuery>,
}

impl SpoQuery {
    /// Structured hints from a retrieval action, with back-reference display
    /// names already substituted by the caller where known. Non-retrieval
    /// actions carry no hints.
    pub fn from_action(action: &LogicalForm) -> Self {
        let LogicalForm::Retrieval { s, p, o, constraints } = action else {
            return SpoQuery::default();
        };
        let entity = |e: &crate::logical_form::EntityRef| {
            let q = SpoEntityQuery {
                type_name: e.type_name.clone(),
                name: e.display_name.as_ref().map(|n| n.text.clone()),
            };
            (q.type_name.is_some() || q.name.is_some()).then_some(q)
        };
        SpoQuery {
            s: entity(s),
            p: entity(p),
            o: entity(o),
            constraints: constraints
                .iter()
                .map(|c| SpoConstraintQuery {
                    target: c.target.symbol().to_string(),
                    prop: c.prop.clone(),
                    value: c.value.text.clone(),
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_none() && self.p.is_none() && self.o.is_none() && self.constraints.is_empty()
    }

    /// Flat text form of every hint, for retrievers that only accept strings.
    pub fn keyword_terms(&self) -> Vec<String> {
        let mut terms = Vec::new();
        for entity in [&self.s, &self.p, &self.o].into_iter().flatten() {
            terms.extend(entity.type_name.clone());
            terms.extend(entity.name.clone());
        }
        for c in &self.constraints {
            terms.push(c.prop.clone());
            terms.push(c.value.clone());
        }
        terms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub query: String,
    #[serde(default, skip_serializing_if = "SpoQuery::is_empty")]
    pub spo: SpoQuery,
    pub top_k: usize,
}

impl RetrievalQuery {
    pub fn text(query: impl Into<String>, top_k: usize) -> Self {
        RetrievalQuery { query: query.into(), spo: SpoQuery::default(), top_k }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("retrieval backend unavailable: {0}")]
    Unavailable(String),
    #[error("retrieval protocol error: {0}")]
    Protocol(String),
}

pub trait Retriever: Send + Sync {
    /// Top documents for the query, best first, at most `top_k`.
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<Document>, RetrievalError>;
}

impl<T: Retriever + ?Sized> Retriever for std::sync::Arc<T> {
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<Document>, RetrievalError> {
        (**self).retrieve(query)
    }
}
