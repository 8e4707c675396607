use super::{Document, RetrievalError, RetrievalQuery, Retriever};

/// Client for an external search service: POST `{base}/retrieve` with the
/// serialized query, answered by a JSON array of documents.
#[derive(Debug)]
pub struct HttpRetriever {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpRetriever {
    pub fn new(base_url: impl Into<String>) -> Result<Self, RetrievalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| RetrievalError::Unavailable(e.to_string()))?;
        let base = base_url.into();
        let endpoint = format!("{}/retrieve", base.trim_end_matches('/'));
        Ok(HttpRetriever { endpoint, client })
    }
}

impl Retriever for HttpRetriever {
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<Document>, RetrievalError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(query)
            .send()
            .map_err(|e| RetrievalError::Unavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(RetrievalError::Protocol(format!(
                "service returned {status}: {}",
                detail.chars().take(200).collect::<String>()
            )));
        }
        let mut docs: Vec<Document> = response
            .json()
            .map_err(|e| RetrievalError::Protocol(format!("undecodable reply: {e}")))?;
        docs.truncate(query.top_k);
        Ok(docs)
    }
}
