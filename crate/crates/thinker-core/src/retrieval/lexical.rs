use super::{Document, RetrievalError, RetrievalQuery, Retriever};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

/// Lowercased alphanumeric runs; everything else separates terms.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            terms.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("corpus line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
}

/// In-memory document collection with document frequencies precomputed for
/// scoring.
#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<Document>,
    doc_freq: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_docs(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in docs.iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId { line: i + 1, id: doc.id.clone() });
            }
        }
        let mut doc_freq = HashMap::new();
        for doc in &docs {
            let mut terms: Vec<String> = tokenize(&doc.title);
            terms.extend(tokenize(&doc.body));
            let unique: HashSet<String> = terms.into_iter().collect();
            for term in unique {
                *doc_freq.entry(term).or_insert(0) += 1;
            }
        }
        Ok(Corpus { docs, doc_freq })
    }

    /// Loads a JSON-lines file of `{"id", "title", "text"}` objects. Blank
    /// lines are ignored.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        let mut docs = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line)
                .map_err(|source| CorpusError::Json { line: i + 1, source })?;
            docs.push(doc);
        }
        Self::from_docs(docs)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }
}

/// Term-overlap ranker. Each distinct query term contributes
/// `tf * ln(1 + N / df)` where `tf` counts occurrences in the document with
/// title matches doubled; terms absent from the corpus contribute nothing.
#[derive(Debug, Clone)]
pub struct LexicalRetriever {
    corpus: Corpus,
}

impl LexicalRetriever {
    pub fn new(corpus: Corpus) -> Self {
        LexicalRetriever { corpus }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Relevance of one document to the raw query text.
    pub fn score(&self, query: &str, doc: &Document) -> f64 {
        // Ordered terms: float summation order is fixed, so equal inputs
        // always produce bit-equal scores.
        let query_terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        if query_terms.is_empty() {
            return 0.0;
        }
        let mut title_counts: HashMap<String, usize> = HashMap::new();
        for term in tokenize(&doc.title) {
            *title_counts.entry(term).or_insert(0) += 1;
        }
        let mut body_counts: HashMap<String, usize> = HashMap::new();
        for term in tokenize(&doc.body) {
            *body_counts.entry(term).or_insert(0) += 1;
        }
        let n = self.corpus.len() as f64;
        let mut total = 0.0;
        for term in &query_terms {
            let df = self.corpus.doc_freq(term);
            if df == 0 {
                continue;
            }
            let tf = 2 * title_counts.get(term).copied().unwrap_or(0)
                + body_counts.get(term).copied().unwrap_or(0);
            total += tf as f64 * (1.0 + n / df as f64).ln();
        }
        total
    }
}

impl Retriever for LexicalRetriever {
    fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<Document>, RetrievalError> {
        let mut text = query.query.clone();
        for term in query.spo.keyword_terms() {
            text.push(' ');
            text.push_str(&term);
        }
        let mut scored: Vec<Document> = self
            .corpus
            .docs()
            .iter()
            .map(|doc| {
                let mut doc = doc.clone();
                doc.score = self.score(&text, &doc);
                doc
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then_with(|| a.id.cmp(&b.id))
        });
        scored.truncate(query.top_k);
        Ok(scored)
    }
}
