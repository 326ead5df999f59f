//! Caption evaluation: BLEU-1..4, ROUGE-L, METEOR (exact matching only),
//! CIDEr and embedding-based BERTScore.
//!
//! All n-gram metrics share [`tokenize`]: lowercase, split on whitespace,
//! strip leading and trailing punctuation from each token, keep interior
//! punctuation, drop tokens that end up empty. There is no stemming.

mod bertscore;
mod bleu;
mod cider;
mod meteor;
mod report;
mod rouge;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::EmbedError;

pub use bertscore::{bertscore, token_matrix, BertScore, BertTokens};
pub use bleu::{bleu, bleu_stats, corpus_bleu, BleuScore, BleuStats};
pub use cider::{cider, CiderItem, CiderReport, CIDER_MAX_N};
pub use meteor::{meteor_lite, MeteorParams};
pub use report::{
    evaluate_captions, load_caption_pairs, parse_caption_pairs, render_csv, render_markdown, Metric, MetricReport,
};
pub use rouge::{lcs_len, rouge_l};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("item {0:?}: candidate has no tokens")]
    EmptyCandidate(String),
    #[error("item {0:?}: no references")]
    EmptyReferences(String),
    #[error("no caption pairs to score")]
    EmptyCorpus,
    #[error("empty token embedding matrix")]
    EmptyInput,
    #[error("token embeddings have dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("item {0:?}: {1}")]
    Embedding(String, #[source] EmbedError),
    #[error("caption input line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercased tokens of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '‘' | '’' | '“' | '”' | '«' | '»' | '„' | '‚' | '…' | '–' | '—' | '¡' | '¿' | '·'
        )
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.split_whitespace()
            .map(|w| w.trim_matches(is_punct).to_lowercase())
            .filter(|w| !w.is_empty())
            .collect(),
    )
}

/// Occurrence counts of the `n`-grams of one token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    pub n: usize,
    pub counts: HashMap<Vec<String>, usize>,
}

impl NGramCounts {
    pub fn new(tokens: &[String], n: usize) -> Self {
        assert!(n >= 1, "n-gram order starts at 1");
        let mut counts = HashMap::new();
        if tokens.len() >= n {
            for window in tokens.windows(n) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
        Self { n, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

/// A candidate caption and its human references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPair {
    #[serde(rename = "id")]
    pub item_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

impl CaptionPair {
    pub fn new(item_id: impl Into<String>, candidate: impl Into<String>, references: &[&str]) -> Self {
        Self {
            item_id: item_id.into(),
            candidate: candidate.into(),
            references: references.iter().map(|r| r.to_string()).collect(),
        }
    }

    /// Tokenized candidate and references, rejecting empty candidates and
    /// empty reference lists.
    pub(crate) fn tokens(&self) -> Result<(TokenSequence, Vec<TokenSequence>), MetricError> {
        let candidate = tokenize(&self.candidate);
        if candidate.is_empty() {
            return Err(MetricError::EmptyCandidate(self.item_id.clone()));
        }
        if self.references.is_empty() {
            return Err(MetricError::EmptyReferences(self.item_id.clone()));
        }
        Ok((candidate, self.references.iter().map(|r| tokenize(r)).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).0
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(toks("A cat, sits."), ["a", "cat", "sits"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("well-known 'works'"), ["well-known", "works"]);
        assert_eq!(toks("It's  \"Madonna\" ... (1505)"), ["it's", "madonna", "1505"]);
        assert_eq!(toks("“Quoted” — text…"), ["quoted", "text"]);
    }

    #[test]
    fn ngram_totals() {
        let t = toks("the cat the cat");
        assert_eq!(NGramCounts::new(&t, 1).total(), 4);
        assert_eq!(NGramCounts::new(&t, 2).total(), 3);
        assert_eq!(NGramCounts::new(&t, 2).get(&toks("the cat")), 2);
        assert_eq!(NGramCounts::new(&t, 5).total(), 0);
    }

    #[test]
    fn pair_validation() {
        assert!(matches!(
            CaptionPair::new("x", " ... ", &["a"]).tokens(),
            Err(MetricError::EmptyCandidate(id)) if id == "x"
        ));
        assert!(matches!(
            CaptionPair::new("x", "a", &[]).tokens(),
            Err(MetricError::EmptyReferences(_))
        ));
    }
}
