//! Greedy-matching BERTScore over externally computed token embeddings.
//! No IDF weighting and no baseline rescaling.

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::embedstore::{cosine, EmbedError, EmbeddingTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision averages each candidate token's best reference match, recall
/// each reference token's best candidate match.
pub fn bertscore(candidate: &[Vec<f32>], reference: &[Vec<f32>]) -> Result<BertScore, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let dim = candidate[0].len();
    if let Some(bad) = candidate.iter().chain(reference).find(|v| v.len() != dim) {
        return Err(MetricError::DimensionMismatch(dim, bad.len()));
    }
    let sim: Vec<Vec<f64>> = candidate
        .iter()
        .map(|c| reference.iter().map(|r| cosine(c, r)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| MetricError::Embedding(String::new(), e))?;

    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScore { precision, recall, f1 })
}

/// Rows `{prefix}#0`, `{prefix}#1`, … up to the first missing index.
pub fn token_matrix(table: &EmbeddingTable, prefix: &str) -> Vec<Vec<f32>> {
    (0..)
        .map_while(|k| table.get(&format!("{prefix}#{k}")).map(<[f32]>::to_vec))
        .collect()
}

/// Per-token embeddings for BERTScore, keyed `{item_id}#{token_index}`.
///
/// Reference tokens of an item with several references are keyed
/// `{item_id}/{reference_index}#{token_index}`; the best-F1 reference counts.
#[derive(Debug, Clone)]
pub struct BertTokens {
    pub candidates: EmbeddingTable,
    pub references: EmbeddingTable,
}

impl BertTokens {
    pub fn score(&self, item_id: &str) -> Result<BertScore, MetricError> {
        let missing = |id: String| MetricError::Embedding(item_id.to_string(), EmbedError::MissingEmbedding(id));
        let cand = token_matrix(&self.candidates, item_id);
        if cand.is_empty() {
            return Err(missing(format!("{item_id}#0")));
        }
        let single = token_matrix(&self.references, item_id);
        let refs: Vec<Vec<Vec<f32>>> = if single.is_empty() {
            (0..)
                .map_while(|r| {
                    let m = token_matrix(&self.references, &format!("{item_id}/{r}"));
                    (!m.is_empty()).then_some(m)
                })
                .collect()
        } else {
            vec![single]
        };
        if refs.is_empty() {
            return Err(missing(format!("{item_id}#0")));
        }
        let mut best: Option<BertScore> = None;
        for r in &refs {
            let s = bertscore(&cand, r).map_err(|e| match e {
                MetricError::Embedding(_, inner) => MetricError::Embedding(item_id.to_string(), inner),
                other => other,
            })?;
            if best.is_none_or(|b| s.f1 > b.f1) {
                best = Some(s);
            }
        }
        Ok(best.expect("at least one reference"))
    }
}
