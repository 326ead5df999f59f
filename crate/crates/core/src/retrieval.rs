//! Cross-modal retrieval Recall@K over image and text embeddings, in both
//! directions, on the full gallery or on fixed-size sampled pools.
//!
//! Ranking sorts by descending similarity and breaks ties by ascending
//! gallery index. With several texts per image, an image query succeeds if
//! its best-ranked ground-truth text makes the cut.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{cosine, EmbedError, EmbeddingTable};
use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("no embedding for id {0:?}")]
    MissingEmbedding(String),
    #[error("similarity matrix is {0}x{1}; diagonal ground truth needs a square matrix")]
    NonSquare(usize, usize),
    #[error("pool of {pool} exceeds the {available} retrievable items")]
    PoolTooLarge { pool: usize, available: usize },
    #[error("pool of {pool} is smaller than k = {k}")]
    PoolSmallerThanK { pool: usize, k: usize },
    #[error("invalid retrieval input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Image query, text gallery.
    Im2t,
    /// Text query, image gallery.
    T2im,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Im2t => "im2t",
            Direction::T2im => "t2im",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "im2t" => Ok(Direction::Im2t),
            "t2im" => Ok(Direction::T2im),
            other => Err(format!("unknown direction {other:?} (expected im2t or t2im)")),
        }
    }
}

/// Per-query similarity rows and the ground-truth gallery indices of each.
type Queries = (Vec<Vec<f64>>, Vec<Vec<usize>>);

/// Image-by-text cosine similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Row index of each column's image when texts outnumber images; `None`
    /// means row `i` matches column `i`.
    pub text_owner: Option<Vec<usize>>,
}

impl SimilarityMatrix {
    /// A matrix with diagonal ground truth.
    pub fn from_values(rows: Vec<String>, cols: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, RetrievalError> {
        if values.len() != rows.len() || values.iter().any(|r| r.len() != cols.len()) {
            return Err(RetrievalError::Invalid("values do not match row/column ids".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RetrievalError::Invalid("non-finite similarity".into()));
        }
        Ok(Self {
            rows,
            cols,
            values,
            text_owner: None,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = self.shape();
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            values: (0..c).map(|j| (0..r).map(|i| self.values[i][j]).collect()).collect(),
            text_owner: None,
        }
    }

    /// Query similarities and ground-truth gallery indices, per query, for
    /// one direction.
    fn queries(&self, direction: Direction) -> Result<Queries, RetrievalError> {
        let (r, c) = self.shape();
        match (&self.text_owner, direction) {
            (None, _) if r != c => Err(RetrievalError::NonSquare(r, c)),
            (None, Direction::Im2t) => Ok((self.values.clone(), (0..r).map(|i| vec![i]).collect())),
            (None, Direction::T2im) => Ok((self.transpose().values, (0..r).map(|i| vec![i]).collect())),
            (Some(owner), Direction::Im2t) => {
                let mut truth = vec![Vec::new(); r];
                for (j, &i) in owner.iter().enumerate() {
                    truth[i].push(j);
                }
                Ok((self.values.clone(), truth))
            }
            (Some(owner), Direction::T2im) => Ok((self.transpose().values, owner.iter().map(|&i| vec![i]).collect())),
        }
    }
}

/// Builds the image × text cosine matrix for aligned `(image_id, text_id)`
/// pairs.
///
/// With one text per image, rows and columns follow pair order and the
/// diagonal holds the ground truth. When an image id repeats, rows are the
/// distinct images in first-seen order and each text column remembers its
/// image.
pub fn similarity_matrix(
    images: &EmbeddingTable,
    texts: &EmbeddingTable,
    pairs: &[(String, String)],
) -> Result<SimilarityMatrix, RetrievalError> {
    let mut rows: Vec<String> = Vec::new();
    let mut row_of: HashMap<&str, usize> = HashMap::new();
    let mut cols = Vec::with_capacity(pairs.len());
    let mut owner = Vec::with_capacity(pairs.len());
    for (image, text) in pairs {
        let next = rows.len();
        let i = *row_of.entry(image.as_str()).or_insert_with(|| {
            rows.push(image.clone());
            next
        });
        owner.push(i);
        cols.push(text.clone());
    }
    let text_vecs: Vec<&[f32]> = cols.iter().map(|t| lookup(texts, t)).collect::<Result<_, _>>()?;
    let values = rows
        .iter()
        .map(|id| {
            let image = lookup(images, id)?;
            text_vecs
                .iter()
                .map(|t| cosine(image, t).map_err(RetrievalError::from))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let one_to_one = rows.len() == cols.len();
    Ok(SimilarityMatrix {
        rows,
        cols,
        values,
        text_owner: (!one_to_one).then_some(owner),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub direction: Direction,
    pub ks: Vec<usize>,
    pub recalls: BTreeMap<usize, f64>,
    pub queries: usize,
    pub pool_size: Option<usize>,
    pub trials: Option<usize>,
}

/// 1-based rank of `target` among `candidates` of `scores`, ties broken by
/// ascending index.
fn rank_within(scores: &[f64], target: usize, candidates: impl Iterator<Item = usize>) -> usize {
    let t = scores[target];
    1 + candidates
        .filter(|&j| j != target && (scores[j] > t || (scores[j] == t && j < target)))
        .count()
}

fn best_rank(scores: &[f64], truth: &[usize]) -> usize {
    let all = 0..scores.len();
    truth
        .iter()
        .map(|&g| {
            // other ground-truth items do not push this one down
            rank_within(scores, g, all.clone().filter(|j| !truth.contains(j)))
        })
        .min()
        .unwrap_or(usize::MAX)
}

fn lookup<'t>(table: &'t EmbeddingTable, id: &str) -> Result<&'t [f32], RetrievalError> {
    table
        .get(id)
        .ok_or_else(|| RetrievalError::MissingEmbedding(id.to_string()))
}

fn report(
    direction: Direction,
    ks: &[usize],
    ranks: &[usize],
    pool: Option<usize>,
    trials: Option<usize>,
) -> RecallReport {
    let recalls = ks
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            let recall = if ranks.is_empty() {
                0.0
            } else {
                hits as f64 / ranks.len() as f64
            };
            (k, recall)
        })
        .collect();
    RecallReport {
        direction,
        ks: ks.to_vec(),
        recalls,
        queries: ranks.len() / trials.unwrap_or(1).max(1),
        pool_size: pool,
        trials,
    }
}

fn check_ks(ks: &[usize]) -> Result<(), RetrievalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(RetrievalError::Invalid("ks must be non-empty and positive".into()));
    }
    Ok(())
}

/// Recall@k over the full gallery.
pub fn recall_at_k(m: &SimilarityMatrix, ks: &[usize], direction: Direction) -> Result<RecallReport, RetrievalError> {
    check_ks(ks)?;
    let (scores, truth) = m.queries(direction)?;
    let ranks: Vec<usize> = scores.iter().zip(&truth).map(|(s, t)| best_rank(s, t)).collect();
    Ok(report(direction, ks, &ranks, None, None))
}

/// Recall@k where each query ranks its ground truth against `pool - 1`
/// distractors drawn uniformly without replacement, redrawn per query and
/// per trial, averaged over queries and trials.
///
/// Needs one-to-one ground truth. Deterministic given `seed`.
pub fn pooled_recall(
    m: &SimilarityMatrix,
    pool: usize,
    trials: usize,
    seed: u64,
    ks: &[usize],
    direction: Direction,
) -> Result<RecallReport, RetrievalError> {
    check_ks(ks)?;
    if trials == 0 {
        return Err(RetrievalError::Invalid("trials must be at least 1".into()));
    }
    if m.text_owner.is_some() {
        let (r, c) = m.shape();
        return Err(RetrievalError::NonSquare(r, c));
    }
    let (scores, _) = m.queries(direction)?;
    let n = scores.len();
    if pool == 0 || pool > n {
        return Err(RetrievalError::PoolTooLarge { pool, available: n });
    }
    let max_k = *ks.iter().max().expect("ks non-empty");
    if pool < max_k {
        return Err(RetrievalError::PoolSmallerThanK { pool, k: max_k });
    }

    let mut rng = stream_rng(seed, "pool", direction as u64);
    let mut ranks = Vec::with_capacity(n * trials);
    for _ in 0..trials {
        for (q, row) in scores.iter().enumerate() {
            // indices 0..n-1 over the gallery minus the ground truth
            let drawn = sample(&mut rng, n - 1, pool - 1);
            let distractors = drawn.iter().map(|d| if d >= q { d + 1 } else { d });
            ranks.push(rank_within(row, q, distractors));
        }
    }
    Ok(report(direction, ks, &ranks, Some(pool), Some(trials)))
}
