//! CIDEr: cosine similarity of TF-IDF weighted n-gram vectors, averaged over
//! references and over n = 1..4.
//!
//! Document frequency counts the items whose reference set contains an
//! n-gram; IDF is `ln(items / max(1, df))`. This is plain CIDEr: no length
//! penalty, no clipping and no ×10 rescaling, so scores stay in `[0, 1]`.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CaptionPair, MetricError, NGramCounts, TokenSequence};

pub const CIDER_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiderItem {
    pub item_id: String,
    /// CIDEr_n for n = 1..=4.
    pub per_n: [f64; CIDER_MAX_N],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiderReport {
    pub items: Vec<CiderItem>,
    pub mean: f64,
}

type Vector = HashMap<Vec<String>, f64>;

fn tfidf(counts: &NGramCounts, df: &HashMap<Vec<String>, usize>, log_items: f64) -> Vector {
    counts
        .counts
        .iter()
        .map(|(gram, &tf)| {
            let df = df.get(gram).copied().unwrap_or(0).max(1) as f64;
            (gram.clone(), tf as f64 * (log_items - df.ln()))
        })
        .collect()
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let norm = |v: &Vector| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(g, x)| large.get(g).map(|y| x * y)).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn cider(pairs: &[CaptionPair]) -> Result<CiderReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let tokenized: Vec<(TokenSequence, Vec<TokenSequence>)> =
        pairs.iter().map(CaptionPair::tokens).collect::<Result<_, _>>()?;
    let log_items = (pairs.len() as f64).ln();

    let mut per_n = vec![[0.0; CIDER_MAX_N]; pairs.len()];
    for n in 1..=CIDER_MAX_N {
        let ref_counts: Vec<Vec<NGramCounts>> = tokenized
            .iter()
            .map(|(_, refs)| refs.iter().map(|r| NGramCounts::new(r.as_slice(), n)).collect())
            .collect();
        let mut df: HashMap<Vec<String>, usize> = HashMap::new();
        for refs in &ref_counts {
            let grams: HashSet<&Vec<String>> = refs.iter().flat_map(|r| r.counts.keys()).collect();
            for g in grams {
                *df.entry(g.clone()).or_insert(0) += 1;
            }
        }
        for (item, ((cand, _), refs)) in tokenized.iter().zip(&ref_counts).enumerate() {
            let cv = tfidf(&NGramCounts::new(cand.as_slice(), n), &df, log_items);
            let sum: f64 = refs.iter().map(|r| cosine(&cv, &tfidf(r, &df, log_items))).sum();
            per_n[item][n - 1] = sum / refs.len() as f64;
        }
    }

    let items: Vec<CiderItem> = pairs
        .iter()
        .zip(per_n)
        .map(|(pair, per_n)| CiderItem {
            item_id: pair.item_id.clone(),
            per_n,
            score: per_n.iter().sum::<f64>() / CIDER_MAX_N as f64,
        })
        .collect();
    let mean = items.iter().map(|i| i.score).sum::<f64>() / items.len() as f64;
    Ok(CiderReport { items, mean })
}
