//! Fixtures and reference implementations shared by the integration tests.
//!
//! The oracles here are written for clarity rather than speed and share no
//! code with the library beyond its public types.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use artaug::augment::{SyntheticDataset, VariationRecord};
use artaug::corpus::{ArtworkRecord, Dataset, Split};
use artaug::embedstore::EmbeddingTable;
use rand::Rng;

pub const VOCAB: [&str; 8] = ["the", "cat", "sat", "on", "mat", "a", "dog", "red"];

/// `n` train records with two visual sentences each.
pub fn fixture_dataset(n: usize) -> Dataset {
    let records = (0..n)
        .map(|i| ArtworkRecord {
            id: format!("art{i:02}"),
            image_path: format!("images/art{i:02}.jpg"),
            split: Split::Train,
            visual_sentences: vec![
                format!("A portrait of sitter {i}."),
                "Soft light falls from the left.".into(),
            ],
            contextual_sentences: vec!["Painted in oil.".into()],
        })
        .collect();
    Dataset::new("fixture", records).unwrap()
}

pub fn write_fixture_manifest(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("manifest.jsonl");
    fixture_dataset(n).write_manifest(&path).unwrap();
    path
}

/// `m` variations per record of `dataset`, no files behind them.
pub fn synthetic_for(dataset: &Dataset, m: usize) -> SyntheticDataset {
    let variations = dataset
        .records
        .iter()
        .flat_map(|r| {
            (0..m).map(move |j| VariationRecord {
                parent_id: r.id.clone(),
                variation_index: j,
                seed: j as u64,
                image_path: format!("{}_{j}.png", r.id),
                prompt_text: "p".into(),
                strength: 0.75,
                guidance_scale: 7.5,
            })
        })
        .collect();
    SyntheticDataset::new("fixture", m, variations).unwrap()
}

pub fn random_tokens<R: Rng>(rng: &mut R, min_len: usize, max_len: usize, vocab: usize) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len)
        .map(|_| VOCAB[rng.random_range(0..vocab)].to_string())
        .collect()
}

pub fn basis(dim: usize, i: usize) -> Vec<f32> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

pub fn table(dim: usize, rows: impl IntoIterator<Item = (String, Vec<f32>)>) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim).unwrap();
    for (id, v) in rows {
        t.insert(id, v).unwrap();
    }
    t
}

// ---- BLEU ----

fn count_at(tokens: &[String], gram: &[String]) -> usize {
    if tokens.len() < gram.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| &tokens[i..i + gram.len()] == gram)
        .count()
}

/// Clipped n-gram matches and candidate n-gram total by direct counting.
pub fn brute_clipped(candidate: &[String], references: &[Vec<String>], n: usize) -> (usize, usize) {
    if candidate.len() < n {
        return (0, 0);
    }
    let grams: Vec<&[String]> = (0..=candidate.len() - n).map(|i| &candidate[i..i + n]).collect();
    let mut seen: Vec<&[String]> = Vec::new();
    let mut clipped = 0;
    for g in &grams {
        if seen.contains(g) {
            continue;
        }
        seen.push(g);
        let in_cand = count_at(candidate, g);
        let max_ref = references.iter().map(|r| count_at(r, g)).max().unwrap_or(0);
        clipped += in_cand.min(max_ref);
    }
    (clipped, grams.len())
}

// ---- LCS ----

/// The textbook O(nm) table.
pub fn lcs_dp<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn rouge_l_oracle(candidate: &[String], references: &[Vec<String>]) -> f64 {
    references
        .iter()
        .map(|r| {
            let l = lcs_dp(candidate, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let p = l / candidate.len() as f64;
            let rec = l / r.len() as f64;
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max)
}

// ---- CIDEr ----

fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

/// Per-item CIDEr from dense TF-IDF vectors over the corpus vocabulary.
///
/// `items` holds `(candidate, references)` token lists.
pub fn cider_oracle(items: &[(Vec<String>, Vec<Vec<String>>)]) -> Vec<f64> {
    let n_items = items.len() as f64;
    let mut per_item = vec![0.0; items.len()];
    for n in 1..=4 {
        let mut vocab: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (c, refs) in items {
            for g in ngrams(c, n).into_iter().chain(refs.iter().flat_map(|r| ngrams(r, n))) {
                let next = vocab.len();
                vocab.entry(g).or_insert(next);
            }
        }
        let dim = vocab.len();
        let mut df = vec![0usize; dim];
        for (_, refs) in items {
            let mut present = vec![false; dim];
            for r in refs {
                for g in ngrams(r, n) {
                    present[vocab[&g]] = true;
                }
            }
            for (d, p) in df.iter_mut().zip(present) {
                *d += usize::from(p);
            }
        }
        let idf: Vec<f64> = df.iter().map(|&d| (n_items / d.max(1) as f64).ln()).collect();
        let dense = |tokens: &[String]| {
            let mut v = vec![0.0; dim];
            for g in ngrams(tokens, n) {
                v[vocab[&g]] += 1.0;
            }
            v.iter().zip(&idf).map(|(tf, w)| tf * w).collect::<Vec<f64>>()
        };
        for (k, (c, refs)) in items.iter().enumerate() {
            let cv = dense(c);
            let mut total = 0.0;
            for r in refs {
                let rv = dense(r);
                let dot: f64 = cv.iter().zip(&rv).map(|(a, b)| a * b).sum();
                let na = cv.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = rv.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na > 0.0 && nb > 0.0 {
                    total += (dot / (na * nb)).clamp(0.0, 1.0);
                }
            }
            per_item[k] += total / refs.len() as f64 / 4.0;
        }
    }
    per_item
}

// ---- retrieval ----

/// Recall@k by sorting each query row (score descending, then index) and
/// finding the ground truth, which is the diagonal.
pub fn recall_oracle(values: &[Vec<f64>], k: usize) -> f64 {
    let hits = values
        .iter()
        .enumerate()
        .filter(|(q, row)| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            order.iter().position(|&j| j == *q).unwrap() < k
        })
        .count();
    hits as f64 / values.len() as f64
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let ln_fact = |m: u64| (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Probability that a ground truth with `better` stronger competitors out of
/// `gallery - 1` distractors lands in the top `k` of a uniformly drawn pool
/// of `pool` items.
pub fn pooled_hit_probability(gallery: u64, better: u64, pool: u64, k: u64) -> f64 {
    let others = gallery - 1;
    let draws = pool - 1;
    let worse = others - better;
    let denom = ln_choose(others, draws);
    (0..k.min(better + 1))
        .filter(|&x| draws >= x && draws - x <= worse)
        .map(|x| (ln_choose(better, x) + ln_choose(worse, draws - x) - denom).exp())
        .sum()
}

/// `n` × `n` scores where every query has exactly `better` items ahead of
/// its ground truth.
pub fn circulant_fixture(n: usize, better: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|q| {
            (0..n)
                .map(|j| {
                    let offset = (j + n - q) % n;
                    if offset == 0 {
                        0.5
                    } else if offset <= better {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}
