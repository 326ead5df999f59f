use serde::{Deserialize, Serialize};

use super::{CaptionPair, MetricError, NGramCounts};

/// Sufficient statistics for BLEU: clipped matches and candidate n-gram
/// totals per order, plus candidate and effective reference lengths.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matched: Vec<usize>,
    pub total: Vec<usize>,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn max_n(&self) -> usize {
        self.matched.len()
    }

    /// Adds another segment's statistics (corpus-level aggregation).
    pub fn accumulate(&mut self, other: &BleuStats) {
        if self.matched.is_empty() {
            self.matched = vec![0; other.max_n()];
            self.total = vec![0; other.max_n()];
        }
        assert_eq!(self.max_n(), other.max_n(), "mixed BLEU orders");
        for n in 0..self.max_n() {
            self.matched[n] += other.matched[n];
            self.total[n] += other.total[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    pub fn precisions(&self) -> Vec<f64> {
        self.matched
            .iter()
            .zip(&self.total)
            .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect()
    }

    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if self.candidate_len > self.reference_len {
            1.0
        } else if self.candidate_len == 0 {
            0.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    /// BLEU-k for k = 1..=max_n, unsmoothed: zero once any precision up to k
    /// is zero.
    pub fn score(&self) -> BleuScore {
        let precisions = self.precisions();
        let bp = self.brevity_penalty();
        let mut log_sum = 0.0;
        let mut dead = false;
        let scores = precisions
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if p == 0.0 {
                    dead = true;
                }
                if dead {
                    return 0.0;
                }
                log_sum += p.ln();
                bp * (log_sum / (i + 1) as f64).exp()
            })
            .collect();
        BleuScore {
            precisions,
            brevity_penalty: bp,
            scores,
            stats: self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// Clipped precision p_n for n = 1..=max_n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    /// BLEU-k for k = 1..=max_n.
    pub scores: Vec<f64>,
    pub stats: BleuStats,
}

impl BleuScore {
    pub fn bleu(&self, k: usize) -> f64 {
        self.scores[k - 1]
    }
}

/// Clipped n-gram statistics of one candidate against its references. The
/// effective reference length is the one closest to the candidate length,
/// the shorter on ties.
pub fn bleu_stats(candidate: &[String], references: &[Vec<String>], max_n: usize) -> BleuStats {
    let mut matched = vec![0; max_n];
    let mut total = vec![0; max_n];
    for n in 1..=max_n {
        let cand = NGramCounts::new(candidate, n);
        let refs: Vec<NGramCounts> = references.iter().map(|r| NGramCounts::new(r, n)).collect();
        for (gram, &count) in &cand.counts {
            let max_ref = refs.iter().map(|r| r.get(gram)).max().unwrap_or(0);
            matched[n - 1] += count.min(max_ref);
        }
        total[n - 1] = cand.total();
    }
    let c = candidate.len();
    let reference_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0);
    BleuStats {
        matched,
        total,
        candidate_len: c,
        reference_len,
    }
}

pub fn bleu(pair: &CaptionPair, max_n: usize) -> Result<BleuScore, MetricError> {
    let (cand, refs) = pair.tokens()?;
    let refs: Vec<Vec<String>> = refs.into_iter().map(|r| r.0).collect();
    Ok(bleu_stats(cand.as_slice(), &refs, max_n).score())
}

/// Corpus BLEU: statistics summed over all pairs before the geometric mean.
pub fn corpus_bleu(pairs: &[CaptionPair], max_n: usize) -> Result<BleuScore, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut stats = BleuStats::default();
    for pair in pairs {
        stats.accumulate(&bleu(pair, max_n)?.stats);
    }
    Ok(stats.score())
}
