//! METEOR restricted to exact unigram matching (no stemming, synonym or
//! paraphrase stages).

use std::collections::HashMap;

use super::{CaptionPair, MetricError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
        }
    }
}

/// Search budget for the minimum-chunk alignment; past it the best alignment
/// found so far is used.
const NODE_BUDGET: usize = 200_000;

/// Best exact-match METEOR score over the references.
pub fn meteor_lite(pair: &CaptionPair) -> Result<f64, MetricError> {
    meteor_with(pair, MeteorParams::default())
}

pub fn meteor_with(pair: &CaptionPair, params: MeteorParams) -> Result<f64, MetricError> {
    let (cand, refs) = pair.tokens()?;
    Ok(refs
        .iter()
        .map(|r| score_one(cand.as_slice(), r.as_slice(), params))
        .fold(0.0, f64::max))
}

fn score_one(cand: &[String], reference: &[String], params: MeteorParams) -> f64 {
    let (matches, chunks) = align(cand, reference);
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let precision = m / cand.len() as f64;
    let recall = m / reference.len() as f64;
    let f_mean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let penalty = params.gamma * (chunks as f64 / m).powf(params.beta);
    f_mean * (1.0 - penalty)
}

/// Exact-match alignment with the maximum number of matches and, among
/// those, the fewest chunks. Returns `(matches, chunks)`.
///
/// A chunk is a maximal run of matches adjacent in both the candidate and
/// the reference.
pub(crate) fn align(cand: &[String], reference: &[String]) -> (usize, usize) {
    // Intern tokens.
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut c = Vec::with_capacity(cand.len());
    let mut r = Vec::with_capacity(reference.len());
    for (tokens, out) in [(cand, &mut c), (reference, &mut r)] {
        for t in tokens {
            let next = ids.len();
            out.push(*ids.entry(t.as_str()).or_insert(next));
        }
    }
    let types = ids.len();

    let mut cand_count = vec![0usize; types];
    let mut ref_positions: Vec<Vec<usize>> = vec![Vec::new(); types];
    c.iter().for_each(|&t| cand_count[t] += 1);
    r.iter().enumerate().for_each(|(j, &t)| ref_positions[t].push(j));
    let needed: Vec<usize> = (0..types).map(|t| cand_count[t].min(ref_positions[t].len())).collect();
    let matches: usize = needed.iter().sum();
    if matches == 0 {
        return (0, 0);
    }

    let mut search = ChunkSearch {
        c: &c,
        ref_positions: &ref_positions,
        needed,
        remaining_in_cand: cand_count,
        used: vec![false; r.len()],
        best: usize::MAX,
        nodes: 0,
    };
    search.dfs(0, None, 0);
    (matches, search.best)
}

struct ChunkSearch<'a> {
    c: &'a [usize],
    ref_positions: &'a [Vec<usize>],
    needed: Vec<usize>,
    remaining_in_cand: Vec<usize>,
    used: Vec<bool>,
    best: usize,
    nodes: usize,
}

impl ChunkSearch<'_> {
    /// `last` is the `(cand_pos, ref_pos)` of the previous match.
    fn dfs(&mut self, i: usize, last: Option<(usize, usize)>, chunks: usize) {
        if chunks >= self.best {
            return;
        }
        if i == self.c.len() {
            self.best = chunks;
            return;
        }
        self.nodes += 1;
        if self.nodes > NODE_BUDGET && self.best != usize::MAX {
            return;
        }
        let t = self.c[i];
        self.remaining_in_cand[t] -= 1;

        if self.needed[t] > 0 {
            let continues = last.filter(|&(ci, _)| ci + 1 == i).map(|(_, rj)| rj + 1);
            // Extending the current chunk first finds good bounds early.
            let mut options: Vec<usize> = self.ref_positions[t]
                .iter()
                .copied()
                .filter(|&j| !self.used[j])
                .collect();
            if let Some(pos) = continues.and_then(|j| options.iter().position(|&o| o == j)) {
                options.swap(0, pos);
            }
            for j in options {
                let extra = usize::from(continues != Some(j));
                self.used[j] = true;
                self.needed[t] -= 1;
                self.dfs(i + 1, Some((i, j)), chunks + extra);
                self.needed[t] += 1;
                self.used[j] = false;
            }
        }
        // Leaving this occurrence unmatched is allowed only if the remaining
        // occurrences can still supply every required match.
        if self.remaining_in_cand[t] >= self.needed[t] {
            self.dfs(i + 1, last, chunks);
        }
        self.remaining_in_cand[t] += 1;
    }
}
