use std::collections::HashMap;
use std::hash::Hash;

use super::{CaptionPair, MetricError};

/// Length of the longest common subsequence.
///
/// Bit-parallel over the positions of `a` (Hyyrö's formulation):
/// `V' = (V + (V & M_c)) | (V & !M_c)` for each symbol `c` of `b`, and the
/// LCS length is the number of zero bits left in `V`.
pub fn lcs_len<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let words = a.len().div_ceil(64);
    let mut masks: HashMap<&T, Vec<u64>> = HashMap::new();
    for (i, sym) in a.iter().enumerate() {
        masks.entry(sym).or_insert_with(|| vec![0; words])[i / 64] |= 1u64 << (i % 64);
    }

    let mut v = vec![u64::MAX; words];
    for sym in b {
        let Some(mask) = masks.get(sym) else { continue };
        let mut carry = false;
        for (vw, &mw) in v.iter_mut().zip(mask) {
            let u = *vw & mw;
            let (s1, c1) = vw.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            carry = c1 || c2;
            *vw = s2 | (*vw & !mw);
        }
    }

    let tail = a.len() % 64;
    v.iter()
        .enumerate()
        .map(|(w, &bits)| {
            let zeros = !bits;
            let zeros = if w == words - 1 && tail != 0 {
                zeros & ((1u64 << tail) - 1)
            } else {
                zeros
            };
            zeros.count_ones() as usize
        })
        .sum()
}

/// ROUGE-L with β = 1: the best LCS F-measure over the references.
pub fn rouge_l(pair: &CaptionPair) -> Result<f64, MetricError> {
    let (cand, refs) = pair.tokens()?;
    Ok(refs
        .iter()
        .map(|r| {
            let lcs = lcs_len(cand.as_slice(), r.as_slice()) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / cand.len() as f64;
            let rec = lcs / r.len() as f64;
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_small_cases() {
        assert_eq!(lcs_len(b"ABCBDAB", b"BDCABA"), 4);
        assert_eq!(lcs_len(b"", b"abc"), 0);
        assert_eq!(lcs_len(b"abc", b"xyz"), 0);
        assert_eq!(lcs_len(b"abc", b"abc"), 3);
    }

    #[test]
    fn lcs_spans_word_boundaries() {
        let a: Vec<u8> = (0..200).map(|i| (i % 7) as u8).collect();
        let b: Vec<u8> = (0..150).map(|i| (i % 5) as u8).collect();
        // classic DP as a reference
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                dp[i][j] = if a[i - 1] == b[j - 1] {
                    dp[i - 1][j - 1] + 1
                } else {
                    dp[i - 1][j].max(dp[i][j - 1])
                };
            }
        }
        assert_eq!(lcs_len(&a, &b), dp[a.len()][b.len()]);
    }

    #[test]
    fn rouge_examples() {
        let same = CaptionPair::new("x", "the cat sat", &["the cat sat"]);
        assert!((rouge_l(&same).unwrap() - 1.0).abs() < 1e-12);
        let sub = CaptionPair::new("x", "the cat sat", &["the cat sat on the mat"]);
        assert!((rouge_l(&sub).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let disjoint = CaptionPair::new("x", "a b c", &["d e f"]);
        assert_eq!(rouge_l(&disjoint).unwrap(), 0.0);
    }

    #[test]
    fn best_reference_wins() {
        let pair = CaptionPair::new("x", "the cat sat", &["dogs bark", "the cat sat"]);
        assert!((rouge_l(&pair).unwrap() - 1.0).abs() < 1e-12);
    }
}
