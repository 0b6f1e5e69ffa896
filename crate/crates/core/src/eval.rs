//! Corpus-level BLEU with multi-reference support and brevity penalty.
//! Counts are additive across sentences; no smoothing.

use std::collections::HashMap;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add(&self, other: &BleuStats) -> BleuStats {
        let mut out = *self;
        for n in 0..MAX_ORDER {
            out.matches[n] += other.matches[n];
            out.totals[n] += other.totals[n];
        }
        out.hyp_len += other.hyp_len;
        out.ref_len += other.ref_len;
        out
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram statistics of one hypothesis against one or more
/// references. The effective reference length is the closest to the
/// hypothesis length, ties resolved to the shorter reference.
pub fn accumulate<T: AsRef<str>, R: AsRef<str>>(hyp: &[T], refs: &[Vec<R>]) -> BleuStats {
    assert!(!refs.is_empty(), "at least one reference required");
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ..Default::default()
    };
    stats.ref_len = refs
        .iter()
        .map(|r| r.len() as u64)
        .min_by_key(|&rl| {
            let diff = rl.abs_diff(hyp.len() as u64);
            (diff, rl)
        })
        .unwrap();
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<Vec<&str>, u64> = HashMap::new();
        for r in refs {
            for (gram, c) in ngram_counts(r.as_slice(), n) {
                let e = max_ref.entry(gram).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let mut matches = 0;
        let mut total = 0;
        for (gram, c) in hyp_counts {
            total += c;
            matches += c.min(max_ref.get(&gram).copied().unwrap_or(0));
        }
        stats.matches[n - 1] = matches;
        stats.totals[n - 1] = total;
    }
    stats
}

/// Geometric mean of the four clipped precisions times the brevity penalty
/// exp(min(0, 1 - ref_len/hyp_len)). Any zero precision gives 0.
pub fn corpus_bleu(stats: &BleuStats) -> f64 {
    if stats.hyp_len == 0 {
        return 0.0;
    }
    let mut log_prec_sum = 0.0;
    for n in 0..MAX_ORDER {
        if stats.matches[n] == 0 || stats.totals[n] == 0 {
            return 0.0;
        }
        log_prec_sum += (stats.matches[n] as f64 / stats.totals[n] as f64).ln();
    }
    let bp = (1.0 - stats.ref_len as f64 / stats.hyp_len as f64).min(0.0);
    (log_prec_sum / MAX_ORDER as f64 + bp).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_one() {
        let h = toks("the cat sat on the mat");
        let stats = accumulate(&h, &[h.clone()]);
        for n in 0..MAX_ORDER {
            assert_eq!(stats.matches[n], stats.totals[n]);
        }
        assert_eq!(corpus_bleu(&stats), 1.0);
    }

    #[test]
    fn clipping() {
        let stats = accumulate(&toks("a a a"), &[toks("a")]);
        assert_eq!(stats.matches[0], 1);
        assert_eq!(stats.totals[0], 3);
    }

    #[test]
    fn multi_reference_hand_counts() {
        let stats = accumulate(&toks("a b c d"), &[toks("a b x y"), toks("z b c d")]);
        assert_eq!(stats.matches[3], 0);
        assert_eq!(stats.matches[2], 1); // "b c d"
        assert_eq!(stats.matches[1], 3); // "a b", "b c", "c d"
        assert_eq!(stats.matches[0], 4);
    }

    #[test]
    fn zero_fourgram_gives_zero() {
        let stats = accumulate(&toks("a b c e"), &[toks("a b c d")]);
        assert_eq!(corpus_bleu(&stats), 0.0);
    }

    #[test]
    fn hand_computed_two_sentence_corpus() {
        // sentence 1: hyp "a b c d e" vs ref "a b c d f"
        //   matches: 1g 4/5, 2g 3/4, 3g 2/3, 4g 1/2
        // sentence 2: hyp "x y z w" vs ref "x y z w"
        //   matches: 1g 4/4, 2g 3/3, 3g 2/2, 4g 1/1
        let s1 = accumulate(&toks("a b c d e"), &[toks("a b c d f")]);
        let s2 = accumulate(&toks("x y z w"), &[toks("x y z w")]);
        let total = s1.add(&s2);
        assert_eq!(total.matches, [8, 6, 4, 2]);
        assert_eq!(total.totals, [9, 7, 5, 3]);
        assert_eq!(total.hyp_len, 9);
        assert_eq!(total.ref_len, 9);
        let expected = ((8.0f64 / 9.0).ln() / 4.0
            + (6.0f64 / 7.0).ln() / 4.0
            + (4.0f64 / 5.0).ln() / 4.0
            + (2.0f64 / 3.0).ln() / 4.0)
            .exp();
        assert!((corpus_bleu(&total) - expected).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_applies() {
        // identical 4-gram content but shorter hypothesis
        let stats = accumulate(&toks("a b c d"), &[toks("a b c d e f")]);
        let bleu = corpus_bleu(&stats);
        let expected = (1.0f64 - 6.0 / 4.0).exp(); // precisions are all 1
        assert!((bleu - expected).abs() < 1e-12);
    }

    #[test]
    fn closest_ref_length_tie_prefers_shorter() {
        let stats = accumulate(&toks("a b c"), &[toks("a b"), toks("a b c d")]);
        assert_eq!(stats.ref_len, 2);
    }

    #[test]
    fn permutation_invariance() {
        let s1 = accumulate(&toks("a b c d e"), &[toks("a b c d f")]);
        let s2 = accumulate(&toks("x y z w"), &[toks("x y z v")]);
        assert_eq!(corpus_bleu(&s1.add(&s2)), corpus_bleu(&s2.add(&s1)));
    }
}
